import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from turnpike import (
    HorizonExceededError,
    InvalidArgumentError,
    CantorState,
    DenseParams,
    cantor_orbit,
    cantor_phi,
    cantor_step,
    cantor_zeta0,
    dense_dynamics,
    dense_phi,
    dense_system,
    level_set,
    verify_example,
)
from turnpike.examples import cantor_f0, dist_to_cantor, s_point

import oracles


class TestCantorState:
    def test_zeta0_digits(self):
        assert cantor_zeta0(10).digits == (1, 0, 1, 0, 0, 1, 0, 0, 0, 1)
        assert cantor_zeta0(2).digits == (1, 0)
        assert cantor_zeta0(2).value == pytest.approx(2 / 3, abs=1e-16)

    def test_zeta0_value(self):
        series = 2 * math.fsum(3.0 ** -(i * (i - 1) // 2) for i in range(2, 12))
        assert cantor_zeta0(30).value == pytest.approx(series, abs=1e-15)
        assert cantor_zeta0(30).value == pytest.approx(0.7435178, abs=1e-6)

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            cantor_zeta0(1)

    def test_step(self):
        s = cantor_step(cantor_zeta0(10))
        assert s.digits[:2] == (0, 1)
        assert cantor_step(s_point(1)).is_zero
        z = cantor_step(s_point(0))
        assert cantor_step(z).is_zero and cantor_step(z).value == 0.0

    def test_buffer_exhausted(self):
        with pytest.raises(HorizonExceededError):
            cantor_step(CantorState((1,)))

    @settings(max_examples=100)
    @given(st.lists(st.integers(0, 1), min_size=2, max_size=40))
    def test_digit_real_consistency(self, digits):
        s = CantorState(tuple(digits))
        L = len(digits)
        nxt = cantor_step(s)
        assert abs(nxt.value - (3 * s.value - 2 * digits[0])) <= 3.0 ** -(L - 1) + 1e-12

    def test_orbit_matches_digit_simulation(self):
        s = cantor_zeta0(400)
        digit_orbit = []
        for _ in range(300):
            digit_orbit.append(s.value)
            s = cantor_step(s)
        assert np.allclose(cantor_orbit(300), digit_orbit, atol=1e-15, rtol=0)
        assert np.allclose(cantor_orbit(300), oracles.cantor_orbit(300), atol=1e-15, rtol=0)

    def test_classical_cluster_points_visited(self):
        x = cantor_orbit(10_000)
        for j in range(1, 5):
            assert np.min(np.abs(x - 2 / 3**j)) <= 3.0**-8


class TestCantorFunctions:
    def test_phi_values(self):
        assert cantor_phi(0.0) == 1.0
        assert cantor_phi(1 / 6) == 1.0
        assert cantor_phi(0.5) == 1.0
        # nearest point of S to 2/3 is 1/2
        assert cantor_phi(2 / 3) == pytest.approx(5 / 6, abs=1e-15)

    def test_phi_below_one_off_S(self):
        x = np.linspace(0.001, 1, 997)
        S = np.array([0.5 * 3.0**-k for k in range(30)])
        off = np.min(np.abs(x[:, None] - S[None, :]), axis=1) > 1e-9
        assert np.all(cantor_phi(x[off]) < 1.0)

    def test_f0_on_cantor_set_is_shift(self):
        x = cantor_orbit(200)
        assert np.allclose(cantor_f0(x[:-1]), x[1:], atol=1e-12)
        assert np.all(dist_to_cantor(x) <= 1e-12)

    def test_f0_vanishes_on_S(self):
        S = np.array([0.5 * 3.0**-k for k in range(15)])
        assert np.all(cantor_f0(S) == 0.0)
        assert cantor_f0(0.0) == 0.0


class TestDense:
    def test_values(self):
        p = DenseParams(0.05)
        assert dense_dynamics(1 / 3, 1, p) == 1.0
        assert dense_dynamics(1.0, 1, p) == pytest.approx(1 / 3, abs=1e-15)
        x = np.linspace(0, 0.55, 100)
        assert np.array_equal(dense_dynamics(x, 0, p), x)

    def test_params(self):
        with pytest.raises(InvalidArgumentError):
            DenseParams(1 / 12)
        with pytest.raises(InvalidArgumentError):
            DenseParams(0.0)

    def test_phi(self):
        assert dense_phi(1 / 3) == pytest.approx(1 / 3, abs=1e-15)
        assert dense_phi(2 / 3) == pytest.approx(1 / 3, abs=1e-15)
        assert dense_phi(0.5) < 1 / 3
        assert dense_phi(1.0) == pytest.approx(0.8, abs=1e-15)

    @settings(max_examples=200)
    @given(
        st.floats(0.01, 1 / 12 - 1e-6),
        st.floats(0, 1),
        st.floats(0, 1),
        st.floats(0, 1),
    )
    def test_lipschitz(self, delta, x, y, u):
        p = DenseParams(delta)
        assert abs(dense_dynamics(x, u, p) - dense_dynamics(y, u, p)) <= 13 * abs(x - y) + 1e-12

    def test_level_set_shape(self):
        sys = dense_system(0.05)
        step = 1e-3
        D = level_set(sys, 1 / 3 - 1e-9, step)[:, 0]
        grid = np.linspace(0, 1, 1001)
        expected = set(grid[grid >= 2 / 3].tolist())
        got = set(D.tolist())
        assert expected <= got
        extra = np.array(sorted(got - expected))
        assert np.all(np.abs(extra - 1 / 3) <= step)


class TestVerify:
    def test_statistical_not_fin(self):
        rep = verify_example("statistical-not-fin", horizon=10_000, eps=0.01)
        assert rep.passed, [c for c in rep.claims if not c["pass"]]

    def test_dense(self):
        rep = verify_example("dense", delta=0.05)
        assert rep.passed, [c for c in rep.claims if not c["pass"]]
        c3 = next(c for c in rep.claims if c["claim"].startswith("C3 second"))
        assert c3["measured"]["holds"] is False
        assert any("(0,1,0,1" in n for n in rep.notes)

    def test_unknown(self):
        with pytest.raises(InvalidArgumentError):
            verify_example("unknown")

    def test_claim_fields(self):
        rep = verify_example("dense")
        for c in rep.to_json()["claims"]:
            assert set(c) == {"claim", "expected", "measured", "pass"}

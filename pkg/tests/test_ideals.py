import math

import numpy as np
import pytest

from turnpike import (
    IdealKind,
    IdealSpec,
    IndexSet,
    InvalidArgumentError,
    classify_small,
    log_density_estimate,
    longest_ap,
    named_set,
    summable_mass,
    translate_set,
    upper_density_estimate,
)
from turnpike.errors import ConfigError

import oracles

# values computed once with the brute-force oracles in oracles.py
SQUARES_DENSITY_1E4 = 0.03125  # attained at n = 1024 = 32^2
DYADIC_LOG_2_16 = 0.5663948173023482
SQUARES_LOG_1E4_LITERAL = 0.21550958254739902
SQUARES_RECIPROCAL = (1.634983900184893, 0.004233992694873242)
EVENS_RECIPROCAL = (4.547254426492218, 0.34652359527997256)


def S(values, horizon):
    return IndexSet.from_iterable(values, horizon)


class TestIndexSet:
    def test_sorted_unique(self):
        A = S([5, 1, 3, 3], 10)
        assert A.indices.tolist() == [1, 3, 5]

    def test_rejects_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            IndexSet(np.array([0, 2]), 5)
        with pytest.raises(InvalidArgumentError):
            IndexSet(np.array([6]), 5)

    def test_empty_allowed(self):
        assert len(S([], 7)) == 0

    def test_json_round_trip(self):
        A = named_set("squares", 100)
        assert IndexSet.from_json(A.to_json()) == A

    def test_set_algebra(self):
        A, B = S([1, 2, 3], 6), S([3, 4], 6)
        assert A.union(B).indices.tolist() == [1, 2, 3, 4]
        assert A.intersection(B).indices.tolist() == [3]
        assert A.complement().indices.tolist() == [4, 5, 6]
        assert A.intersection(B).issubset(A)

    def test_generators(self):
        assert named_set("evens", 10).indices.tolist() == [2, 4, 6, 8, 10]
        assert named_set("triangular", 10).indices.tolist() == [1, 3, 6, 10]
        assert named_set("dyadic", 20).indices.tolist() == [1, 4, 5, 6, 7, 16, 17, 18, 19, 20]
        assert named_set("dyadic", 2**16).indices.tolist() == oracles.dyadic(2**16)
        with pytest.raises(ConfigError):
            named_set("primes", 10)


class TestDensity:
    def test_evens(self):
        assert upper_density_estimate(named_set("evens", 1000), 100) == 0.5

    def test_squares(self):
        A = named_set("squares", 10_000)
        value = upper_density_estimate(A, 1000)
        assert value == pytest.approx(oracles.density_sup(A.indices.tolist(), 10_000, 1000), abs=0)
        assert value == SQUARES_DENSITY_1E4
        assert value == pytest.approx(0.031, abs=1e-3)

    def test_empty(self):
        assert upper_density_estimate(S([], 50), 7) == 0.0

    def test_burn_in_beyond_horizon(self):
        with pytest.raises(InvalidArgumentError):
            upper_density_estimate(S([1], 10), 11)
        with pytest.raises(InvalidArgumentError):
            log_density_estimate(S([1], 10), 11)


class TestLogDensity:
    def test_full(self):
        assert log_density_estimate(named_set("full", 500), 3) == pytest.approx(1.0, abs=1e-15)

    def test_dyadic(self):
        A = named_set("dyadic", 2**16)
        value = log_density_estimate(A, 256)
        assert value == pytest.approx(DYADIC_LOG_2_16, abs=1e-12)
        assert value == pytest.approx(0.58, abs=0.05)

    def test_squares_literal_value(self):
        # the raw estimate counts every square from 1 on; the harmonic weight
        # of the first few squares keeps it far from zero at this horizon
        A = named_set("squares", 10_000)
        value = log_density_estimate(A, 1000)
        assert value == pytest.approx(SQUARES_LOG_1E4_LITERAL, abs=1e-12)
        assert value == pytest.approx(oracles.log_density_sup(A.indices.tolist(), 10_000, 1000), abs=1e-12)

    def test_squares_classified_small(self):
        rep = classify_small(IdealSpec(IdealKind.LOGARITHMIC), named_set("squares", 10_000))
        assert rep.small
        assert rep.score <= 0.02


class TestSummable:
    def test_squares(self):
        partial, tail = summable_mass(named_set("squares", 10_000))
        assert partial == pytest.approx(1.635, abs=1e-3)
        assert partial == pytest.approx(math.fsum(1 / k**2 for k in range(1, 101)), abs=1e-12)
        assert (partial, tail) == pytest.approx(SQUARES_RECIPROCAL, abs=1e-12)

    def test_evens(self):
        partial, tail = summable_mass(named_set("evens", 10_000))
        assert partial == pytest.approx(4.55, abs=5e-3)
        assert partial == pytest.approx(0.5 * math.fsum(1 / k for k in range(1, 5001)), abs=1e-12)
        assert tail == pytest.approx(EVENS_RECIPROCAL[1], abs=1e-12)
        assert tail > 0.05

    def test_empty(self):
        assert summable_mass(S([], 9)) == (0.0, 0.0)


class TestLongestAP:
    @pytest.mark.parametrize(
        "values,expected", [([1, 3, 5, 7], 4), ([1, 2, 4, 8, 16], 2), ([], 0), ([9], 1)]
    )
    def test_examples(self, values, expected):
        assert longest_ap(S(values, 20)) == expected
        assert oracles.longest_ap(values) == expected

    def test_large_sets(self):
        assert longest_ap(named_set("evens", 10_000)) == 5000
        assert longest_ap(named_set("squares", 10_000)) == 3


class TestTranslate:
    def test_examples(self):
        assert translate_set(S([1, 2, 3], 10), 2).indices.tolist() == [3, 4, 5]
        assert translate_set(S([1, 2, 3], 10), -2).indices.tolist() == [1]
        assert len(translate_set(S([10], 10), 1)) == 0
        assert translate_set(S([10], 10), 1).horizon == 10


class TestClassify:
    def test_density_squares(self):
        rep = classify_small(IdealSpec(IdealKind.DENSITY), named_set("squares", 10_000))
        assert rep.small and rep.score == pytest.approx(0.031, abs=1e-3)

    def test_density_evens(self):
        rep = classify_small(IdealSpec(IdealKind.DENSITY), named_set("evens", 1000))
        assert not rep.small and rep.score == 0.5

    def test_summable_squares(self):
        rep = classify_small(IdealSpec(IdealKind.SUMMABLE), named_set("squares", 10_000))
        assert rep.small
        assert rep.details["partial_sum"] <= 10.0
        assert rep.details["tail_increment"] <= 0.05

    def test_fin_counts_members_after_burn_in(self):
        spec = IdealSpec(IdealKind.FIN)
        assert classify_small(spec, S(range(1, 101), 1000)).small
        assert not classify_small(spec, S([1, 999], 1000)).small

    def test_vdw(self):
        spec = IdealSpec(IdealKind.VAN_DER_WAERDEN)
        assert classify_small(spec, named_set("squares", 10_000)).small
        assert not classify_small(spec, named_set("evens", 10_000)).small

    def test_small_matches_rule(self):
        for kind in IdealKind:
            spec = IdealSpec(kind)
            for name in ("squares", "evens", "dyadic", "empty", "full"):
                rep = classify_small(spec, named_set(name, 4096))
                if kind is IdealKind.SUMMABLE:
                    expected = rep.details["partial_sum"] <= 10.0 and rep.score <= 0.05
                else:
                    expected = rep.score <= spec.threshold(4096)
                assert rep.small == expected


class TestIdealSpec:
    def test_defaults(self):
        spec = IdealSpec()
        assert spec.kind is IdealKind.DENSITY
        assert spec.smallness_threshold == 0.05
        assert spec.burn_in(10_000) == 1000

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            IdealSpec(IdealKind.DENSITY, smallness_threshold=1.5)
        with pytest.raises(InvalidArgumentError):
            IdealSpec(burn_in_fraction=1.0)
        with pytest.raises(ConfigError):
            IdealSpec("nonsense")

    def test_json_strict(self):
        spec = IdealSpec(IdealKind.LOGARITHMIC, smallness_threshold=0.1)
        assert IdealSpec.from_json(spec.to_json()) == spec
        with pytest.raises(ConfigError):
            IdealSpec.from_json({"kind": "Fin", "tau": 0.1})

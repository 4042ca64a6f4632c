"""Property-based checks of the estimators and the grid sets (>= 1000 cases)."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from turnpike import (
    IdealKind,
    IdealSpec,
    IndexSet,
    classify_small,
    decrease_sets,
    dense_system,
    level_set,
    log_density_estimate,
    longest_ap,
    named_set,
    stationary_points,
    summable_mass,
    translate_set,
    upper_density_estimate,
)
from turnpike.system import STATIONARY_TOL, STRICTNESS_MARGIN, decrease_margin

import oracles

CASES = 200


@st.composite
def nested_pair(draw):
    N = draw(st.integers(20, 400))
    big = draw(st.sets(st.integers(1, N), max_size=N))
    small = draw(st.sets(st.sampled_from(sorted(big)), max_size=len(big))) if big else set()
    b = draw(st.integers(1, N))
    return IndexSet.from_iterable(small, N), IndexSet.from_iterable(big, N), b


@st.composite
def two_sets(draw):
    N = draw(st.integers(20, 400))
    A = draw(st.sets(st.integers(1, N), max_size=N))
    B = draw(st.sets(st.integers(1, N), max_size=N))
    b = draw(st.integers(1, N))
    return IndexSet.from_iterable(A, N), IndexSet.from_iterable(B, N), b


@settings(max_examples=CASES)
@given(nested_pair())
def test_monotonicity(case):
    A, B, b = case
    assert upper_density_estimate(A, b) <= upper_density_estimate(B, b) + 1e-15
    assert log_density_estimate(A, b) <= log_density_estimate(B, b) + 1e-15
    pa, ta = summable_mass(A)
    pb, tb = summable_mass(B)
    assert pa <= pb + 1e-12 and ta <= tb + 1e-12
    assert longest_ap(A) <= longest_ap(B)
    for kind in IdealKind:
        spec = IdealSpec(kind)
        if classify_small(spec, B).small:
            assert classify_small(spec, A).small


@settings(max_examples=CASES)
@given(two_sets())
def test_subadditivity(case):
    A, B, b = case
    assert upper_density_estimate(A.union(B), b) <= upper_density_estimate(A, b) + upper_density_estimate(B, b) + 1e-15


@settings(max_examples=CASES)
@given(two_sets(), st.integers(-50, 50))
def test_translation_stability(case, i):
    A, _, b = case
    if abs(i) >= b:
        i = int(np.sign(i)) * (b - 1)
    diff = abs(upper_density_estimate(translate_set(A, i), b) - upper_density_estimate(A, b))
    assert diff <= abs(i) / b + 1e-12


@settings(max_examples=CASES)
@given(st.sets(st.integers(1, 30), max_size=12))
def test_longest_ap_matches_enumeration(values):
    assert longest_ap(IndexSet.from_iterable(values, 30)) == oracles.longest_ap(values)


FAMILY = ("squares", "evens", "dyadic", "full", "empty")


def test_nesting_verdicts_on_family():
    # Summable-small => Density-small => Logarithmic-small at matched thresholds
    N = 10_000
    for name in FAMILY:
        A = named_set(name, N)
        v = {k: classify_small(IdealSpec(k), A).small for k in (IdealKind.SUMMABLE, IdealKind.DENSITY, IdealKind.LOGARITHMIC)}
        if v[IdealKind.SUMMABLE]:
            assert v[IdealKind.DENSITY], name
        if v[IdealKind.DENSITY]:
            assert v[IdealKind.LOGARITHMIC], name


@settings(max_examples=CASES)
@given(st.sets(st.integers(1, 10_000), max_size=30))
def test_nesting_verdicts_on_perturbed_family(extra):
    # sparse perturbations of the family keep the nesting
    N = 10_000
    E = IndexSet.from_iterable(extra, N)
    for name in FAMILY:
        A = named_set(name, N).union(E)
        s = classify_small(IdealSpec(IdealKind.SUMMABLE), A).small
        d = classify_small(IdealSpec(IdealKind.DENSITY), A).small
        lg = classify_small(IdealSpec(IdealKind.LOGARITHMIC), A).small
        assert (not s or d) and (not d or lg)


# grid sets on the dense example, random delta

_DELTAS = [0.01, 0.03, 0.05, 0.07, 0.08]
_CACHE = {}


def _dense(delta):
    if delta not in _CACHE:
        sys = dense_system(delta)
        _CACHE[delta] = (sys, stationary_points(sys, 2e-3))
    return _CACHE[delta]


@settings(max_examples=CASES)
@given(st.sampled_from(_DELTAS), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_stationary_points_never_strictly_decrease(delta, a, b):
    sys, rep = _dense(delta)
    F, _ = decrease_margin(sys, rep.points)
    # within the residual tolerance a stationary point cannot decrease P for every control
    assert np.all(F >= -(STRICTNESS_MARGIN + STATIONARY_TOL))
    E, Ebar = decrease_sets(sys, points=np.array([[a], [b]]))
    assert set(map(tuple, E.tolist())) <= set(map(tuple, Ebar.tolist()))


@settings(max_examples=CASES)
@given(st.sampled_from(_DELTAS), st.floats(-0.2, 1.0), st.floats(-0.2, 1.0))
def test_level_set_monotone(delta, r1, r2):
    sys, _ = _dense(delta)
    lo, hi = min(r1, r2), max(r1, r2)
    big = set(map(tuple, level_set(sys, lo, 5e-3).tolist()))
    small = set(map(tuple, level_set(sys, hi, 5e-3).tolist()))
    assert small <= big


@settings(max_examples=CASES)
@given(st.sampled_from(_DELTAS), st.floats(0.005, 0.05))
def test_decrease_sets_nested_on_grid(delta, step):
    sys, _ = _dense(delta)
    E, Ebar = decrease_sets(sys, step)
    assert set(map(tuple, E.tolist())) <= set(map(tuple, Ebar.tolist()))
    assert not (set(map(tuple, E.tolist())) & set(map(tuple, _dense(delta)[1].points.tolist())))

"""Finite-horizon estimators for the concrete ideals on N = {1, 2, ...}.

An ideal is a family of "small" index sets.  Membership is a statement
about infinite sets, so everything here works on a prefix ``[1, N]`` and
replaces the limit by a declared, deterministic proxy:

* ``Fin``            -- no member beyond the burn-in index.
* ``Density``        -- running-ratio supremum of ``|A ∩ [1,n]| / n`` past burn-in.
* ``Logarithmic``    -- same with harmonic weights ``1/k``.
* ``Summable``       -- reciprocal sum is bounded and stagnates on ``(N/2, N]``.
* ``VanDerWaerden``  -- longest arithmetic progression is at most ``c ln N``.
"""

from dataclasses import dataclass, field
import enum
import math

import numpy as np

from . import _kernels
from .errors import ConfigError, InvalidArgumentError


class IdealKind(str, enum.Enum):
    FIN = "Fin"
    DENSITY = "Density"
    LOGARITHMIC = "Logarithmic"
    SUMMABLE = "Summable"
    VAN_DER_WAERDEN = "VanDerWaerden"

    @classmethod
    def parse(cls, name):
        key = str(name).replace("_", "").replace("-", "").lower()
        aliases = {
            "fin": cls.FIN,
            "density": cls.DENSITY,
            "statistical": cls.DENSITY,
            "logarithmic": cls.LOGARITHMIC,
            "log": cls.LOGARITHMIC,
            "summable": cls.SUMMABLE,
            "vanderwaerden": cls.VAN_DER_WAERDEN,
            "vdw": cls.VAN_DER_WAERDEN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown ideal kind {name!r}") from None


@dataclass(frozen=True)
class IndexSet:
    """Sorted, unique, 1-based indices inside ``[1, horizon]``."""

    indices: np.ndarray
    horizon: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if self.horizon < 1:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise InvalidArgumentError("indices must be strictly increasing")
            if idx[0] < 1 or idx[-1] > self.horizon:
                raise InvalidArgumentError(f"indices must lie in [1, {self.horizon}]")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "horizon", int(self.horizon))

    @classmethod
    def from_iterable(cls, values, horizon):
        idx = np.unique(np.asarray(list(values), dtype=np.int64))
        return cls(idx, horizon)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask) + 1, mask.size)

    def mask(self):
        out = np.zeros(self.horizon, dtype=bool)
        out[self.indices - 1] = True
        return out

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, item):
        i = np.searchsorted(self.indices, item)
        return bool(i < self.indices.size and self.indices[i] == item)

    def __eq__(self, other):
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.horizon, self.indices.tobytes()))

    def union(self, other):
        _same_horizon(self, other)
        return IndexSet(np.union1d(self.indices, other.indices), self.horizon)

    def intersection(self, other):
        _same_horizon(self, other)
        return IndexSet(np.intersect1d(self.indices, other.indices), self.horizon)

    def complement(self):
        return IndexSet.from_mask(~self.mask())

    def issubset(self, other):
        return self.horizon == other.horizon and np.isin(self.indices, other.indices).all()

    def restrict(self, lower):
        """Members ``>= lower``; same horizon."""
        return IndexSet(self.indices[self.indices >= lower], self.horizon)

    def to_json(self):
        return {"indices": self.indices.tolist(), "horizon": self.horizon}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, list):
            raise ConfigError('index set JSON needs a "horizon" field')
        try:
            return cls.from_iterable(obj["indices"], int(obj["horizon"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed index set JSON: {exc}") from None


def _same_horizon(a, b):
    if a.horizon != b.horizon:
        raise InvalidArgumentError(f"horizon mismatch: {a.horizon} vs {b.horizon}")


# ---------------------------------------------------------------------------
# named generators (CLI use)


def evens(horizon):
    return IndexSet(np.arange(2, horizon + 1, 2), horizon)


def squares(horizon):
    r = np.arange(1, math.isqrt(horizon) + 1, dtype=np.int64)
    return IndexSet(r * r, horizon)


def triangular(horizon):
    """Triangular numbers i(i-1)/2, i >= 2: 1, 3, 6, 10, ..."""
    vals = []
    i = 2
    while i * (i - 1) // 2 <= horizon:
        vals.append(i * (i - 1) // 2)
        i += 1
    return IndexSet(np.asarray(vals, dtype=np.int64), horizon)


def dyadic(horizon):
    """Union of blocks [4^k, 2*4^k) intersected with [1, horizon]."""
    blocks = []
    start = 1
    while start <= horizon:
        blocks.append(np.arange(start, min(2 * start, horizon + 1), dtype=np.int64))
        start *= 4
    return IndexSet(np.concatenate(blocks), horizon)


def full(horizon):
    return IndexSet(np.arange(1, horizon + 1), horizon)


def empty(horizon):
    return IndexSet(np.zeros(0, dtype=np.int64), horizon)


GENERATORS = {
    "evens": evens,
    "squares": squares,
    "dyadic": dyadic,
    "triangular": triangular,
    "full": full,
    "empty": empty,
}


def named_set(name, horizon):
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ConfigError(f"unknown set generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(int(horizon))


# ---------------------------------------------------------------------------
# estimators


def _check_burn_in(A, burn_in):
    if burn_in < 1:
        raise InvalidArgumentError(f"burn_in must be positive, got {burn_in}")
    if burn_in > A.horizon:
        raise InvalidArgumentError(f"burn_in {burn_in} exceeds horizon {A.horizon}")


def upper_density_estimate(A, burn_in):
    """``max_{burn_in <= n <= N} |A ∩ [1,n]| / n``."""
    _check_burn_in(A, burn_in)
    return _kernels.density_sup(A.indices, burn_in)


_HARMONIC = {"table": _kernels.harmonic_numbers(1)}


def harmonic_table(n):
    """Cached harmonic numbers ``H[0..n]`` (grown on demand, never shrunk)."""
    table = _HARMONIC["table"]
    if table.size <= n:
        table = _kernels.harmonic_numbers(max(n, 2 * table.size))
        _HARMONIC["table"] = table
    return table


def log_density_estimate(A, burn_in):
    """``max_{burn_in <= n <= N} sum_{k in A, k<=n} 1/k / H_n``."""
    _check_burn_in(A, burn_in)
    return _kernels.log_density_sup(A.indices, burn_in, harmonic_table(A.horizon))


def summable_mass(A):
    """Return ``(sum_{n in A} 1/n, sum over members in (N/2, N])``."""
    if len(A) == 0:
        return 0.0, 0.0
    recip = 1.0 / A.indices
    tail = recip[2 * A.indices > A.horizon]
    return math.fsum(recip), math.fsum(tail)


def longest_ap(A):
    """Length of the longest arithmetic progression inside ``A`` (0 if empty)."""
    idx = A.indices if isinstance(A, IndexSet) else np.unique(np.asarray(A, dtype=np.int64))
    return _kernels.longest_ap(idx)


def translate_set(A, i):
    """``(A + i) ∩ [1, N]``."""
    shifted = A.indices + int(i)
    keep = (shifted >= 1) & (shifted <= A.horizon)
    return IndexSet(shifted[keep], A.horizon)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class IdealSpec:
    kind: IdealKind = IdealKind.DENSITY
    smallness_threshold: float = 0.05
    burn_in_fraction: float = 0.1
    summable_bound: float = 10.0
    ap_length_coefficient: float = 3.0

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, IdealKind) else IdealKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.smallness_threshold < 0:
            raise InvalidArgumentError("smallness_threshold must be nonnegative")
        if kind in (IdealKind.DENSITY, IdealKind.LOGARITHMIC) and self.smallness_threshold > 1:
            raise InvalidArgumentError("smallness_threshold must lie in [0, 1] for density ideals")
        if not 0 < self.burn_in_fraction < 1:
            raise InvalidArgumentError("burn_in_fraction must lie in (0, 1)")
        if self.summable_bound <= 0 or self.ap_length_coefficient <= 0:
            raise InvalidArgumentError("summable_bound and ap_length_coefficient must be positive")

    def burn_in(self, horizon):
        return min(horizon, max(1, math.ceil(self.burn_in_fraction * horizon)))

    @property
    def translation_invariant(self):
        # every ideal modelled here is invariant under translations
        return True

    def threshold(self, horizon):
        """Score at or below which a set is small (Summable: tail threshold)."""
        if self.kind is IdealKind.FIN:
            return 0.0
        if self.kind is IdealKind.VAN_DER_WAERDEN:
            return self.ap_length_coefficient * math.log(horizon)
        return self.smallness_threshold

    def divergence_threshold(self, horizon):
        """Score at or above which a non-small set counts as clearly large."""
        if self.kind is IdealKind.FIN:
            return 2 * self.smallness_threshold
        return 2 * self.threshold(horizon)

    def to_json(self):
        return {
            "kind": self.kind.value,
            "smallness_threshold": self.smallness_threshold,
            "burn_in_fraction": self.burn_in_fraction,
            "summable_bound": self.summable_bound,
            "ap_length_coefficient": self.ap_length_coefficient,
        }

    @classmethod
    def from_json(cls, obj):
        allowed = {"kind", "smallness_threshold", "burn_in_fraction", "summable_bound", "ap_length_coefficient"}
        unknown = set(obj) - allowed
        if unknown:
            raise ConfigError(f"unknown ideal keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class SmallnessReport:
    score: float
    small: bool
    kind: IdealKind
    horizon: int
    details: dict = field(default_factory=dict, compare=False)

    def to_json(self):
        return {
            "score": self.score,
            "small": self.small,
            "kind": self.kind.value,
            "horizon": self.horizon,
            "details": self.details,
        }


def smallness_score(spec, A):
    """The statistic ``classify_small`` compares against the kind's threshold.

    Logarithmic scoring ignores members below the burn-in index.  A finite
    prefix shifts the counting ratio by at most ``|prefix| / n`` but shifts
    the harmonic ratio by ``sum 1/k / H_n``, which stays of order one at any
    reachable horizon (the singleton {1} alone scores ``1/H_N`` ≈ 0.1 at
    N = 10^4).  Without trimming no finite set would be log-small.
    """
    N = A.horizon
    b = spec.burn_in(N)
    kind = spec.kind
    if kind is IdealKind.FIN:
        tail = int(np.count_nonzero(A.indices > b))
        return tail / max(N - b, 1), {"members_after_burn_in": tail, "burn_in": b}
    if kind is IdealKind.DENSITY:
        return upper_density_estimate(A, b), {"burn_in": b}
    if kind is IdealKind.LOGARITHMIC:
        return log_density_estimate(A.restrict(b), b), {"burn_in": b}
    if kind is IdealKind.SUMMABLE:
        partial, tail = summable_mass(A)
        return tail, {"partial_sum": partial, "tail_increment": tail}
    length = longest_ap(A)
    return float(length), {"longest_ap": length, "limit": spec.threshold(N)}


def classify_small(spec, A):
    score, details = smallness_score(spec, A)
    if spec.kind is IdealKind.SUMMABLE:
        small = details["partial_sum"] <= spec.summable_bound and score <= spec.smallness_threshold
    else:
        small = score <= spec.threshold(A.horizon)
    return SmallnessReport(float(score), bool(small), spec.kind, A.horizon, details)

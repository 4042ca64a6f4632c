"""Cluster sets, ideal lim inf and the J functional for sampled sequences.

A bounded sequence is only ever seen through a finite prefix.  Cluster
points are estimated on an axis-aligned grid whose spacing equals the
requested radius ``eps``: a node ``a`` survives when its hitting set
``{n : |x_n - a| < eps}`` is *not* small for the chosen ideal.
"""

from dataclasses import dataclass, field
import csv
import io
import math
import os

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import ConfigError, InvalidArgumentError, ResourceLimitError
from .ideals import IdealKind, IdealSpec, IndexSet, classify_small, harmonic_table

DEFAULT_CELL_BUDGET = 10**7


def cell_budget():
    raw = os.environ.get("TURNPIKE_CELL_BUDGET")
    if raw is None or raw.strip() == "":
        return DEFAULT_CELL_BUDGET
    try:
        value = int(float(raw))
    except ValueError:
        raise ConfigError(f"TURNPIKE_CELL_BUDGET must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("TURNPIKE_CELL_BUDGET must be positive")
    return value


@dataclass(frozen=True)
class SampledSequence:
    """``points[n-1]`` is x_n; every point lies in ``bounding_box`` (m x 2)."""

    points: np.ndarray
    bounding_box: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidArgumentError("a sampled sequence needs at least one point")
        box = np.asarray(self.bounding_box, dtype=np.float64).reshape(-1, 2)
        if box.shape[0] != pts.shape[1]:
            raise InvalidArgumentError("bounding box dimension does not match the points")
        if np.any(box[:, 0] > box[:, 1]):
            raise InvalidArgumentError("bounding box has lo > hi")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("points must be finite")
        tol = 1e-12 * np.maximum(1.0, np.abs(box).max())
        if np.any(pts < box[:, 0] - tol) or np.any(pts > box[:, 1] + tol):
            raise InvalidArgumentError("a point lies outside the bounding box")
        pts.setflags(write=False)
        box.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bounding_box", box)

    @classmethod
    def from_values(cls, values, box=None):
        pts = np.asarray(values, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if box is None:
            box = np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)
        return cls(pts, box)

    @property
    def horizon(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]

    @property
    def diameter(self):
        return float(np.linalg.norm(self.bounding_box[:, 1] - self.bounding_box[:, 0]))

    def shifted(self, i=1):
        """The reindexed sequence (x_{n+i})."""
        return SampledSequence(self.points[i:], self.bounding_box)

    def scalar(self, values):
        return SampledSequence.from_values(np.asarray(values, dtype=np.float64))


def as_sequence(x):
    return x if isinstance(x, SampledSequence) else SampledSequence.from_values(x)


def _distances(points, centres):
    """Euclidean distance from each point to the nearest centre (inf if none)."""
    centres = np.asarray(centres, dtype=np.float64).reshape(-1, points.shape[1])
    if centres.shape[0] == 0:
        return np.full(points.shape[0], np.inf)
    best = np.full(points.shape[0], np.inf)
    for c in centres:
        diff = points - c
        np.minimum(best, np.sqrt(np.sum(diff * diff, axis=1)), out=best)
    return best


def hitting_set(x, a, eps):
    """``{n <= N : |x_n - a| < eps}`` (strict)."""
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    x = as_sequence(x)
    return IndexSet.from_mask(_distances(x.points, a) < eps)


# ---------------------------------------------------------------------------
# cluster estimation


@dataclass(frozen=True)
class ClusterEstimate:
    representatives: np.ndarray
    scores: np.ndarray
    cell_size: float
    ideal: IdealSpec
    requested_cell_size: float = None
    surviving_cells: int = 0
    details: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return int(self.representatives.shape[0])

    @property
    def coarsened(self):
        return self.requested_cell_size is not None and self.cell_size > self.requested_cell_size

    def to_json(self):
        return {
            "representatives": self.representatives.tolist(),
            "scores": self.scores.tolist(),
            "cell_size": self.cell_size,
            "ideal": self.ideal.to_json(),
        }


def _grid(box, eps):
    lo = box[:, 0].copy()
    width = box[:, 1] - box[:, 0]
    counts = np.where(width > 0, np.ceil(width / eps - 1e-9), 0).astype(np.int64) + 1
    step = np.where(width > 0, eps, 0.0)
    return lo, step, counts


def _node_scores(x, ideal, offsets, members):
    N = x.horizon
    b = ideal.burn_in(N)
    kind = ideal.kind
    if kind is IdealKind.DENSITY:
        return _kernels.node_density(offsets, members, b)
    if kind is IdealKind.LOGARITHMIC:
        return _kernels.node_log_density(offsets, members, b, harmonic_table(N), b)
    if kind is IdealKind.FIN:
        return _kernels.node_tail_fraction(offsets, members, b, N)
    out = np.zeros(offsets.size - 1)
    for j in range(out.size):
        seg = members[offsets[j]: offsets[j + 1]]
        if seg.size:
            out[j] = classify_small(ideal, IndexSet(seg, N)).score
    return out


def _node_small(x, ideal, offsets, members, scores):
    N = x.horizon
    if ideal.kind is IdealKind.SUMMABLE:
        small = np.ones(scores.size, dtype=bool)
        for j in np.flatnonzero(offsets[1:] > offsets[:-1]):
            small[j] = classify_small(ideal, IndexSet(members[offsets[j]: offsets[j + 1]], N)).small
        return small
    return scores <= ideal.threshold(N)


def cluster_estimate(x, ideal=None, eps=0.01, merge_span=3, budget=None):
    """Grid estimate of the I-cluster set of ``x``.

    Surviving nodes are grouped into connected clusters (neighbours at
    Chebyshev grid distance one).  A cluster spanning at most
    ``merge_span`` nodes per axis collapses to its score-weighted centroid;
    wider clusters (a continuum or a chain of cluster points) keep every
    node.  If nothing survives, ``eps`` is doubled until something does;
    for a proper ideal the full index set is never small, so this ends
    once one cell covers the box.
    """
    x = as_sequence(x)
    ideal = ideal or IdealSpec()
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    budget = cell_budget() if budget is None else budget
    requested = float(eps)
    cur = requested
    while True:
        est = _estimate_at(x, ideal, cur, merge_span, budget)
        if len(est) or cur > 2 * max(x.diameter, requested):
            break
        cur *= 2
    return ClusterEstimate(
        est.representatives, est.scores, est.cell_size, ideal, requested, est.surviving_cells, est.details
    )


def _estimate_at(x, ideal, eps, merge_span, budget):
    lo, step, counts = _grid(x.bounding_box, eps)
    n_nodes = int(np.prod(counts))
    if n_nodes > budget:
        raise ResourceLimitError("cell budget", budget, n_nodes)
    # nodes are lo + k * eps; a point exactly eps away from a node (e.g. 1.0
    # from 0.9 = 9 * 0.1) can round inside the open ball, so grid hits use a
    # radius shrunk by one part in 10^9 and boundary ties fall outside
    offsets, members = _kernels.grid_hits(x.points, lo, step, counts, eps * (1 - 1e-9))
    scores = _node_scores(x, ideal, offsets, members)
    alive = ~_node_small(x, ideal, offsets, members, scores)
    alive &= offsets[1:] > offsets[:-1]
    m = x.dimension
    labels, n_comp = ndimage.label(alive.reshape(counts), structure=np.ones((3,) * m, dtype=int))
    flat = labels.reshape(-1)
    reps, rep_scores = [], []
    for comp in range(1, n_comp + 1):
        nodes = np.flatnonzero(flat == comp)
        grid_idx = np.stack(np.unravel_index(nodes, counts), axis=1)
        centres = lo + grid_idx * step
        w = scores[nodes]
        extent = grid_idx.max(axis=0) - grid_idx.min(axis=0) + 1
        if np.all(extent <= merge_span):
            centroid = (w[:, None] * centres).sum(axis=0) / w.sum() if w.sum() > 0 else centres.mean(axis=0)
            rep = classify_small(ideal, hitting_set(x, centroid, eps))
            if rep.small:
                top = int(np.argmax(w))
                reps.append(centres[top])
                rep_scores.append(float(w[top]))
            else:
                reps.append(centroid)
                rep_scores.append(rep.score)
        else:
            reps.extend(centres)
            rep_scores.extend(float(s) for s in w)
    reps = np.asarray(reps, dtype=np.float64).reshape(-1, m)
    rep_scores = np.asarray(rep_scores, dtype=np.float64)
    keep = _thin(reps, rep_scores, eps)
    return ClusterEstimate(
        reps[keep],
        rep_scores[keep],
        float(eps),
        ideal,
        surviving_cells=int(alive.sum()),
        details={"grid_nodes": n_nodes, "components": int(n_comp)},
    )


def _thin(reps, scores, eps):
    """Indices of representatives kept so that survivors are >= eps apart."""
    reps = np.asarray(reps, dtype=np.float64)
    order = np.lexsort((np.arange(len(reps)), -np.asarray(scores, dtype=np.float64)))
    kept = np.empty((len(reps), reps.shape[1]))
    keep = []
    for j in order:
        if keep:
            diff = kept[: len(keep)] - reps[j]
            if np.sqrt(np.sum(diff * diff, axis=1)).min() < eps * (1 - 1e-9):
                continue
        kept[len(keep)] = reps[j]
        keep.append(j)
    return np.asarray(sorted(keep), dtype=np.int64)


# ---------------------------------------------------------------------------
# lim inf and J


def ideal_liminf(y, ideal=None):
    """``sup{y0 : {n : y_n < y0} is small}`` on the finite prefix.

    Equivalently the smallest sample value ``v`` with ``{n : y_n <= v}`` not
    small.  The sublevel sets grow with ``v`` and every smallness test is
    monotone under inclusion, so a binary search over sorted values works.
    """
    ideal = ideal or IdealSpec()
    values = np.asarray(y.points[:, 0] if isinstance(y, SampledSequence) else y, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise InvalidArgumentError("empty sequence")
    levels = np.unique(values)

    def large(v):
        return not classify_small(ideal, IndexSet.from_mask(values <= v)).small

    lo, hi = 0, levels.size - 1
    if not large(levels[hi]):
        return float(levels[hi])
    while lo < hi:
        mid = (lo + hi) // 2
        if large(levels[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


def default_eps(x):
    """0.01 per unit of the largest box side."""
    width = float(np.max(x.bounding_box[:, 1] - x.bounding_box[:, 0]))
    return 0.01 * width if width > 0 else 0.01


def functional_J(x, phi, ideal=None, eps=None, gamma=None):
    """Return ``(ideal lim inf of phi(x_n), |that - min phi over cluster estimate|)``."""
    x = as_sequence(x)
    ideal = ideal or IdealSpec()
    values = np.asarray(phi(x.points), dtype=np.float64).reshape(-1)
    value = ideal_liminf(values, ideal)
    if gamma is None:
        gamma = cluster_estimate(x, ideal, eps if eps is not None else default_eps(x))
    if len(gamma) == 0:
        return value, math.inf
    at_reps = np.asarray(phi(gamma.representatives), dtype=np.float64).reshape(-1)
    return value, abs(value - float(at_reps.min()))


# ---------------------------------------------------------------------------
# lemma probes


def escape_mass(x, gamma, eps):
    """Classify ``{k : dist(x_k, representatives) >= eps}`` under ``gamma.ideal``."""
    x = as_sequence(x)
    if eps < gamma.cell_size * (1 - 1e-12):
        raise InvalidArgumentError(f"eps {eps} is below the cell size {gamma.cell_size}")
    away = _distances(x.points, gamma.representatives) >= eps
    return classify_small(gamma.ideal, IndexSet.from_mask(away))


def invariance_probe(x, G, i, d1, d2, gamma):
    """Classify ``{k : x_k in B(G, d1) and x_{k+i} in B(reps, d2)}``.

    For a translation-invariant ideal and a valid cluster estimate the set
    should not be small.
    """
    x = as_sequence(x)
    N = x.horizon
    G = np.asarray(G, dtype=np.float64).reshape(-1, x.dimension)
    if G.shape[0] == 0:
        raise InvalidArgumentError("G must be non-empty")
    i = int(i)
    if abs(i) >= N:
        raise InvalidArgumentError(f"|i| must be below the horizon {N}")
    if len(gamma):
        slack = _distances(G, gamma.representatives)
        if np.any(slack > gamma.cell_size * (1 + 1e-9)):
            raise InvalidArgumentError("G is not contained in the cluster estimate")
    near_g = _distances(x.points, G) < d1
    near_gamma = _distances(x.points, gamma.representatives) < d2
    k = np.arange(max(1, 1 - i), N - max(0, i) + 1)
    ok = near_g[k - 1] & near_gamma[k + i - 1]
    return classify_small(gamma.ideal, IndexSet(k[ok], N))


# ---------------------------------------------------------------------------
# CSV


def sequence_to_csv(x, extra=None):
    """``n,x1..xm[,extra...]`` with ``repr`` floats (round-trips exactly)."""
    x = as_sequence(x)
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n"] + [f"x{d + 1}" for d in range(x.dimension)] + list(extra))
    cols = [np.asarray(v, dtype=np.float64).reshape(-1) for v in extra.values()]
    for n in range(x.horizon):
        w.writerow([n + 1] + [repr(float(v)) for v in x.points[n]] + [repr(float(c[n])) for c in cols])
    return buf.getvalue()


def sequence_from_csv(text, box=None):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "n":
        raise ConfigError('sequence CSV must start with a header "n,x1,..."')
    header = rows[0]
    dims = [j for j, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if not dims:
        raise ConfigError("sequence CSV has no x columns")
    try:
        pts = np.array([[float(r[j]) for j in dims] for r in rows[1:] if r], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed sequence CSV: {exc}") from None
    return SampledSequence.from_values(pts, box)

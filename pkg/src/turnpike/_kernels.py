"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version.  The numba path is used when numba imports cleanly and the
environment variable ``TURNPIKE_DISABLE_NUMBA`` is unset (or ``0``).
Both paths return identical results; ``tests/test_kernels.py`` checks this
and ``benchmarks/bench_kernels.py`` times them against each other.

Index arrays are 1-based, sorted, unique ``int64``.
"""

import os
import warnings

import numpy as np

try:
    import numba
    from numba import njit, prange

    # an old system TBB only means numba falls back to another threading layer
    warnings.filterwarnings("ignore", message=".*TBB", category=numba.NumbaWarning)

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

_DISABLED = os.environ.get("TURNPIKE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
_backend = "numba" if (HAVE_NUMBA and not _DISABLED) else "numpy"


def backend():
    return _backend


def set_backend(name):
    """Switch kernels at runtime (``"numba"`` or ``"numpy"``); returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    prev, _backend = _backend, name
    return prev


def harmonic_numbers(n):
    """``H[k] = sum_{j<=k} 1/j`` for k = 0..n (sequential summation)."""
    h = np.zeros(n + 1)
    if n:
        h[1:] = np.cumsum(1.0 / np.arange(1, n + 1))
    return h


# ---------------------------------------------------------------------------
# running-ratio suprema
#
# Between consecutive members the count is constant while n grows, so the
# supremum over n in [b, N] is attained at n = b or at a member >= b.


def _np_density_sup(idx, burn_in):
    if idx.size == 0:
        return 0.0
    at_b = np.searchsorted(idx, burn_in, side="right")
    best = at_b / burn_in
    counts = np.arange(1, idx.size + 1)
    tail = idx >= burn_in
    if tail.any():
        best = max(best, float(np.max(counts[tail] / idx[tail])))
    return float(best)


def _np_log_density_sup(idx, burn_in, harmonic):
    if idx.size == 0:
        return 0.0
    mass = np.cumsum(1.0 / idx)
    at_b = np.searchsorted(idx, burn_in, side="right")
    best = (mass[at_b - 1] if at_b else 0.0) / harmonic[burn_in]
    tail = idx >= burn_in
    if tail.any():
        best = max(best, float(np.max(mass[tail] / harmonic[idx[tail]])))
    return float(best)


# ---------------------------------------------------------------------------
# longest arithmetic progression
#
# numba: DP over pairs.  For the pair (a_i, a_j) with predecessor
# p = 2a_i - a_j absent from the set, a new chain starts; walking the chain
# fills L(a_j, a_j + d) = L(a_i, a_j) + 1.  Every pair lies on exactly one
# maximal chain, so total work is O(n^2) with an O(span) membership table.
#
# numpy: independent route; for every difference d the longest run of ones
# along each residue class of the membership mask.


_AP_SCAN_DIFFS = 64


def _longest_run_strided(mask, d):
    # longest run of True within any residue class mod d
    length = -(-mask.size // d) * d
    padded = np.zeros(length, dtype=np.int8)
    padded[: mask.size] = mask
    cols = padded.reshape(-1, d).T
    z = np.zeros((d, 1), dtype=np.int8)
    edges = np.diff(np.concatenate([z, cols, z], axis=1), axis=1)
    starts = np.nonzero(edges == 1)[1]
    ends = np.nonzero(edges == -1)[1]
    return int(np.max(ends - starts)) if starts.size else 0


def _np_longest_ap(idx):
    # small differences: one strided pass each; cheap when the set is dense
    n = idx.size
    if n <= 2:
        return int(n)
    lo = int(idx[0])
    span = int(idx[-1]) - lo
    mask = np.zeros(span + 1, dtype=bool)
    mask[idx - lo] = True
    best = 2
    d = 1
    while d <= _AP_SCAN_DIFFS and d * best <= span:
        best = max(best, _longest_run_strided(mask, d))
        d += 1
    # larger differences: chain starts as in the compiled kernel, vectorized
    # over the second term of each pair
    for i in range(n - 1):
        a = int(idx[i])
        if a - lo + best * (_AP_SCAN_DIFFS + 1) > span:
            break  # no later start can fit a longer chain
        d = idx[i + 1:] - a
        d = d[(d > _AP_SCAN_DIFFS) & (d * best <= span)]
        prev = a - d
        d = d[~((prev >= lo) & mask[np.maximum(prev - lo, 0)])]
        k = 2
        while d.size:
            nxt = a + k * d - lo
            d = d[nxt <= span]
            d = d[mask[a + k * d - lo]]
            if d.size:
                k += 1
        if k > best:
            best = k
    return best


# ---------------------------------------------------------------------------
# grid hitting sets in CSR form
#
# Nodes are lo + k*step, k = 0..shape-1 per axis, flattened in C order
# (lexicographic grid index).  Point n (1-based) hits node a iff
# sqrt(sum((x_n - a)^2)) < eps.  Output: offsets (n_nodes+1), members
# (1-based indices, ascending within each node).


def _neighbour_offsets(reach, m):
    axes = [np.arange(-reach, reach + 1)] * m
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)


def _np_grid_hits(points, lo, step, shape, eps):
    n, m = points.shape
    shape = np.asarray(shape, dtype=np.int64)
    reach = _reach(step, eps)
    safe = np.where(step > 0, step, 1.0)
    base = np.where(step > 0, np.floor((points - lo) / safe), 0).astype(np.int64)
    strides = np.ones(m, dtype=np.int64)
    for d in range(m - 2, -1, -1):
        strides[d] = strides[d + 1] * shape[d + 1]
    node_ids, members = [], []
    rows = np.arange(1, n + 1, dtype=np.int64)
    for off in _neighbour_offsets(reach, m):
        k = base + off
        ok = np.all((k >= 0) & (k < shape), axis=1)
        if not ok.any():
            continue
        kk = k[ok]
        centre = lo + kk * step
        diff = points[ok] - centre
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        hit = dist < eps
        node_ids.append((kk[hit] * strides).sum(axis=1))
        members.append(rows[ok][hit])
    n_nodes = int(np.prod(shape))
    if node_ids:
        node = np.concatenate(node_ids)
        mem = np.concatenate(members)
    else:
        node = np.zeros(0, dtype=np.int64)
        mem = np.zeros(0, dtype=np.int64)
    order = np.lexsort((mem, node))
    node, mem = node[order], mem[order]
    offsets = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(offsets, node + 1, 1)
    return np.cumsum(offsets), mem


def _reach(step, eps):
    positive = step[step > 0]
    if positive.size == 0:
        return 0
    return int(np.ceil(eps / positive.min())) + 1


def _np_node_density(offsets, members, burn_in):
    out = np.zeros(offsets.size - 1)
    for j in range(out.size):
        out[j] = _np_density_sup(members[offsets[j]: offsets[j + 1]], burn_in)
    return out


def _np_node_log(offsets, members, burn_in, harmonic, lower):
    out = np.zeros(offsets.size - 1)
    for j in range(out.size):
        seg = members[offsets[j]: offsets[j + 1]]
        out[j] = _np_log_density_sup(seg[seg >= lower], burn_in, harmonic)
    return out


def _np_node_tail(offsets, members, burn_in, horizon):
    out = np.zeros(offsets.size - 1)
    width = max(horizon - burn_in, 1)
    for j in range(out.size):
        seg = members[offsets[j]: offsets[j + 1]]
        out[j] = np.count_nonzero(seg > burn_in) / width
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_density_sup(idx, burn_in):
        n = idx.shape[0]
        if n == 0:
            return 0.0
        at_b = 0
        while at_b < n and idx[at_b] <= burn_in:
            at_b += 1
        best = at_b / burn_in
        for j in range(n):
            a = idx[j]
            if a >= burn_in:
                r = (j + 1) / a
                if r > best:
                    best = r
        return best

    @njit(cache=True)
    def _nb_log_density_sup(idx, burn_in, harmonic):
        n = idx.shape[0]
        if n == 0:
            return 0.0
        mass = 0.0
        at_b_mass = 0.0
        best = -1.0
        for j in range(n):
            a = idx[j]
            mass += 1.0 / a
            if a <= burn_in:
                at_b_mass = mass
            if a >= burn_in:
                r = mass / harmonic[a]
                if r > best:
                    best = r
        r0 = at_b_mass / harmonic[burn_in]
        if r0 > best:
            best = r0
        return best

    @njit(cache=True)
    def _nb_longest_ap(idx):
        n = idx.shape[0]
        if n <= 2:
            return n
        lo = idx[0]
        span = idx[n - 1] - lo
        pos = np.full(span + 1, -1, dtype=np.int64)
        for j in range(n):
            pos[idx[j] - lo] = j
        best = 2
        for i in range(n - 1):
            ai = idx[i]
            for j in range(i + 1, n):
                d = idx[j] - ai
                if d * best > span:
                    break
                p = ai - d
                if p >= lo and pos[p - lo] >= 0:
                    continue  # not a chain start
                length = 2
                nxt = idx[j] + d
                while nxt - lo <= span and pos[nxt - lo] >= 0:
                    length += 1
                    nxt += d
                if length > best:
                    best = length
        return best

    @njit(cache=True)
    def _nb_grid_hits(points, lo, step, shape, eps, reach):
        n, m = points.shape
        strides = np.ones(m, dtype=np.int64)
        for d in range(m - 2, -1, -1):
            strides[d] = strides[d + 1] * shape[d + 1]
        n_nodes = 1
        for d in range(m):
            n_nodes *= shape[d]
        width = 2 * reach + 1
        n_off = width ** m
        base = np.zeros(m, dtype=np.int64)
        k = np.zeros(m, dtype=np.int64)
        counts = np.zeros(n_nodes + 1, dtype=np.int64)
        for sweep in range(2):
            if sweep == 1:
                for j in range(n_nodes):
                    counts[j + 1] += counts[j]
                members = np.zeros(counts[n_nodes], dtype=np.int64)
                fill = counts[:-1].copy()
            for i in range(n):
                for d in range(m):
                    if step[d] > 0:
                        base[d] = np.int64(np.floor((points[i, d] - lo[d]) / step[d]))
                    else:
                        base[d] = 0
                for o in range(n_off):
                    rem = o
                    ok = True
                    for d in range(m - 1, -1, -1):
                        k[d] = base[d] + (rem % width) - reach
                        rem //= width
                        if k[d] < 0 or k[d] >= shape[d]:
                            ok = False
                    if not ok:
                        continue
                    s = 0.0
                    for d in range(m):
                        diff = points[i, d] - (lo[d] + k[d] * step[d])
                        s += diff * diff
                    if np.sqrt(s) < eps:
                        node = 0
                        for d in range(m):
                            node += k[d] * strides[d]
                        if sweep == 0:
                            counts[node + 1] += 1
                        else:
                            members[fill[node]] = i + 1
                            fill[node] += 1
        # points are visited in index order, but a node may be filled from
        # several neighbour offsets of the same point only once, so each
        # node's member list is already ascending.
        return counts, members

    @njit(cache=True, parallel=True)
    def _nb_node_density(offsets, members, burn_in):
        n_nodes = offsets.shape[0] - 1
        out = np.zeros(n_nodes)
        for j in prange(n_nodes):
            out[j] = _nb_density_sup(members[offsets[j]: offsets[j + 1]], burn_in)
        return out

    @njit(cache=True, parallel=True)
    def _nb_node_log(offsets, members, burn_in, harmonic, lower):
        n_nodes = offsets.shape[0] - 1
        out = np.zeros(n_nodes)
        for j in prange(n_nodes):
            seg = members[offsets[j]: offsets[j + 1]]
            start = 0
            while start < seg.shape[0] and seg[start] < lower:
                start += 1
            out[j] = _nb_log_density_sup(seg[start:], burn_in, harmonic)
        return out

    @njit(cache=True, parallel=True)
    def _nb_node_tail(offsets, members, burn_in, horizon):
        n_nodes = offsets.shape[0] - 1
        out = np.zeros(n_nodes)
        width = max(horizon - burn_in, 1)
        for j in prange(n_nodes):
            c = 0
            for t in range(offsets[j], offsets[j + 1]):
                if members[t] > burn_in:
                    c += 1
            out[j] = c / width
        return out


# ---------------------------------------------------------------------------
# dispatch


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def density_sup(idx, burn_in):
    idx = _i64(idx)
    if _backend == "numba":
        return float(_nb_density_sup(idx, int(burn_in)))
    return _np_density_sup(idx, int(burn_in))


def log_density_sup(idx, burn_in, harmonic):
    idx = _i64(idx)
    if _backend == "numba":
        return float(_nb_log_density_sup(idx, int(burn_in), harmonic))
    return _np_log_density_sup(idx, int(burn_in), harmonic)


def longest_ap(idx):
    idx = _i64(idx)
    if _backend == "numba":
        return int(_nb_longest_ap(idx))
    return _np_longest_ap(idx)


def grid_hits(points, lo, step, shape, eps):
    points = np.ascontiguousarray(points, dtype=np.float64)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    step = np.ascontiguousarray(step, dtype=np.float64)
    shape = _i64(shape)
    if _backend == "numba":
        return _nb_grid_hits(points, lo, step, shape, float(eps), _reach(step, eps))
    return _np_grid_hits(points, lo, step, shape, float(eps))


def node_density(offsets, members, burn_in):
    if _backend == "numba":
        return _nb_node_density(offsets, members, int(burn_in))
    return _np_node_density(offsets, members, int(burn_in))


def node_log_density(offsets, members, burn_in, harmonic, lower):
    if _backend == "numba":
        return _nb_node_log(offsets, members, int(burn_in), harmonic, int(lower))
    return _np_node_log(offsets, members, int(burn_in), harmonic, int(lower))


def node_tail_fraction(offsets, members, burn_in, horizon):
    if _backend == "numba":
        return _nb_node_tail(offsets, members, int(burn_in), int(horizon))
    return _np_node_tail(offsets, members, int(burn_in), int(horizon))

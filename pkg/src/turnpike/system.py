"""Controlled systems x_{n+1} = f(x_n, u_n): simulation, stationary points and
the grid checks of the uniqueness and Lyapunov-type decrease conditions."""

from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import (
    ConfigError,
    InvalidArgumentError,
    NoStationaryPointsError,
    ResourceLimitError,
    TrajectoryDivergenceError,
)
from .sequences import SampledSequence, as_sequence, cell_budget, functional_J

STATIONARY_TOL = 1e-8
STRICTNESS_MARGIN = 1e-9
VALUE_TOL = 1e-9
BOX_TOL = 1e-9
DEFAULT_GRID_STEP = 1e-3


@dataclass(frozen=True)
class ControlSystem:
    """Data of a controlled system.

    ``dynamics(X, u)`` maps an (n, m) array of states and one control vector
    to the (n, m) array of successors; ``phi`` and ``potential`` map (n, m)
    arrays to (n,) arrays.  ``potential_linear`` holds the coefficient
    vector when P is linear.  ``control_affine`` declares f affine in u, in
    which case stationarity is tested against the segment spanned by the
    extreme controls rather than the discrete list only.  ``trajectory_fn``
    optionally replaces step-by-step floating point simulation by an exact
    generator ``(control_indices, N) -> (N, m)``.
    """

    name: str
    dynamics: Callable
    phi: Callable
    potential: Callable
    control_points: np.ndarray
    state_box: np.ndarray
    initial: np.ndarray
    potential_linear: Optional[np.ndarray] = None
    control_affine: bool = False
    trajectory_fn: Optional[Callable] = None
    phi_lipschitz: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        U = np.asarray(self.control_points, dtype=np.float64)
        if U.ndim == 1:
            U = U[:, None]
        if U.shape[0] == 0:
            raise ConfigError("the control list must not be empty")
        box = np.asarray(self.state_box, dtype=np.float64).reshape(-1, 2)
        x0 = np.asarray(self.initial, dtype=np.float64).reshape(-1)
        if x0.size != box.shape[0]:
            raise ConfigError("initial state dimension does not match the state box")
        if np.any(box[:, 0] > box[:, 1]):
            raise ConfigError("state box has lo > hi")
        if np.any(x0 < box[:, 0] - BOX_TOL) or np.any(x0 > box[:, 1] + BOX_TOL):
            raise ConfigError("initial state lies outside the state box")
        for arr in (U, box, x0):
            arr.setflags(write=False)
        object.__setattr__(self, "control_points", U)
        object.__setattr__(self, "state_box", box)
        object.__setattr__(self, "initial", x0)
        if self.potential_linear is not None:
            c = np.asarray(self.potential_linear, dtype=np.float64).reshape(-1)
            object.__setattr__(self, "potential_linear", c)

    @property
    def state_dim(self):
        return self.state_box.shape[0]

    @property
    def n_controls(self):
        return self.control_points.shape[0]

    def step(self, X, u_index):
        return np.asarray(self.dynamics(np.atleast_2d(X), self.control_points[u_index]), dtype=np.float64)

    def phi_values(self, X):
        return np.asarray(self.phi(np.atleast_2d(np.asarray(X, dtype=np.float64))), dtype=np.float64).reshape(-1)

    def P_values(self, X):
        return np.asarray(self.potential(np.atleast_2d(np.asarray(X, dtype=np.float64))), dtype=np.float64).reshape(-1)

    def in_box(self, X, tol=BOX_TOL):
        X = np.atleast_2d(X)
        return np.all((X >= self.state_box[:, 0] - tol) & (X <= self.state_box[:, 1] + tol), axis=1)

    def validate(self, samples=101):
        """Sample C x U_disc and confirm the dynamics stays inside C."""
        grid = state_grid(self.state_box, None, per_axis=samples)
        for k in range(self.n_controls):
            Y = self.step(grid, k)
            bad = np.flatnonzero(~self.in_box(Y))
            if bad.size:
                j = int(bad[0])
                raise ConfigError(
                    f"dynamics maps {grid[j].tolist()} under control {self.control_points[k].tolist()} "
                    f"outside the state box (to {Y[j].tolist()})"
                )
        return self

    def control_index(self, u):
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        d = np.max(np.abs(self.control_points - u), axis=1)
        j = int(np.argmin(d))
        if d[j] > 1e-12:
            raise InvalidArgumentError(f"control {u.tolist()} is not in the control list")
        return j


@dataclass(frozen=True)
class Process:
    """Controls u_1..u_{N-1} (as indices into the control list) and the trajectory."""

    control_indices: tuple
    controls: np.ndarray
    trajectory: SampledSequence

    @property
    def horizon(self):
        return self.trajectory.horizon


def simulate(sys, controls=(), by_index=False, box_tol=BOX_TOL):
    """Run the update rule from the initial state.

    ``controls`` are control vectors from the control list, or indices into
    it when ``by_index`` is true.
    """
    if by_index:
        idx = tuple(int(k) for k in controls)
        if any(k < 0 or k >= sys.n_controls for k in idx):
            raise InvalidArgumentError("control index out of range")
    else:
        idx = tuple(sys.control_index(u) for u in controls)
    N = len(idx) + 1
    if sys.trajectory_fn is not None:
        X = np.asarray(sys.trajectory_fn(idx, N), dtype=np.float64).reshape(N, -1)
    else:
        X = np.empty((N, sys.state_dim))
        X[0] = sys.initial
        for k, j in enumerate(idx):
            X[k + 1] = sys.step(X[k: k + 1], j)[0]
    inside = sys.in_box(X, box_tol)
    if not inside.all():
        j = int(np.flatnonzero(~inside)[0])
        raise TrajectoryDivergenceError(j + 1, X[j])
    X = np.clip(X, sys.state_box[:, 0], sys.state_box[:, 1])
    U = sys.control_points[list(idx)] if idx else np.empty((0, sys.control_points.shape[1]))
    return Process(idx, U, SampledSequence(X, sys.state_box))


# ---------------------------------------------------------------------------
# grids and residuals


def state_grid(box, step, per_axis=None):
    """Product grid over the box including both endpoints, C order."""
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    width = box[:, 1] - box[:, 0]
    if per_axis is not None:
        counts = np.where(width > 0, per_axis, 1)
    else:
        if step <= 0:
            raise InvalidArgumentError("grid_step must be positive")
        counts = np.where(width > 0, np.ceil(width / step - 1e-9), 0).astype(np.int64) + 1
    total = int(np.prod(counts))
    if total > cell_budget():
        raise ResourceLimitError("cell budget", cell_budget(), total)
    axes = [np.linspace(lo, hi, int(c)) if c > 1 else np.array([lo]) for (lo, hi), c in zip(box, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def grid_spacing(box, step):
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    width = box[:, 1] - box[:, 0]
    counts = np.where(width > 0, np.ceil(width / step - 1e-9), 1)
    return float(np.max(width / counts)) if np.any(width > 0) else 0.0


def stationary_residual(sys, X):
    """min over controls of |f(z,u) - z|, and the minimizing control index.

    For control-affine systems with scalar control the minimum is taken over
    the whole segment between the extreme controls; the reported index is
    then the nearest listed control.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    dists = np.stack([np.linalg.norm(sys.step(X, k) - X, axis=1) for k in range(sys.n_controls)], axis=1)
    best = np.argmin(dists, axis=1)
    res = dists[np.arange(X.shape[0]), best]
    if sys.control_affine and sys.control_points.shape[1] == 1 and sys.n_controls > 1:
        u = sys.control_points[:, 0]
        lo_k, hi_k = int(np.argmin(u)), int(np.argmax(u))
        A = sys.step(X, lo_k)
        B = sys.step(X, hi_k)
        d = B - A
        dd = np.sum(d * d, axis=1)
        t = np.where(dd > 0, np.sum((X - A) * d, axis=1) / np.where(dd > 0, dd, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        seg = np.linalg.norm(A + t[:, None] * d - X, axis=1)
        ust = u[lo_k] + t * (u[hi_k] - u[lo_k])
        improve = seg < res
        res = np.where(improve, seg, res)
        nearest = np.argmin(np.abs(u[None, :] - ust[:, None]), axis=1)
        best = np.where(improve, nearest, best)
    return res, best


def _bisect(pred, a, b, iters=60):
    """Shrink [a, b] with pred(a) true, pred(b) false; returns the true end."""
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if pred(mid):
            a = mid
        else:
            b = mid
        if abs(b - a) <= 1e-15 * max(1.0, abs(a)):
            break
    return a


@dataclass(frozen=True)
class StationaryReport:
    points: np.ndarray
    residuals: np.ndarray
    phi_star: float
    optimal_points: np.ndarray
    zeta_star: Optional[np.ndarray]
    grid_step: float
    tol: float

    def to_json(self):
        return {
            "stationary_points": self.points.tolist(),
            "residuals": self.residuals.tolist(),
            "phi_star": self.phi_star,
            "optimal_points": self.optimal_points.tolist(),
            "zeta_star": None if self.zeta_star is None else self.zeta_star.tolist(),
            "grid_step": self.grid_step,
            "tol": self.tol,
        }


def stationary_points(sys, grid_step=DEFAULT_GRID_STEP, tol=STATIONARY_TOL, value_tol=VALUE_TOL):
    """Sampled stationary set, optimal value and optimal stationary points.

    In one dimension grid hits are refined: boundaries of stationary runs
    and sign changes of f(z,u) - z are bisected, and phi is maximized
    locally around its discrete maxima over the sample so that an isolated
    optimum between grid nodes is found exactly.
    """
    if grid_step <= 0:
        raise InvalidArgumentError("grid_step must be positive")
    grid = state_grid(sys.state_box, grid_step)
    res, _ = stationary_residual(sys, grid)
    ok = res <= tol
    extra = []
    if sys.state_dim == 1:
        xs = grid[:, 0]

        def stat(x):
            return stationary_residual(sys, [[x]])[0][0] <= tol

        for j in range(xs.size - 1):
            a, b = xs[j], xs[j + 1]
            if ok[j] and not ok[j + 1]:
                extra.append(_bisect(stat, a, b))
            elif ok[j + 1] and not ok[j]:
                extra.append(_bisect(stat, b, a))
        for k in range(sys.n_controls):
            g = sys.step(grid, k)[:, 0] - xs
            for j in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
                a, b = xs[j], xs[j + 1]
                sa = np.sign(g[j])
                def same(x, k=k, sa=sa):
                    return np.sign(sys.step([[x]], k)[0, 0] - x) == sa
                r = _bisect(same, a, b)
                for cand in (r, np.nextafter(r, b)):
                    if stat(cand):
                        extra.append(cand)
                        break
    pts = grid[ok]
    if extra:
        pts = np.concatenate([pts, np.asarray(extra).reshape(-1, 1)])
    if pts.shape[0] == 0:
        raise NoStationaryPointsError("no stationary point found on the grid")
    pts = _unique_rows(pts)
    if sys.state_dim == 1:
        pts = _unique_rows(np.concatenate([pts, _refine_phi_max(sys, pts, grid_step, tol)]))
    residuals, _ = stationary_residual(sys, pts)
    phis = sys.phi_values(pts)
    phi_star = float(phis.max())
    opt = pts[phis >= phi_star - value_tol]
    diam = _diameter(opt)
    zeta = opt.mean(axis=0) if diam <= 2 * grid_step else None
    return StationaryReport(pts, residuals, phi_star, opt, zeta, float(grid_step), float(tol))


def _refine_phi_max(sys, pts, step, tol):
    xs = pts[:, 0]
    phis = sys.phi_values(pts)
    h = grid_spacing(sys.state_box, step)
    found = []
    for j in range(xs.size):
        left = xs[j - 1] if j > 0 and xs[j] - xs[j - 1] <= 1.5 * h else xs[j]
        right = xs[j + 1] if j + 1 < xs.size and xs[j + 1] - xs[j] <= 1.5 * h else xs[j]
        if left == right:
            continue
        ln = phis[j - 1] if left < xs[j] else -np.inf
        rn = phis[j + 1] if right > xs[j] else -np.inf
        if phis[j] < ln or phis[j] < rn:
            continue
        best = minimize_scalar(
            lambda x: -sys.phi_values([[x]])[0], bounds=(left, right), method="bounded",
            options={"xatol": 1e-12},
        )
        x = float(best.x)
        if stationary_residual(sys, [[x]])[0][0] <= tol:
            found.append(x)
    return np.asarray(found, dtype=np.float64).reshape(-1, 1)


def _unique_rows(pts):
    pts = np.asarray(pts, dtype=np.float64)
    return np.unique(pts, axis=0)


def _diameter(pts):
    if pts.shape[0] < 2:
        return 0.0
    if pts.shape[1] == 1:
        return float(pts[:, 0].max() - pts[:, 0].min())
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def _dist_to_set(X, S):
    X = np.atleast_2d(X)
    S = np.atleast_2d(S)
    if S.shape[0] == 0 or S.size == 0:
        return np.full(X.shape[0], np.inf)
    out = np.full(X.shape[0], np.inf)
    for s in S:
        np.minimum(out, np.linalg.norm(X - s, axis=1), out=out)
    return out


# ---------------------------------------------------------------------------
# level and decrease sets


def _local_max_candidates(sys, grid, step):
    """Refined local maxima of phi, independent of the level r."""
    phis = sys.phi_values(grid)
    m = sys.state_dim
    if m == 1:
        xs = grid[:, 0]
        out = []
        for j in range(xs.size):
            ln = phis[j - 1] if j > 0 else -np.inf
            rn = phis[j + 1] if j + 1 < xs.size else -np.inf
            if phis[j] >= ln and phis[j] >= rn:
                lo = xs[max(j - 1, 0)]
                hi = xs[min(j + 1, xs.size - 1)]
                if hi > lo:
                    best = minimize_scalar(
                        lambda x: -sys.phi_values([[x]])[0], bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-12},
                    )
                    x = float(best.x)
                    out.append(x if -best.fun >= phis[j] else xs[j])
        return np.asarray(out, dtype=np.float64).reshape(-1, 1)
    top = np.argsort(-phis, kind="stable")[:64]
    out = []
    box = sys.state_box
    for j in top:
        r = minimize(
            lambda z: -sys.phi_values(z[None, :])[0], grid[j], method="Powell",
            bounds=[tuple(b) for b in box], options={"xtol": 1e-10, "ftol": 1e-12},
        )
        out.append(r.x if -r.fun >= phis[j] else grid[j])
    return np.asarray(out, dtype=np.float64).reshape(-1, m)


def level_set(sys, r, grid_step=DEFAULT_GRID_STEP, tol=VALUE_TOL):
    """Grid points of C with phi >= r - tol, plus refined local maxima of phi
    that clear the same bar (so isolated super-level points are not lost)."""
    grid = state_grid(sys.state_box, grid_step)
    cand = np.concatenate([grid, _local_max_candidates(sys, grid, grid_step)])
    if r == -math.inf:
        return _unique_rows(cand)
    keep = sys.phi_values(cand) >= r - tol
    return _unique_rows(cand[keep])


def decrease_margin(sys, X):
    """F(z) = max_u P(f(z,u)) - P(z) and the maximizing control index."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    P0 = sys.P_values(X)
    diffs = np.stack([sys.P_values(sys.step(X, k)) - P0 for k in range(sys.n_controls)], axis=1)
    arg = np.argmax(diffs, axis=1)
    return diffs[np.arange(X.shape[0]), arg], arg


def decrease_sets(sys, grid_step=DEFAULT_GRID_STEP, points=None, margin=STRICTNESS_MARGIN):
    """(E_P, E_P_bar): strict decrease for every control, and non-increase."""
    X = state_grid(sys.state_box, grid_step) if points is None else np.atleast_2d(points)
    F, _ = decrease_margin(sys, X)
    return X[F < -margin], X[F <= margin]


# ---------------------------------------------------------------------------
# condition checks


def _witness(sys, z, k):
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    fz = sys.step(z, int(k))
    before = float(sys.P_values(z)[0])
    after = float(sys.P_values(fz)[0])
    return {
        "point": z[0].tolist(),
        "control": sys.control_points[int(k)].tolist(),
        "control_index": int(k),
        "successor": fz[0].tolist(),
        "P_before": before,
        "P_after": after,
        "increase": after - before,
    }


@dataclass(frozen=True)
class ConditionReport:
    c1_holds: bool
    c1_diameter: float
    c3_first: bool
    c3_first_witness: Optional[dict]
    c3_second: bool
    c3_second_witness: Optional[dict]
    c3lc_holds: Optional[bool]
    c3lc_witness: Optional[dict]
    d_star_sample: np.ndarray
    e_p_sample: np.ndarray
    e_p_bar_sample: np.ndarray

    def to_json(self, include_samples=False):
        out = {
            "c1_holds": self.c1_holds,
            "c1_diameter": self.c1_diameter,
            "c3_first": self.c3_first,
            "c3_first_witness": self.c3_first_witness,
            "c3_second": self.c3_second,
            "c3_second_witness": self.c3_second_witness,
            "c3lc_holds": "not-applicable" if self.c3lc_holds is None else self.c3lc_holds,
            "c3lc_witness": self.c3lc_witness,
            "d_star_size": int(self.d_star_sample.shape[0]),
            "e_p_size": int(self.e_p_sample.shape[0]),
            "e_p_bar_size": int(self.e_p_bar_sample.shape[0]),
        }
        if include_samples:
            out["d_star_sample"] = self.d_star_sample.tolist()
            out["e_p_sample"] = self.e_p_sample.tolist()
            out["e_p_bar_sample"] = self.e_p_bar_sample.tolist()
        return out


def check_conditions(sys, report, grid_step=None, margin=STRICTNESS_MARGIN):
    """Grid verdicts for uniqueness of the optimum and the decrease conditions.

    Each false verdict carries the worst offending (point, control) pair.
    """
    step = report.grid_step if grid_step is None else grid_step
    diam = _diameter(report.optimal_points)
    c1 = diam <= 2 * step
    D = level_set(sys, report.phi_star, step)
    F, arg = decrease_margin(sys, D)
    E = D[F < -margin]
    Ebar = D[F <= margin]
    away = _dist_to_set(D, report.optimal_points) > step
    first_bad = away & ~(F < -margin)
    c3_first = not first_bad.any()
    w1 = None
    if not c3_first:
        j = int(np.flatnonzero(first_bad)[np.argmax(F[first_bad])])
        w1 = _witness(sys, D[j], arg[j])
    second_bad = F > margin
    c3_second = not second_bad.any()
    w2 = None
    if not c3_second:
        j = int(np.argmax(F))
        w2 = _witness(sys, D[j], arg[j])
    c3lc, wlc = None, None
    if sys.potential_linear is not None and report.zeta_star is not None:
        zs = report.zeta_star
        c3lc, wlc = True, None
        worst = -np.inf
        P0 = sys.P_values(D)
        near_z = np.linalg.norm(D - zs, axis=1) <= step
        for k in range(sys.n_controls):
            Y = sys.step(D, k)
            inc = sys.P_values(Y) - P0
            excused = near_z & (np.linalg.norm(Y - zs, axis=1) <= step)
            bad = (inc >= -margin) & ~excused
            if bad.any():
                c3lc = False
                j = int(np.flatnonzero(bad)[np.argmax(inc[bad])])
                if inc[j] > worst:
                    worst = inc[j]
                    wlc = _witness(sys, D[j], k)
    return ConditionReport(c1, diam, c3_first, w1, c3_second, w2, c3lc, wlc, D, E, Ebar)


@dataclass(frozen=True)
class LemmaCheck:
    status: str
    witness: Optional[dict] = None

    @property
    def passed(self):
        return self.status == "pass"

    def to_json(self):
        return {"status": self.status, "witness": self.witness}


@dataclass(frozen=True)
class LemmaDiagnostics:
    minimizer_check: LemmaCheck
    maximizer_check: LemmaCheck
    J_value: float

    def to_json(self):
        return {
            "minimizer_check": self.minimizer_check.to_json(),
            "maximizer_check": self.maximizer_check.to_json(),
            "J_value": self.J_value,
        }


def lemma_diagnostics(sys, proc, r, gamma, grid_step=DEFAULT_GRID_STEP, tol=None, margin=STRICTNESS_MARGIN):
    """Check where the cluster estimate of a process sits relative to D_r and E_P.

    (a) every P-minimizing representative lies in D_r outside E_P;
    (b) if D_r minus E_P lies inside E_P_bar on the grid, some P-maximizing
        representative lies in D_r minus E_P.
    Membership is judged up to ``max(grid_step, gamma.cell_size)``.  When the
    hypothesis of (b) fails the verdict is "hypothesis violated".
    ``tol`` bounds the allowed shortfall of J below r (default: cell size).
    """
    tol = gamma.cell_size if tol is None else tol
    x = as_sequence(proc.trajectory if isinstance(proc, Process) else proc)
    J, _ = functional_J(x, sys.phi_values, gamma.ideal, gamma=gamma)
    if J < r - tol:
        raise InvalidArgumentError(f"J = {J} falls short of r = {r} by {r - J} (> {tol})")
    reps = gamma.representatives
    if reps.shape[0] == 0:
        raise InvalidArgumentError("cluster estimate is empty")
    reach = max(grid_step, gamma.cell_size)
    D = level_set(sys, r, grid_step)
    FD, _ = decrease_margin(sys, D)
    D_not_E = D[FD >= -margin]
    P = sys.P_values(reps)
    Frep, arg = decrease_margin(sys, reps)
    phi_rep = sys.phi_values(reps)

    def in_D(j):
        return phi_rep[j] >= r - tol or _dist_to_set(reps[j], D)[0] <= reach

    def outside_E(j):
        return Frep[j] >= -margin or _dist_to_set(reps[j], D_not_E)[0] <= reach

    def describe(j):
        return {
            "representative": reps[j].tolist(),
            "P": float(P[j]),
            "phi": float(phi_rep[j]),
            "decrease_margin": float(Frep[j]),
            "control_index": int(arg[j]),
        }

    scale = max(1.0, float(np.abs(P).max()))
    mins = np.flatnonzero(P <= P.min() + VALUE_TOL * scale)
    a = LemmaCheck("pass", describe(int(mins[0])))
    for j in mins:
        if not (in_D(j) and outside_E(j)):
            a = LemmaCheck("fail", describe(int(j)))
            break
    in_bar = FD[FD >= -margin] <= margin
    if not in_bar.all():
        j = int(np.flatnonzero(~in_bar)[0])
        z = D_not_E[j]
        k = int(decrease_margin(sys, z)[1][0])
        b = LemmaCheck("hypothesis violated", _witness(sys, z, k))
    else:
        maxs = np.flatnonzero(P >= P.max() - VALUE_TOL * scale)
        hit = [j for j in maxs if in_D(j) and outside_E(j)]
        b = LemmaCheck("pass", describe(int(hit[0]))) if hit else LemmaCheck("fail", describe(int(maxs[0])))
    return LemmaDiagnostics(a, b, float(J))

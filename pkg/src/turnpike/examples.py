"""The two reference systems: a shift on the Cantor set whose optimal orbit
converges statistically but not classically, and a piecewise-linear system
on [0, 1] whose optimal process oscillates away from the turnpike."""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from .errors import HorizonExceededError, InvalidArgumentError
from .ideals import IdealKind, IdealSpec
from .sequences import SampledSequence, cluster_estimate, functional_J
from .system import (
    ControlSystem,
    STATIONARY_TOL,
    _dist_to_set,
    check_conditions,
    level_set,
    lemma_diagnostics,
    simulate,
    stationary_points,
    stationary_residual,
)

# ---------------------------------------------------------------------------
# Cantor shift


def one_positions(limit):
    """1-based positions i(i-1)/2, i >= 2, up to ``limit``: 1, 3, 6, 10, ..."""
    out = []
    i = 2
    while i * (i - 1) // 2 <= limit:
        out.append(i * (i - 1) // 2)
        i += 1
    return np.asarray(out, dtype=np.int64)


def _code_value(digits):
    ones = np.flatnonzero(np.asarray(digits)[:60]) + 1
    return math.fsum(2.0 * 3.0 ** (-float(p)) for p in ones)


@dataclass(frozen=True)
class CantorState:
    """A point of the Cantor set given by its binary code, or a point of S.

    The code ``a`` stands for ``sum 2 a_i / 3^i``.  Points of
    ``S = {(1/2) 3^-k}`` lie in the removed intervals and have no code; they
    are flagged with their index ``k``.
    """

    digits: tuple = ()
    in_S: bool = False
    s_index: Optional[int] = None

    def __post_init__(self):
        if self.in_S and (self.s_index is None or self.s_index < 0):
            raise InvalidArgumentError("a point of S needs a nonnegative index")
        if any(d not in (0, 1) for d in self.digits):
            raise InvalidArgumentError("digits must be 0 or 1")

    @property
    def is_zero(self):
        return not self.in_S and not any(self.digits)

    @property
    def value(self):
        if self.in_S:
            return 0.5 * 3.0 ** (-self.s_index)
        return _code_value(self.digits)


def cantor_zeta0(L):
    if L < 2:
        raise InvalidArgumentError("need at least two digits")
    digits = np.zeros(L, dtype=np.int64)
    digits[one_positions(L) - 1] = 1
    return CantorState(tuple(int(d) for d in digits))


def s_point(k):
    return CantorState(in_S=True, s_index=int(k))


def cantor_step(s):
    """Shift the code; points of S go to 0; 0 is fixed."""
    if s.in_S or s.is_zero:
        return CantorState(tuple(0 for _ in s.digits[1:] or (0,)))
    if len(s.digits) < 2:
        raise HorizonExceededError("digit buffer exhausted")
    return CantorState(s.digits[1:])


def cantor_orbit(N):
    """Real values x_1..x_N of the shift orbit of the initial code.

    x_n is the value of the code shifted by n - 1, a sum over the one
    positions p >= n of 2 * 3^-(p - n + 1).  Terms deeper than 3^-60 are
    dropped; the buffer reaches N + the next one position.
    """
    if N < 1:
        raise InvalidArgumentError("N must be positive")
    pos = one_positions(N + 2 * int(math.isqrt(2 * N)) + 130)
    n = np.arange(1, N + 1)
    start = np.searchsorted(pos, n)
    out = np.zeros(N)
    for j in range(12):
        p = pos[np.minimum(start + j, pos.size - 1)]
        depth = (p - n + 1).astype(np.float64)
        valid = (start + j < pos.size) & (depth <= 60)
        out += np.where(valid, 2.0 * np.power(3.0, -np.minimum(depth, 60.0)), 0.0)
    return out


def dist_to_cantor(x, depth=40):
    """Distance to the middle-third Cantor set."""
    y = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0).copy()
    scale = np.ones_like(y)
    out = np.zeros_like(y)
    done = np.zeros(y.shape, dtype=bool)
    outside = np.asarray(x, dtype=np.float64)
    edge = np.where(outside < 0, -outside, np.where(outside > 1, outside - 1, 0.0))
    for _ in range(depth):
        gap = (y > 1 / 3) & (y < 2 / 3) & ~done
        out = np.where(gap, scale * np.minimum(y - 1 / 3, 2 / 3 - y), out)
        done |= gap
        right = y >= 2 / 3
        y = np.where(right, 3 * y - 2, 3 * y)
        scale = scale / 3
    return out + edge


def dist_to_S(x):
    """Distance to S = {(1/2) 3^-k : k >= 0}, whose closure adds 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x <= 0, -x, np.abs(x - 0.5))
    mid = (x > 0) & (x < 0.5)
    safe = np.where(mid, x, 0.25)
    k = np.floor(np.log(0.5 / safe) / math.log(3.0))
    best = out.copy()
    for dk in (-1, 0, 1, 2):
        s = 0.5 * np.power(3.0, -np.maximum(k + dk, 0))
        best = np.where(mid, np.minimum(best, np.abs(x - s)), best)
    return np.where(mid, np.minimum(best, x), out)


def cantor_phi(x):
    """1 - min(1, dist(x, S u {0})): equal to 1 exactly on S u {0}."""
    return 1.0 - np.minimum(1.0, dist_to_S(x))


def cantor_f0(x):
    """A continuous extension of the shift to [0, 1] that vanishes on S.

    h(x) is 3x, 2 - 3x, 3x - 2 on the three thirds, which is the shift on
    the Cantor set; it is multiplied by dS / (dS + dT), equal to 1 on the
    Cantor set and 0 on S.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.where(x <= 1 / 3, 3 * x, np.where(x < 2 / 3, 2 - 3 * x, 3 * x - 2))
    dT = dist_to_cantor(x)
    dS = dist_to_S(x)
    tot = dS + dT
    g = np.where(tot > 0, dS / np.where(tot > 0, tot, 1.0), 0.0)
    return np.clip(g * h, 0.0, 1.0)


def cantor_value_zeta0(L=60):
    return cantor_zeta0(L).value


def cantor_system():
    zeta0 = cantor_orbit(1)[0]

    def trajectory(idx, N):
        return cantor_orbit(N)[:, None]

    return ControlSystem(
        name="cantor_shift",
        dynamics=lambda X, u: cantor_f0(X),
        phi=lambda X: cantor_phi(X[:, 0]),
        potential=lambda X: X[:, 0].copy(),
        control_points=np.array([[0.0]]),
        state_box=np.array([[0.0, 1.0]]),
        initial=np.array([zeta0]),
        potential_linear=np.array([1.0]),
        control_affine=False,
        trajectory_fn=trajectory,
        phi_lipschitz=1.0,
        params={},
    )


# ---------------------------------------------------------------------------
# dense example


@dataclass(frozen=True)
class DenseParams:
    delta: float = 0.05

    def __post_init__(self):
        if not 0 < self.delta < 1 / 12:
            raise InvalidArgumentError("delta must lie in (0, 1/12)")


def _lerp(x, x0, x1, y0, y1):
    t = (x - x0) / (x1 - x0)
    return (1 - t) * y0 + t * y1


def dense_f0(x, p=DenseParams()):
    a = 0.5 + p.delta
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= a, x, _lerp(x, a, 1.0, a, 0.0))


def dense_f1(x, p=DenseParams()):
    b = 2 / 3 - p.delta
    x = np.asarray(x, dtype=np.float64)
    mid = _lerp(x, 1 / 3, b, 1.0, b)
    tail = _lerp(x, b, 1.0, b, 1 / 3)
    return np.where(x <= 1 / 3, 1.0, np.where(x <= b, mid, tail))


def dense_dynamics(x, u, p=DenseParams()):
    return dense_f0(x, p) * (1 - u) + dense_f1(x, p) * u


def dense_phi(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 1 / 3, 3 * x * x, 2.1 * x * x - 2.1 * x + 0.8)


def dense_system(delta=0.05, controls=11):
    """``controls`` is a count of equispaced points in [0, 1] or an explicit list."""
    p = DenseParams(delta)
    U = np.linspace(0.0, 1.0, controls) if np.isscalar(controls) else np.asarray(controls, dtype=np.float64)
    return ControlSystem(
        name="dense_example",
        dynamics=lambda X, u: dense_dynamics(X, u[0], p),
        phi=lambda X: dense_phi(X[:, 0]),
        potential=lambda X: X[:, 0].copy(),
        control_points=U.reshape(-1, 1),
        state_box=np.array([[0.0, 1.0]]),
        initial=np.array([1 / 3]),
        potential_linear=np.array([1.0]),
        control_affine=True,
        phi_lipschitz=2.1,
        params={"delta": delta, "controls": U.tolist()},
    )


BUILTINS = {"cantor_shift": cantor_system, "dense_example": dense_system}


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    name: str
    claims: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def add(self, claim, expected, measured, ok):
        self.claims.append({"claim": claim, "expected": expected, "measured": measured, "pass": bool(ok)})

    @property
    def passed(self):
        return all(c["pass"] for c in self.claims)

    def to_json(self):
        return {
            "example": self.name,
            "settings": self.settings,
            "claims": self.claims,
            "notes": self.notes,
            "all_pass": self.passed,
        }


def _hausdorff_1d(A, B):
    A = np.sort(np.asarray(A, dtype=np.float64).reshape(-1))
    B = np.sort(np.asarray(B, dtype=np.float64).reshape(-1))
    if A.size == 0 or B.size == 0:
        return math.inf

    def one_way(P, Q):
        j = np.clip(np.searchsorted(Q, P), 1, Q.size - 1) if Q.size > 1 else np.zeros(P.size, dtype=int)
        if Q.size == 1:
            return float(np.max(np.abs(P - Q[0])))
        return float(np.max(np.minimum(np.abs(P - Q[j - 1]), np.abs(P - Q[j]))))

    return max(one_way(A, B), one_way(B, A))


def _sample_target(pieces, step):
    """Dense sample of a union of points and intervals given as (lo, hi) pairs."""
    out = []
    for lo, hi in pieces:
        if hi == lo:
            out.append(np.array([lo]))
        else:
            out.append(np.linspace(lo, hi, int(math.ceil((hi - lo) / (step / 4))) + 1))
    return np.concatenate(out)


def verify_statistical_not_fin(horizon=10_000, eps=0.01, grid_step=1e-3):
    from .optimizer import turnpike_report

    sys = cantor_system()
    rep = VerificationReport("statistical-not-fin", settings={"horizon": horizon, "eps": eps, "grid_step": grid_step})
    st = stationary_points(sys, grid_step)
    res0 = float(stationary_residual(sys, [[0.0]])[0][0])
    near0 = float(np.min(np.abs(st.points[:, 0])))
    rep.add("0 is a stationary point", "residual <= 1e-8 and 0 in sample", {"residual": res0, "nearest": near0},
            res0 <= STATIONARY_TOL and near0 <= grid_step)
    ks = [k for k in range(40) if 0.5 * 3.0 ** (-k) >= grid_step]
    s_res = stationary_residual(sys, np.array([[0.5 * 3.0 ** (-k)] for k in ks]))[0]
    rep.add("S and M are disjoint", "min residual on S > 1e-8", float(s_res.min()), s_res.min() > STATIONARY_TOL)
    z = None if st.zeta_star is None else float(st.zeta_star[0])
    rep.add("zeta* = 0", 0.0, z, z is not None and abs(z) <= grid_step)
    rep.add("phi* = 1", 1.0, st.phi_star, abs(st.phi_star - 1.0) <= 1e-9)
    D = level_set(sys, st.phi_star, grid_step)[:, 0]
    S_pts = np.array([0.0] + [0.5 * 3.0 ** (-k) for k in ks])
    off = float(np.max(_dist_to_set(D[:, None], np.concatenate([S_pts, [0.5 * 3.0 ** -(ks[-1] + 1)]])[:, None])))
    miss = float(np.max(_dist_to_set(S_pts[:, None], D[:, None])))
    rep.add("D* = S u {0} (resolved part)", "both one-sided distances <= grid_step",
            {"D_to_S": off, "S_to_D": miss}, off <= grid_step and miss <= grid_step)
    cond = check_conditions(sys, st, grid_step)
    rep.add("C1: unique optimal stationary point", True, cond.c1_holds, cond.c1_holds)
    rep.add("C3 first part (strict decrease off M*)", True, cond.c3_first, cond.c3_first)
    rep.add("C3 second part (no increase on D*)", True, cond.c3_second, cond.c3_second)
    x = SampledSequence(cantor_orbit(horizon)[:, None], sys.state_box)
    dens = IdealSpec(IdealKind.DENSITY)
    g_d = cluster_estimate(x, dens, eps)
    reps_d = g_d.representatives[:, 0].tolist()
    rep.add("statistical cluster set is {0}", [0.0], reps_d, len(reps_d) == 1 and abs(reps_d[0]) <= eps)
    g_f = cluster_estimate(x, IdealSpec(IdealKind.FIN), eps)
    reps_f = g_f.representatives[:, 0]
    targets = [0.0, 2 / 3, 2 / 9, 2 / 27]
    gaps = [float(np.min(np.abs(reps_f - t))) for t in targets]
    rep.add("classical cluster set contains 0, 2/3, 2/9, 2/27", "distances <= eps", gaps, max(gaps) <= eps)
    phi_d = sys.phi_values(g_d.representatives)
    rep.add("statistical cluster set lies in D* (statistical optimality condition)", "phi >= phi* - eps",
            phi_d.tolist(), bool(np.all(phi_d >= st.phi_star - eps)))
    phi_f = sys.phi_values(g_f.representatives)
    rep.add("classical cluster set leaves D* (classical condition fails)", "min phi < phi* - eps",
            float(phi_f.min()), phi_f.min() < st.phi_star - eps)
    J_d, gap_d = functional_J(x, sys.phi_values, dens, gamma=g_d)
    J_f, _ = functional_J(x, sys.phi_values, IdealSpec(IdealKind.FIN), gamma=g_f)
    rep.add("statistical J exceeds classical J along the orbit", "J_density > J_fin",
            {"J_density": J_d, "J_fin": J_f, "density_cross_check_gap": gap_d}, J_d > J_f)
    tp = turnpike_report(x, [0.0], IdealSpec(IdealKind.DENSITY, burn_in_fraction=0.5), [0.1])
    rep.add("orbit converges statistically to zeta*", "converges",
            {"verdict": tp.verdict, "fraction": tp.fractions[0][1]}, tp.verdict == "converges")
    tp_fin = turnpike_report(x, [0.0], IdealSpec(IdealKind.FIN), [0.1])
    rep.add("orbit does not converge classically", "escape set not small",
            {"verdict": tp_fin.verdict, "escape_small": tp_fin.complements[0]["small"]},
            not tp_fin.complements[0]["small"])
    rep.notes.append("statistical convergence is judged with burn-in fraction 0.5; "
                     "at 0.1 the finite-horizon escape ratio near the burn-in index exceeds the threshold")
    rep.notes.append("J along the orbit approaches phi* only slowly with the horizon; "
                     "the cluster-set form of the optimality condition is checked instead")
    return rep


def verify_dense(delta=0.05, grid_step=1e-3, horizon=10):
    from .optimizer import SearchConfig, search, turnpike_report

    sys = dense_system(delta)
    rep = VerificationReport("dense", settings={"delta": delta, "grid_step": grid_step, "horizon": horizon})
    st = stationary_points(sys, grid_step)
    target_M = _sample_target([(0.0, 2 / 3 - delta)], grid_step)
    hM = _hausdorff_1d(st.points[:, 0], target_M)
    rep.add("M = [0, 2/3 - delta]", "Hausdorff distance <= 2e-3", hM, hM <= 2e-3)
    z = None if st.zeta_star is None else float(st.zeta_star[0])
    rep.add("zeta* = 1/3", 1 / 3, z, z is not None and abs(z - 1 / 3) <= 1e-3)
    rep.add("phi* = 1/3", 1 / 3, st.phi_star, abs(st.phi_star - 1 / 3) <= 1e-6)
    D = level_set(sys, st.phi_star, grid_step)[:, 0]
    hD = _hausdorff_1d(D, _sample_target([(1 / 3, 1 / 3), (2 / 3, 1.0)], grid_step))
    rep.add("D* = {1/3} u [2/3, 1]", "Hausdorff distance <= grid_step", hD, hD <= grid_step)
    cond = check_conditions(sys, st, grid_step)
    rep.add("C1: unique optimal stationary point", True, cond.c1_holds, cond.c1_holds)
    rep.add("C3 first part holds", True, cond.c3_first, cond.c3_first)
    w = cond.c3_second_witness
    ok_w = (not cond.c3_second and w is not None and abs(w["point"][0] - 1 / 3) <= grid_step
            and abs(w["control"][0] - 1.0) <= 1e-12)
    rep.add("C3 second part fails at (1/3, u=1)", {"holds": False, "point": 1 / 3, "control": 1.0},
            {"holds": cond.c3_second, "witness": w}, ok_w)
    rep.add("linear decrease condition fails", False, cond.c3lc_holds, cond.c3lc_holds is False)

    const = simulate(sys, [[0.0]] * (horizon - 1))
    fin = IdealSpec(IdealKind.FIN)
    J_c, _ = functional_J(const.trajectory, sys.phi_values, fin, eps=0.01)
    rep.add("constant process certifies the classical optimality condition", f">= {st.phi_star} - 1e-9", J_c,
            J_c >= st.phi_star - 1e-9)

    two = dense_system(delta, controls=[0.0, 1.0])
    stated = simulate(two, [[u] for u in ([0.0, 1.0] * horizon)[: horizon - 1]])
    target = np.array([1 / 3 if n % 2 else 1.0 for n in range(1, horizon + 1)])
    stated_ok = bool(np.allclose(stated.trajectory.points[:, 0], target, atol=1e-12))
    ones = simulate(two, [[1.0]] * (horizon - 1))
    ones_ok = bool(np.allclose(ones.trajectory.points[:, 0], target, atol=1e-12))
    rep.add("some control sequence produces 1/3, 1, 1/3, 1, ...", True, {"controls_all_ones": ones_ok}, ones_ok)
    if not stated_ok:
        rep.notes.append(
            "controls (0,1,0,1,...) give the trajectory "
            f"{[round(v, 6) for v in stated.trajectory.points[:4, 0].tolist()]}..., not 1/3, 1, 1/3, 1; "
            "controls (1,1,1,...) reproduce it"
        )

    cfg = SearchConfig(horizon=horizon, method="exhaustive", objective_ideal=fin)
    best = search(two, cfg)
    rep.add("optimal value is 1/3 (exhaustive, U={0,1})", 1 / 3, best.objective, abs(best.objective - 1 / 3) <= 1e-9)
    osc = bool(np.allclose(best.process.trajectory.points[:, 0], target, atol=1e-12))
    rep.add("optimal process oscillates between 1/3 and 1", True, osc, osc)
    tp = turnpike_report(best.process.trajectory, [1 / 3], fin, [0.1], phi=sys.phi_values)
    rep.add("optimal trajectory does not converge to zeta*", "diverges",
            {"verdict": tp.verdict, "fraction": tp.fractions[0][1]}, tp.verdict == "diverges")
    g = cluster_estimate(best.process.trajectory, fin, 0.01)
    diag = lemma_diagnostics(sys, best.process, 1 / 3, g, grid_step)
    rep.add("decrease-set hypothesis of the maximizer lemma is violated", "hypothesis violated",
            diag.maximizer_check.status, diag.maximizer_check.status == "hypothesis violated")
    return rep


EXAMPLES = {"statistical-not-fin": verify_statistical_not_fin, "dense": verify_dense}


def verify_example(name, **kwargs):
    try:
        fn = EXAMPLES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
    return fn(**kwargs)

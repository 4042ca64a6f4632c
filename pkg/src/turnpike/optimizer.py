"""Finite-horizon search for processes maximizing the J proxy, and turnpike
diagnostics for the resulting trajectories."""

from dataclasses import dataclass, field
import itertools
import math
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError
from .ideals import IdealKind, IdealSpec, IndexSet, classify_small
from .sequences import SampledSequence, as_sequence, ideal_liminf, sequence_to_csv
from .system import BOX_TOL, Process, simulate

DEFAULT_BUDGET = 1 << 16


@dataclass(frozen=True)
class SearchConfig:
    horizon: int
    method: str = "exhaustive"
    beam_width: int = 64
    objective_ideal: IdealSpec = field(default_factory=lambda: IdealSpec(IdealKind.FIN))
    tail_window: Optional[int] = None
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidArgumentError("horizon must be positive")
        if self.method not in ("exhaustive", "beam"):
            raise InvalidArgumentError(f"unknown search method {self.method!r}")
        if self.beam_width < 1:
            raise InvalidArgumentError("beam_width must be positive")
        if self.tail_window is not None and not 1 <= self.tail_window <= self.horizon:
            raise InvalidArgumentError("tail_window must lie in [1, horizon]")

    @property
    def window(self):
        return self.tail_window if self.tail_window is not None else math.ceil(self.horizon / 2)

    def to_json(self):
        return {
            "horizon": self.horizon,
            "method": self.method,
            "beam_width": self.beam_width,
            "objective_ideal": self.objective_ideal.to_json(),
            "tail_window": self.window,
            "budget": self.budget,
        }


@dataclass(frozen=True)
class SearchResult:
    process: Process
    objective: float
    config: SearchConfig
    evaluated: int

    def to_json(self, trajectory_csv_path=None):
        return {
            "controls": self.process.controls.tolist(),
            "control_indices": list(self.process.control_indices),
            "trajectory_csv_path": trajectory_csv_path,
            "objective": self.objective,
            "method": self.config.method,
            "config": self.config.to_json(),
            "evaluated": self.evaluated,
        }


def trajectory_csv(sys, proc):
    X = proc.trajectory.points
    return sequence_to_csv(proc.trajectory, {"phi": sys.phi_values(X), "P": sys.P_values(X)})


def _objectives(phis, cfg, window):
    """Proxy objective and tie-break mean for a batch of phi rows (B, L)."""
    mean = phis.mean(axis=1)
    if cfg.objective_ideal.kind is IdealKind.FIN:
        return phis[:, -window:].min(axis=1), mean
    return np.array([ideal_liminf(row, cfg.objective_ideal) for row in phis]), mean


def _order(obj, mean, keys):
    """Best first: higher objective, then higher mean phi, then smaller control key."""
    return np.lexsort((keys, -mean, -obj))


def _expand(sys, X, k):
    """All one-step successors; row parent*K + u, so rows stay lexicographic."""
    B, L, m = X.shape
    K = sys.n_controls
    out = np.empty((B * K, L + 1, m))
    out[:, :L] = np.repeat(X, K, axis=0)
    last = X[:, -1, :]
    for u in range(K):
        out[u::K, L] = sys.step(last, u)
    return out


def _check_box(sys, X):
    flat = X[:, -1, :]
    return sys.in_box(flat, BOX_TOL)


def search(sys, cfg):
    """Best process of length ``cfg.horizon`` under the proxy objective.

    Ties on the objective are broken by the mean of phi along the whole
    trajectory (higher first) and then lexicographically by control indices
    (smallest first).  Both keys depend on the data only, so the result does
    not depend on evaluation order.
    """
    H = cfg.horizon
    K = sys.n_controls
    steps = H - 1
    window = cfg.window
    if cfg.method == "exhaustive":
        total = K ** steps
        if total > cfg.budget:
            raise ResourceLimitError("search budget", cfg.budget, total)
    if sys.trajectory_fn is not None:
        return _search_exact(sys, cfg, window)
    X = sys.initial.reshape(1, 1, -1).astype(np.float64)
    keys = np.zeros(1, dtype=np.int64)
    seqs = np.zeros((1, 0), dtype=np.int64)
    evaluated = 1
    for _ in range(steps):
        X = _expand(sys, X, K)
        seqs = np.concatenate([np.repeat(seqs, K, axis=0), np.tile(np.arange(K), seqs.shape[0])[:, None]], axis=1)
        ok = _check_box(sys, X)
        X, seqs = X[ok], seqs[ok]
        if X.shape[0] == 0:
            raise InvalidArgumentError("every control sequence leaves the state box")
        evaluated += X.shape[0]
        if cfg.method == "beam" and X.shape[0] > cfg.beam_width:
            phis = _phi_rows(sys, X)
            obj, mean = _objectives(phis, cfg, min(window, phis.shape[1]))
            keep = np.sort(_order(obj, mean, _lex_keys(seqs, K))[: cfg.beam_width])
            X, seqs = X[keep], seqs[keep]
    phis = _phi_rows(sys, X)
    obj, mean = _objectives(phis, cfg, min(window, phis.shape[1]))
    best = int(_order(obj, mean, _lex_keys(seqs, K))[0])
    proc = simulate(sys, seqs[best], by_index=True)
    return SearchResult(proc, float(obj[best]), cfg, evaluated)


def _lex_keys(seqs, K):
    """Rank of each control tuple in lexicographic order (exact integer)."""
    if seqs.shape[1] == 0:
        return np.zeros(seqs.shape[0], dtype=np.int64)
    order = np.lexsort(seqs.T[::-1])
    rank = np.empty(seqs.shape[0], dtype=np.int64)
    rank[order] = np.arange(seqs.shape[0])
    return rank


def _phi_rows(sys, X):
    B, L, m = X.shape
    return sys.phi_values(X.reshape(B * L, m)).reshape(B, L)


def _search_exact(sys, cfg, window):
    K = sys.n_controls
    steps = cfg.horizon - 1
    if cfg.method == "beam" and K ** steps > cfg.budget:
        raise ResourceLimitError("search budget", cfg.budget, K ** steps)
    seqs = list(itertools.product(range(K), repeat=steps))
    procs = [simulate(sys, s, by_index=True) for s in seqs]
    phis = np.stack([sys.phi_values(p.trajectory.points) for p in procs])
    obj, mean = _objectives(phis, cfg, window)
    best = int(_order(obj, mean, np.arange(len(seqs)))[0])
    return SearchResult(procs[best], float(obj[best]), cfg, len(seqs))


# ---------------------------------------------------------------------------
# turnpike diagnostics


@dataclass(frozen=True)
class TurnpikeReport:
    fractions: list
    J_estimate: Optional[float]
    verdict: str
    complements: list
    condition_summary: Optional[dict] = None

    def to_json(self):
        return {
            "fractions": [[e, f] for e, f in self.fractions],
            "J_estimate": self.J_estimate,
            "verdict": self.verdict,
            "complements": self.complements,
            "condition_summary": self.condition_summary,
        }


def turnpike_report(x, zeta_star, ideal, eps_list, phi=None, condition_summary=None):
    """Neighbourhood fractions around ``zeta_star`` and an I-convergence verdict.

    converges: every complement {n : |x_n - zeta*| >= eps} is small.
    diverges: some complement is not small and scores at least the ideal's
    divergence threshold.  Anything else is inconclusive.
    """
    x = as_sequence(x.trajectory if isinstance(x, Process) else x)
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InvalidArgumentError("eps_list must not be empty")
    if any(e <= 0 for e in eps_list) or eps_list != sorted(eps_list):
        raise InvalidArgumentError("eps_list must be positive and sorted")
    z = np.asarray(zeta_star, dtype=np.float64).reshape(1, -1)
    d = np.linalg.norm(x.points - z, axis=1)
    N = x.horizon
    fractions, comps = [], []
    all_small, divergent = True, False
    for e in eps_list:
        inside = d < e
        fractions.append((e, float(np.count_nonzero(inside)) / N))
        rep = classify_small(ideal, IndexSet.from_mask(~inside))
        comps.append({"eps": e, "score": rep.score, "small": rep.small})
        all_small &= rep.small
        if not rep.small and rep.score >= ideal.divergence_threshold(N):
            divergent = True
    verdict = "converges" if all_small else ("diverges" if divergent else "inconclusive")
    J = None
    if phi is not None:
        J = ideal_liminf(np.asarray(phi(x.points), dtype=np.float64).reshape(-1), ideal)
    return TurnpikeReport(fractions, J, verdict, comps, condition_summary)

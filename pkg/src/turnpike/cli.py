"""Command-line front end.

Exit status: 0 success, 1 domain error (error JSON on stderr), 2 bad
configuration or unreadable input.  ``verify`` exits 0 only when every
claim passes.  Output is deterministic: sorted keys, no timestamps.
"""

import argparse
import json
import math
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, TurnpikeError
from .examples import cantor_orbit, verify_example
from .ideals import IdealKind, IdealSpec, IndexSet, classify_small, log_density_estimate, longest_ap, named_set
from .ideals import summable_mass, upper_density_estimate
from .optimizer import SearchConfig, search, trajectory_csv, turnpike_report
from .sequences import SampledSequence, cluster_estimate, functional_J, sequence_from_csv
from .specs import load_system, system_to_spec
from .system import DEFAULT_GRID_STEP, check_conditions, simulate, stationary_points

SCHEMA_VERSION = 1
DEFAULTS = {
    "smallness_threshold": 0.05,
    "burn_in_fraction": 0.1,
    "summable_bound": 10.0,
    "ap_length_coefficient": 3.0,
    "eps": 0.01,
    "grid_step": DEFAULT_GRID_STEP,
    "stationary_tol": 1e-8,
    "strictness_margin": 1e-9,
    "cell_budget": 10**7,
}

SEQUENCES = ("alternating", "square_spike", "cantor", "harmonic")


def builtin_sequence(name, horizon):
    n = np.arange(1, horizon + 1)
    if name == "alternating":
        x = np.where(n % 2 == 0, 1.0, -1.0)
        return SampledSequence(x[:, None], [[-1.0, 1.0]])
    if name == "square_spike":
        r = np.floor(np.sqrt(n)).astype(np.int64)
        x = np.where(r * r == n, 1.0, 0.0)
        return SampledSequence(x[:, None], [[0.0, 1.0]])
    if name == "cantor":
        return SampledSequence(cantor_orbit(horizon)[:, None], [[0.0, 1.0]])
    if name == "harmonic":
        return SampledSequence((1.0 / n)[:, None], [[0.0, 1.0]])
    raise ConfigError(f"unknown sequence {name!r}; choose from {list(SEQUENCES)}")


# ---------------------------------------------------------------------------
# parsing


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_ideal(p, default="density"):
    p.add_argument("--ideal", default=default, help="Fin, Density, Logarithmic, Summable, VanDerWaerden")
    p.add_argument("--tau", type=float, default=DEFAULTS["smallness_threshold"])
    p.add_argument("--burn-in-fraction", type=float, default=DEFAULTS["burn_in_fraction"])
    p.add_argument("--summable-bound", type=float, default=DEFAULTS["summable_bound"])
    p.add_argument("--ap-coefficient", type=float, default=DEFAULTS["ap_length_coefficient"])


def _add_output(p):
    p.add_argument("--output", "-o", help="write here instead of standard output")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--config", help="JSON file with option values (unknown keys are fatal)")


def build_parser():
    parser = argparse.ArgumentParser(prog="turnpike", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="density estimates and smallness of an index set")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--set", dest="set_name", help="evens, squares, triangular, dyadic, full, empty")
    g.add_argument("--set-file", help="JSON {indices, horizon}")
    p.add_argument("--horizon", type=int)
    p.add_argument("--burn-in", type=int, help="explicit burn-in index for the raw estimates")
    _add_ideal(p)
    _add_output(p)

    p = sub.add_parser("cluster", help="cluster set estimate of a sequence")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--input", help="CSV with header n,x1..xm")
    g.add_argument("--sequence", choices=SEQUENCES)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--eps", type=float, default=DEFAULTS["eps"])
    _add_ideal(p)
    _add_output(p)

    p = sub.add_parser("simulate", help="trajectory of a control sequence")
    p.add_argument("--system", required=False, help="builtin name or system spec JSON")
    p.add_argument("--controls", type=_floats, help="comma-separated scalar controls")
    p.add_argument("--horizon", type=int, help="constant first control for this many states")
    _add_output(p)

    p = sub.add_parser("stationary", help="stationary points and condition checks")
    p.add_argument("--system", required=False)
    p.add_argument("--grid-step", type=float, default=DEFAULTS["grid_step"])
    p.add_argument("--tol", type=float, default=DEFAULTS["stationary_tol"])
    p.add_argument("--samples", action="store_true", help="include D*, E_P, E_P_bar samples")
    _add_output(p)

    p = sub.add_parser("optimize", help="finite-horizon search for an optimal process")
    p.add_argument("--system", required=False)
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--method", choices=("exhaustive", "beam"), default="exhaustive")
    p.add_argument("--beam-width", type=int, default=64)
    p.add_argument("--tail-window", type=int)
    p.add_argument("--budget", type=int, default=1 << 16)
    p.add_argument(
        "--control-points", type=_floats,
        help="override the control list (default for control-affine systems: the extreme controls)",
    )
    p.add_argument("--trajectory-csv", help="where to write the trajectory CSV")
    p.add_argument("--turnpike", action="store_true", help="add a turnpike report around zeta*")
    p.add_argument("--eps-list", type=_floats, default=[0.1])
    p.add_argument("--grid-step", type=float, default=DEFAULTS["grid_step"])
    _add_ideal(p, default="fin")
    _add_output(p)

    p = sub.add_parser("verify", help="replay the claims of a reference example")
    p.add_argument("name", nargs="?", help="statistical-not-fin or dense")
    p.add_argument("--horizon", type=int)
    p.add_argument("--eps", type=float, default=DEFAULTS["eps"])
    p.add_argument("--grid-step", type=float, default=DEFAULTS["grid_step"])
    p.add_argument("--delta", type=float, default=0.05)
    _add_output(p)
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def parse(argv):
    """Parse argv; values from ``--config`` act as defaults under explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {args.config!r} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg = dict(cfg)
    if cfg.pop("command", args.command) != args.command:
        raise ConfigError("config is for a different command")
    sp = _subparser(parser, args.command)
    dests = {a.dest for a in sp._actions if a.dest not in ("help", "config")}
    unknown = set(cfg) - dests
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def _ideal(args):
    return IdealSpec(
        IdealKind.parse(args.ideal),
        smallness_threshold=args.tau,
        burn_in_fraction=args.burn_in_fraction,
        summable_bound=args.summable_bound,
        ap_length_coefficient=args.ap_coefficient,
    )


# ---------------------------------------------------------------------------
# commands


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, IdealKind):
        return obj.value
    return obj


def _header(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("output", "config")}
    return {"schema_version": SCHEMA_VERSION, "command": args.command, "defaults": DEFAULTS, "config": cfg}


def cmd_density(args):
    if args.set_file:
        try:
            doc = json.loads(Path(args.set_file).read_text())
            if isinstance(doc, dict) and "result" in doc:
                # a density report written earlier
                doc = doc["result"]["set"]
            A = IndexSet.from_json(doc)
        except OSError as exc:
            raise ConfigError(f"cannot read {args.set_file!r}: {exc.strerror}") from None
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad index set file: {exc}") from None
        label = {"file": args.set_file}
    else:
        if not args.set_name or not args.horizon:
            raise ConfigError("density needs --set and --horizon, or --set-file")
        A = named_set(args.set_name, args.horizon)
        label = {"name": args.set_name}
    spec = _ideal(args)
    b = args.burn_in if args.burn_in is not None else spec.burn_in(A.horizon)
    report = classify_small(spec, A)
    partial, tail = summable_mass(A)
    out = {
        "set": {**label, **A.to_json(), "size": len(A)},
        "ideal": spec.to_json(),
        "burn_in": b,
        "upper_density": upper_density_estimate(A, b),
        "log_density": log_density_estimate(A, b),
        "summable_mass": {"partial_sum": partial, "tail_increment": tail},
        "longest_ap": longest_ap(A),
        "score": report.score,
        "small": report.small,
        "details": report.details,
    }
    return out, None


def _load_sequence(args):
    if args.input:
        try:
            text = Path(args.input).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.input!r}: {exc.strerror}") from None
        return sequence_from_csv(text)
    if not args.sequence:
        raise ConfigError("cluster needs --input or --sequence")
    return builtin_sequence(args.sequence, args.horizon)


def cmd_cluster(args):
    x = _load_sequence(args)
    spec = _ideal(args)
    g = cluster_estimate(x, spec, args.eps)
    out = {"horizon": x.horizon, "dimension": x.dimension, **g.to_json()}
    out["requested_cell_size"] = g.requested_cell_size
    if args.format == "csv":
        lines = ["representative," + ",".join(f"x{d + 1}" for d in range(x.dimension)) + ",score"]
        for j, (r, s) in enumerate(zip(g.representatives, g.scores)):
            lines.append(",".join([str(j + 1)] + [repr(float(v)) for v in r] + [repr(float(s))]))
        return out, "\n".join(lines) + "\n"
    return out, None


def _system(args):
    if not args.system:
        raise ConfigError("--system is required")
    return load_system(args.system)


def cmd_simulate(args):
    sys = _system(args)
    if args.controls is not None:
        controls = [[u] for u in args.controls]
    else:
        H = args.horizon or 1
        controls = [sys.control_points[0].tolist()] * (H - 1)
    proc = simulate(sys, controls)
    out = {
        "system": system_to_spec(sys),
        "controls": proc.controls.tolist(),
        "trajectory": proc.trajectory.points.tolist(),
        "phi": sys.phi_values(proc.trajectory.points).tolist(),
        "P": sys.P_values(proc.trajectory.points).tolist(),
    }
    return out, trajectory_csv(sys, proc) if args.format == "csv" else None


def cmd_stationary(args):
    sys = _system(args)
    st = stationary_points(sys, args.grid_step, args.tol)
    cond = check_conditions(sys, st, args.grid_step)
    out = {
        "system": system_to_spec(sys),
        "stationary": st.to_json(),
        "conditions": cond.to_json(include_samples=args.samples),
    }
    if args.format == "csv":
        res = st.residuals
        lines = ["k," + ",".join(f"x{d + 1}" for d in range(sys.state_dim)) + ",residual,phi"]
        phis = sys.phi_values(st.points)
        for j, p in enumerate(st.points):
            lines.append(",".join([str(j + 1)] + [repr(float(v)) for v in p] + [repr(float(res[j])), repr(float(phis[j]))]))
        return out, "\n".join(lines) + "\n"
    return out, None


def cmd_optimize(args):
    sys = _system(args)
    if args.control_points is not None:
        sys = load_system({**system_to_spec(sys), "control_points": [[u] for u in args.control_points]})
    elif sys.control_affine and sys.n_controls > 2 and sys.control_points.shape[1] == 1:
        u = sys.control_points[:, 0]
        sys = load_system({**system_to_spec(sys), "control_points": [[float(u.min())], [float(u.max())]]})
    cfg = SearchConfig(
        horizon=args.horizon,
        method=args.method,
        beam_width=args.beam_width,
        objective_ideal=_ideal(args),
        tail_window=args.tail_window,
        budget=args.budget,
    )
    res = search(sys, cfg)
    csv_text = trajectory_csv(sys, res.process)
    csv_path = args.trajectory_csv
    if csv_path is None and args.output and args.format == "json":
        csv_path = str(Path(args.output).with_suffix(".trajectory.csv"))
    if csv_path is not None:
        _write(csv_path, csv_text)
    out = {"system": system_to_spec(sys), **res.to_json(csv_path)}
    out["trajectory"] = res.process.trajectory.points.tolist()
    if args.turnpike:
        st = stationary_points(sys, args.grid_step)
        if st.zeta_star is not None:
            cond = check_conditions(sys, st, args.grid_step)
            tp = turnpike_report(
                res.process, st.zeta_star, cfg.objective_ideal, sorted(args.eps_list), phi=sys.phi_values,
                condition_summary=cond.to_json(),
            )
            out["turnpike"] = {"zeta_star": st.zeta_star.tolist(), **tp.to_json()}
        else:
            out["turnpike"] = {"zeta_star": None, "verdict": "inconclusive"}
    return out, csv_text if args.format == "csv" else None


def cmd_verify(args):
    if not args.name:
        raise ConfigError("verify needs an example name")
    kwargs = {"grid_step": args.grid_step}
    if args.name == "statistical-not-fin":
        kwargs["eps"] = args.eps
        if args.horizon:
            kwargs["horizon"] = args.horizon
    elif args.name == "dense":
        kwargs["delta"] = args.delta
        if args.horizon:
            kwargs["horizon"] = args.horizon
    rep = verify_example(args.name, **kwargs)
    return rep.to_json(), None


COMMANDS = {
    "density": cmd_density,
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "optimize": cmd_optimize,
    "verify": cmd_verify,
}


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path!r}: {exc.strerror}") from None


def render(args, payload):
    doc = {**_header(args), "result": payload}
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(argv=None):
    """Run one command; returns the exit status."""
    try:
        args = parse(argv)
        payload, csv_text = COMMANDS[args.command](args)
        text = csv_text if args.format == "csv" and csv_text is not None else render(args, payload)
        if args.output:
            _write(args.output, text)
        else:
            _sys.stdout.write(text)
        if args.command == "verify" and not payload["all_pass"]:
            return 1
        return 0
    except ConfigError as exc:
        _sys.stderr.write(json.dumps({"error": "config-error", "message": str(exc)}, sort_keys=True) + "\n")
        return 2
    except TurnpikeError as exc:
        _sys.stderr.write(json.dumps(_clean(exc.to_dict()), sort_keys=True) + "\n")
        return 1
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2


def main(argv=None):
    raise SystemExit(run(argv))


if __name__ == "__main__":
    main()

"""System specification JSON: builtin systems and piecewise-affine tables.

Schema::

    {"state_dim": 1,
     "control_points": [[0.0], [1.0]],
     "dynamics": {"builtin": "dense_example", "params": {"delta": 0.05}}
                 | {"piecewise_affine": {"breakpoints": [...], "values": [[...], ...]}},
     "phi": {"builtin": "dense_example"} | {"piecewise_affine": {...}},
     "potential": {"linear": [1.0]} | {"builtin": ...} | {"piecewise_affine": {...}},
     "state_box": [[0.0, 1.0]],
     "initial": [0.333...]}

Piecewise-affine tables are one-dimensional: continuous interpolation of
``values`` at ``breakpoints``; for dynamics ``values`` holds one row per
control point.  A builtin dynamics entry supplies every field it is not
given explicitly.
"""

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .examples import BUILTINS, cantor_system, dense_system
from .system import ControlSystem

TOP_KEYS = {"state_dim", "control_points", "dynamics", "phi", "potential", "state_box", "initial", "name"}
PARAM_KEYS = {"cantor_shift": set(), "dense_example": {"delta", "controls"}}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _table(entry, where):
    _check_keys(entry, {"breakpoints", "values"}, where)
    try:
        bp = np.asarray(entry["breakpoints"], dtype=np.float64)
        vals = np.asarray(entry["values"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: bad table ({exc})") from None
    if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
        raise ConfigError(f"{where}: breakpoints must be strictly increasing, at least two")
    if vals.shape[-1] != bp.size:
        raise ConfigError(f"{where}: values do not match breakpoints")
    return bp, vals


def _scalar_field(entry, where, builtin_default):
    if not isinstance(entry, dict) or len(entry) != 1:
        raise ConfigError(f"{where} must have exactly one of builtin, piecewise_affine, linear")
    (kind, body), = entry.items()
    if kind == "builtin":
        if body not in BUILTINS:
            raise ConfigError(f"{where}: unknown builtin {body!r}")
        return BUILTINS[body]().phi if where == "phi" else BUILTINS[body]().potential, None
    if kind == "linear":
        c = np.asarray(body, dtype=np.float64).reshape(-1)
        return (lambda X, c=c: np.atleast_2d(X) @ c), c
    if kind == "piecewise_affine":
        bp, vals = _table(body, where)
        if vals.ndim != 1:
            raise ConfigError(f"{where}: values must be a flat list")
        return (lambda X, bp=bp, v=vals: np.interp(np.atleast_2d(X)[:, 0], bp, v)), (
            np.array([1.0]) if where == "potential" and np.allclose(vals, bp) else None
        )
    raise ConfigError(f"{where}: unknown scheme {kind!r}")


def _builtin_base(dyn):
    _check_keys(dyn, {"builtin", "params"}, "dynamics")
    name = dyn["builtin"]
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin system {name!r}; choose from {sorted(BUILTINS)}")
    params = dyn.get("params", {}) or {}
    _check_keys(params, PARAM_KEYS[name], f"{name} params")
    try:
        return name, BUILTINS[name](**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} params: {exc}") from None


def build_system(spec):
    """ControlSystem from a parsed spec dict (or a builtin name)."""
    if isinstance(spec, str):
        spec = {"dynamics": {"builtin": spec}}
    if isinstance(spec.get("result"), dict) and "system" in spec["result"]:
        spec = spec["result"]["system"]
    elif isinstance(spec.get("system"), dict):
        spec = spec["system"]
    _check_keys(spec, TOP_KEYS, "system spec")
    if "dynamics" not in spec:
        raise ConfigError("system spec needs a dynamics entry")
    dyn = spec["dynamics"]
    if isinstance(dyn, dict) and "builtin" in dyn:
        name, base = _builtin_base(dyn)
        fields = {}
        if "control_points" in spec:
            fields["control_points"] = np.asarray(spec["control_points"], dtype=np.float64).reshape(-1, 1)
        for key in ("state_box", "initial"):
            if key in spec:
                fields[key] = np.asarray(spec[key], dtype=np.float64)
        if name == "cantor_shift":
            for key, val in fields.items():
                ref = getattr(base, key)
                if val.size != ref.size or not np.allclose(val.reshape(ref.shape), ref, atol=1e-12, rtol=0):
                    raise ConfigError(f"cantor_shift does not accept a custom {key}")
            fields = {}
        phi, pot, lin = base.phi, base.potential, base.potential_linear
        if "phi" in spec:
            phi, _ = _scalar_field(spec["phi"], "phi", name)
        if "potential" in spec:
            pot, lin = _scalar_field(spec["potential"], "potential", name)
        params = dict(base.params)
        if "control_points" in fields:
            params["controls"] = fields["control_points"][:, 0].tolist()
        sys = ControlSystem(
            name=name,
            dynamics=base.dynamics,
            phi=phi,
            potential=pot,
            control_points=fields.get("control_points", base.control_points),
            state_box=fields.get("state_box", base.state_box),
            initial=fields.get("initial", base.initial),
            potential_linear=lin,
            control_affine=base.control_affine,
            trajectory_fn=base.trajectory_fn,
            phi_lipschitz=base.phi_lipschitz if "phi" not in spec else None,
            params=params,
        )
    else:
        sys = _build_tabulated(spec)
    normalized = dict(spec)
    object.__setattr__(sys, "params", {**sys.params, "spec": normalized})
    return sys.validate()


def _build_tabulated(spec):
    for key in ("control_points", "phi", "potential", "state_box", "initial"):
        if key not in spec:
            raise ConfigError(f"tabulated system spec needs {key!r}")
    if int(spec.get("state_dim", 1)) != 1:
        raise ConfigError("piecewise-affine tables are one-dimensional")
    dyn = spec["dynamics"]
    _check_keys(dyn, {"piecewise_affine"}, "dynamics")
    bp, vals = _table(dyn["piecewise_affine"], "dynamics")
    U = np.asarray(spec["control_points"], dtype=np.float64).reshape(-1, 1)
    vals = np.atleast_2d(vals)
    if vals.shape[0] != U.shape[0]:
        raise ConfigError("dynamics table needs one row per control point")

    def dynamics(X, u, bp=bp, vals=vals, U=U):
        k = int(np.argmin(np.abs(U[:, 0] - u[0])))
        return np.interp(np.atleast_2d(X)[:, 0], bp, vals[k])[:, None]

    phi, _ = _scalar_field(spec["phi"], "phi", None)
    pot, lin = _scalar_field(spec["potential"], "potential", None)
    return ControlSystem(
        name=spec.get("name", "tabulated"),
        dynamics=dynamics,
        phi=phi,
        potential=pot,
        control_points=U,
        state_box=np.asarray(spec["state_box"], dtype=np.float64),
        initial=np.asarray(spec["initial"], dtype=np.float64),
        potential_linear=lin,
        params={},
    )


def system_to_spec(sys):
    """Spec dict that rebuilds ``sys`` (re-readable by ``build_system``)."""
    if "spec" in sys.params and "builtin" not in sys.params["spec"].get("dynamics", {}):
        return sys.params["spec"]
    spec = {
        "state_dim": sys.state_dim,
        "control_points": sys.control_points.tolist(),
        "state_box": sys.state_box.tolist(),
        "initial": sys.initial.tolist(),
    }
    prior = sys.params.get("spec", {})
    for key in ("phi", "potential"):
        if key in prior:
            spec[key] = prior[key]
    if sys.name == "cantor_shift":
        spec["dynamics"] = {"builtin": "cantor_shift", "params": {}}
    elif sys.name == "dense_example":
        params = {"delta": sys.params.get("delta", 0.05)}
        spec["dynamics"] = {"builtin": "dense_example", "params": params}
    else:
        raise ConfigError(f"system {sys.name!r} has no serializable spec")
    return spec


def load_system(ref):
    """Builtin name, path to a spec JSON, or a report JSON embedding ``system``."""
    if isinstance(ref, dict):
        return build_system(ref)
    if ref in BUILTINS:
        return build_system(ref)
    path = Path(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read system spec {ref!r}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"system spec {ref!r} is not valid JSON: {exc}") from None
    return build_system(obj)


__all__ = ["build_system", "load_system", "system_to_spec", "cantor_system", "dense_system"]

"""Run configuration: JSON schema, validation and object construction.

Unknown keys are rejected at every level.  :func:`resolve` fills defaults
so that the resolved dictionary, written back to disk, reproduces the run.
"""

import copy
import json
import math

import jsonschema
import numpy as np

from . import hamiltonians as hm
from .engine import METHODS, EngineOptions, GaussHermite, MonteCarlo
from .errors import ConfigError
from .states import GaussianState

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 2}
_mat = {"type": "array", "items": _vec, "minItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "system": _obj({
        "preset": {"enum": ["free", "harmonic", "inverted", "quartic", "explicit"]},
        "omega": _pos,
        "lambda": _num,
        "L": {"type": "integer", "minimum": 1},
        "hessian": _mat,
        "a": _vec,
    }, ["preset"]),
    "perturbation": _obj({
        "preset": {"enum": ["none", "squeeze", "dilate", "linear", "quadratic_q", "explicit"]},
        "eps": _num,
        "omega": _pos,
        "delta_a": _vec,
        "hessian": _mat,
        "a": _vec,
        "anchor": {"enum": ["mean", "minus"]},
    }, ["preset"]),
    "state": _obj({
        "center": _vec,
        "shape": _mat,
        "squeeze": _num,
        "hbar": _pos,
    }, ["center"]),
    "time": _obj({
        "t_max": {"type": "number", "minimum": 0},
        "points": {"type": "integer", "minimum": 1},
        "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    }),
    "methods": {"type": "array", "items": {"enum": list(METHODS)}, "minItems": 1},
    "sampler": _obj({
        "kind": {"enum": ["mc", "gauss_hermite"]},
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "order": {"type": "integer", "minimum": 2},
    }),
    "integrator": _obj({
        "dt": _pos,
        "tol": _pos,
        "max_iter": {"type": "integer", "minimum": 1},
        "hessian": {"enum": ["auto", "fd", "tangent"]},
        "trajectories": {"enum": ["auto", "integrate"]},
        "diagnostics": {"type": "boolean"},
    }),
    "oracle": _obj({
        "N": {"type": "integer", "minimum": 2},
        "steps": {"type": ["integer", "null"], "minimum": 1},
        "span": {"type": ["array", "null"], "items": _num, "minItems": 2, "maxItems": 2},
        "dt_max": {"type": ["number", "null"], "exclusiveMinimum": 0},
    }),
    "output": _obj({
        "dir": {"type": "string"},
        "stem": {"type": "string", "minLength": 1},
        "format": {"enum": ["csv", "json"]},
    }),
    "sweep": _obj({
        "parameter": {"enum": ["eps", "hbar", "t"]},
        "values": {"type": "array", "items": _num},
        "fit": {"type": "boolean"},
        "reference": {"enum": list(METHODS)},
        "target": {"enum": list(METHODS)},
    }, ["parameter", "values"]),
}, ["system", "perturbation", "state", "time", "methods"])

DEFAULTS = {
    "sampler": {"kind": "mc", "n": 100_000, "seed": 0, "order": 64},
    "integrator": {"dt": 1e-3, "tol": 1e-13, "max_iter": 50, "hessian": "auto", "trajectories": "auto",
                   "diagnostics": True},
    "oracle": {"N": 2048, "steps": None, "span": None, "dt_max": None},
    "output": {"dir": "out", "stem": "results", "format": "csv"},
}


def _finite(obj, path="config"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _finite(v, f"{path}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _finite(v, f"{path}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise ConfigError(f"{path} must be finite")


def validate(cfg):
    """Schema check plus the cross-field rules the schema cannot express."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    _finite(cfg)
    sysb, pert, st, tb = cfg["system"], cfg["perturbation"], cfg["state"], cfg["time"]
    if sysb["preset"] == "explicit" and ("hessian" not in sysb or "a" not in sysb):
        raise ConfigError("system: explicit preset needs 'hessian' and 'a'")
    if pert["preset"] == "explicit" and "hessian" not in pert and "a" not in pert:
        raise ConfigError("perturbation: explicit preset needs 'hessian' and/or 'a'")
    if pert["preset"] == "linear" and "delta_a" not in pert:
        raise ConfigError("perturbation: linear preset needs 'delta_a'")
    if pert["preset"] in ("squeeze", "dilate", "quadratic_q") and "eps" not in pert:
        raise ConfigError(f"perturbation: preset {pert['preset']!r} needs 'eps'")
    if ("values" in tb) == ("t_max" in tb):
        raise ConfigError("time: give exactly one of 't_max' or 'values'")
    if "shape" in st and "squeeze" in st:
        raise ConfigError("state: 'shape' and 'squeeze' are exclusive")
    if "sweep" in cfg and len(cfg["sweep"]["values"]) == 0:
        raise ConfigError("sweep: values list is empty")
    return cfg


def resolve(cfg):
    """Validated copy with defaults filled in."""
    cfg = copy.deepcopy(cfg)
    validate(cfg)
    for block, vals in DEFAULTS.items():
        merged = dict(vals)
        merged.update(cfg.get(block, {}))
        cfg[block] = merged
    cfg["state"].setdefault("hbar", 1.0)
    if "t_max" in cfg["time"]:
        cfg["time"].setdefault("points", 21)
    cfg["perturbation"].setdefault("anchor", "mean")
    return cfg


def load(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return resolve(raw)


# -- construction ------------------------------------------------------------

def build_system(block):
    preset = block["preset"]
    omega = block.get("omega", 1.0)
    if preset == "free":
        return hm.free(block.get("L", 1))
    if preset == "harmonic":
        return hm.harmonic(omega)
    if preset == "inverted":
        return hm.inverted(omega)
    if preset == "quartic":
        return hm.quartic(block.get("lambda", 0.1))
    return hm.QuadraticHamiltonian(np.array(block["hessian"], float), np.array(block["a"], float))


def build_perturbation(block, n, omega=1.0):
    preset = block["preset"]
    eps = block.get("eps", 0.0)
    omega = block.get("omega", omega)
    if preset == "none":
        return hm.QuadraticHamiltonian(np.zeros((n, n)), np.zeros(n))
    if preset == "squeeze":
        return hm.squeeze_perturbation(eps, omega)
    if preset == "dilate":
        return hm.dilation_perturbation(eps, omega)
    if preset == "linear":
        return hm.linear_perturbation(eps * np.array(block["delta_a"], float) if "eps" in block
                                      else np.array(block["delta_a"], float))
    if preset == "quadratic_q":
        h = np.zeros((n, n))
        h[n // 2:, n // 2:] = 2.0 * eps * np.eye(n // 2)
        return hm.QuadraticHamiltonian(h, np.zeros(n))
    hess = np.array(block.get("hessian", np.zeros((n, n))), float)
    a = np.array(block.get("a", np.zeros(n)), float)
    scale = eps if "eps" in block else 1.0
    return hm.QuadraticHamiltonian(scale * hess, scale * a)


def build_pair(cfg):
    H = build_system(cfg["system"])
    n = 2 * H.L
    dH = build_perturbation(cfg["perturbation"], n, cfg["system"].get("omega", 1.0))
    if dH.L != H.L:
        raise ConfigError(f"perturbation dimension {2 * dH.L} does not match system {n}")
    p = cfg["perturbation"]
    return hm.pair_from_reference(H, dH, p.get("anchor", "mean"), p.get("eps", float("nan")))


def build_state(block):
    c = np.array(block["center"], float)
    if "shape" in block:
        G = np.array(block["shape"], float)
    elif "squeeze" in block:
        if c.size != 2:
            raise ConfigError("state.squeeze is defined for L = 1")
        r = block["squeeze"]
        G = np.diag([np.exp(2 * r), np.exp(-2 * r)])
    else:
        G = np.eye(c.size)
    try:
        return GaussianState(c, G, block.get("hbar", 1.0))
    except ValueError as exc:
        raise ConfigError(f"state: {exc}") from None


def build_times(block):
    if "values" in block:
        t = np.array(block["values"], float)
        if np.any(np.diff(t) < 0):
            raise ConfigError("time.values must be sorted")
        return t
    return np.linspace(0.0, block["t_max"], block["points"])


def build_sampler(block):
    if block["kind"] == "gauss_hermite":
        return GaussHermite(block["order"])
    if block["n"] < 100:
        raise ConfigError("sampler.n must be >= 100 for Monte Carlo")
    return MonteCarlo(block["n"], block["seed"])


def build_options(cfg, workers=1):
    ig, orc = cfg["integrator"], cfg["oracle"]
    return EngineOptions(
        dt=ig["dt"], tol=ig["tol"], max_iter=ig["max_iter"], hessian=ig["hessian"],
        trajectories=ig["trajectories"], diagnostics=ig["diagnostics"], workers=workers,
        oracle_N=orc["N"], oracle_steps=orc["steps"],
        oracle_span=tuple(orc["span"]) if orc["span"] is not None else None, oracle_dt_max=orc["dt_max"],
    )


def with_parameter(cfg, parameter, value):
    """Copy of ``cfg`` with one sweep parameter replaced."""
    out = copy.deepcopy(cfg)
    out.pop("sweep", None)
    if parameter == "eps":
        out["perturbation"]["eps"] = value
    elif parameter == "hbar":
        out["state"]["hbar"] = value
    elif parameter == "t":
        if value < 0:
            raise ConfigError("sweep over t needs non-negative values")
        out["time"] = {"values": [float(value)]}
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    return resolve(out)

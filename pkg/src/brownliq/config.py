"""Declarative run configuration.

A run file is TOML (or JSON) with the tables listed in :data:`DEFAULTS`.
Every key has a default; unknown keys are rejected.  Values are resolved in
this order, later winning: built-in defaults, the run file, command-line
flags.  The resolved configuration is what gets echoed next to the outputs,
and feeding that echo back in reproduces the run.
"""
from __future__ import annotations

import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from brownliq.configuration import ModelSpec
from brownliq.geometry import HalfCylinder

EXPERIMENTS = ("concentration", "surface", "centrifuge", "archimedes")

DEFAULTS: dict = {
    "seed": 0,
    "output_dir": "runs",
    "run_name": "",
    "jobs": 1,
    "replicas": 1,
    "backend": "auto",
    "model": {
        "N": 1,
        "d": 2,
        "radii": 0.1,
        "weights": 1.0,
        "masses": 1.0,
        "drift_scale": 1.0,
        "vessel": {"kind": "half_cylinder", "half_width": 1.0},
    },
    "sampler": {"sweeps": 20_000, "thin": 1, "burn_in": "auto", "inertia": False},
    "dynamics": {"T": 1.0, "dt": 0.0, "observe_every": 0.01, "inertia": False,
                 "projection_tol": 1e-10, "max_projection_iters": 1000},
    "anneal": {"restarts": 4, "stages": 12, "sweeps_per_stage": 2000},
    "plan": {"sweeps": 20_000, "thin": 10, "burn_in": 2000, "approach_stages": 8, "approach_sweeps": 500,
             "start_scale": 0.0},
    "experiment": {
        "concentration": {"b_list": [1.0, 10.0, 100.0], "eps": 0.1, "c1": 0.0, "threshold": 0.9,
                          "start": "fluid"},
        "surface": {"lam_list": [1.0, 10.0, 50.0, 200.0], "delta": 0.3, "c1": 0.0, "threshold": 0.9,
                    "hole_samples": 200, "start": "optimum"},
        "centrifuge": {"lam_list": [1.0, 10.0, 50.0, 200.0], "delta": 0.2, "max_violation": 0.05},
        "archimedes": {"rho": 0.06, "N": 200, "gamma_ratio": 0.5, "lam": 50.0, "delta": 0.05,
                       "mode": "float", "m1": 1.0, "threshold": 0.9, "start": "random", "half_width": 1.0},
    },
    "pack": {"rho": 0.25, "region": "box", "lo": [0.0, 0.0], "hi": [50.0, 50.0], "count": 0},
    "path": {"from": "", "to": "", "samples_per_segment": 1000},
    "check_vessel": {"a": 1.0, "b_max": 0.0, "grid": 200},
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown key {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path!r} must be a table")
            out[key] = _merge(base[key], val, path + ".")
        else:
            out[key] = _coerce(base[key], val, path)
    return out


def _coerce(default, val, path):
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{path!r} must be true or false")
        return val
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(val, bool) or not isinstance(val, (int, float)) or float(val) != int(val):
            if path.endswith("burn_in") and val == "auto":
                return val
            raise ConfigError(f"{path!r} must be an integer")
        return int(val)
    if isinstance(default, float):
        if isinstance(val, list) and path.split(".")[-1] in ("radii", "weights", "masses"):
            return [float(v) for v in val]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{path!r} must be a number")
        return float(val)
    if isinstance(default, str):
        if path.endswith("burn_in") and isinstance(val, int) and not isinstance(val, bool):
            return val
        if not isinstance(val, str):
            raise ConfigError(f"{path!r} must be a string")
        return val
    if isinstance(default, list):
        if not isinstance(val, list):
            raise ConfigError(f"{path!r} must be a list")
        return [float(v) for v in val]
    return val


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_dotted(tree: dict, dotted: str, value) -> None:
    """Put ``value`` at ``a.b.c`` inside ``tree``, creating tables."""
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def load_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} not found")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


@dataclass
class RunConfig:
    """Resolved configuration (a nested dict with every key present)."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def backend(self) -> str | None:
        b = self.data["backend"]
        return None if b == "auto" else b

    def echo(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def model_spec(self) -> ModelSpec:
        m = self.data["model"]
        n = m["N"]
        v = m["vessel"]
        vessel = HalfCylinder(v["half_width"])
        return ModelSpec(_per_ball(m["radii"], n, "radii"), _per_ball(m["weights"], n, "weights"), vessel,
                         drift_scale=m["drift_scale"], masses=_per_ball(m["masses"], n, "masses"), d=m["d"])

    def plan(self, inertia: bool = False):
        from brownliq.experiments import ChainPlan

        p = self.data["plan"]
        return ChainPlan(sweeps=p["sweeps"], thin=p["thin"], burn_in=p["burn_in"],
                         approach_stages=p["approach_stages"], approach_sweeps=p["approach_sweeps"],
                         start_scale=p["start_scale"] or None, replicas=self.data["replicas"],
                         jobs=self.data["jobs"], inertia=inertia, backend=self.backend)


def _per_ball(val, n, name):
    arr = np.atleast_1d(np.asarray(val, dtype=float))
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise ConfigError(f"model.{name} has {arr.size} entries but N = {n}")
    return arr


def validate(data: dict) -> None:
    """Cross-field checks with actionable messages."""
    if data["jobs"] < 1 or data["replicas"] < 1:
        raise ConfigError("jobs and replicas must be >= 1")
    if data["backend"] not in ("auto", "cython", "python"):
        raise ConfigError("backend must be 'auto', 'cython' or 'python'")
    m = data["model"]
    if m["N"] < 1 or m["d"] < 2:
        raise ConfigError("model.N must be >= 1 and model.d >= 2")
    if m["vessel"]["kind"] != "half_cylinder":
        raise ConfigError("model.vessel.kind must be 'half_cylinder' (graph vessels need code, not config)")
    for name in ("radii", "weights", "masses"):
        arr = _per_ball(m[name], m["N"], name)
        if np.any(arr <= 0):
            raise ConfigError(f"model.{name} must be positive")
    if not m["drift_scale"] > 0 or not m["vessel"]["half_width"] > 0:
        raise ConfigError("model.drift_scale and model.vessel.half_width must be positive")
    if float(_per_ball(m["radii"], m["N"], "radii").max()) >= m["vessel"]["half_width"]:
        raise ConfigError("every radius must be below model.vessel.half_width")
    bi = data["sampler"]["burn_in"]
    if not (bi == "auto" or (isinstance(bi, int) and bi >= 0)):
        raise ConfigError("sampler.burn_in must be 'auto' or a non-negative integer")
    arch = data["experiment"]["archimedes"]
    if not 0 < arch["rho"] < 0.5:
        raise ConfigError(f"experiment.archimedes.rho = {arch['rho']} must lie in (0, 1/2)")
    pre = arch["rho"] ** 2 * arch["N"] * math.sqrt(12.0)
    if not pre > 2 - math.pi / 4:
        raise ConfigError(f"experiment.archimedes: rho^2 N sqrt(12) = {pre:.4f} must exceed "
                          f"2 - pi/4 = {2 - math.pi / 4:.4f}; raise N or rho")
    if arch["mode"] not in ("float", "sink"):
        raise ConfigError("experiment.archimedes.mode must be 'float' or 'sink'")
    if arch["m1"] < 1:
        raise ConfigError("experiment.archimedes.m1 must be >= 1")


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (a nested
    dict, typically built from flags)."""
    data = copy.deepcopy(DEFAULTS)
    if path is not None:
        data = _merge(data, load_file(path))
    if overrides:
        data = _merge(data, overrides)
    validate(data)
    return RunConfig(data)

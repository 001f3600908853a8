"""Time-stepped reflected Brownian motion with drift.

Each step is Euler-Maruyama for the free motion followed by an iterative
projection back onto the valid set, which stands in for the reflection
term.  Overlapping pairs are resolved deepest first by pushing the two
centers apart along their center line; walls by the minimal push back
inside.

Inertia mode simulates the process whose coordinates scaled by the masses,
``m_k * x[k]``, are a normally reflected Brownian motion with drift
``-a_k m_k``.  In original coordinates ball ``k`` has noise ``1/m_k`` and
drift ``-a_k``, and a pair push splits as ``(1/m_j) : (1/m_k)`` in the
scaled coordinates.  The loop works in original coordinates with the
equivalent mobilities ``1/m_k**2``, which keeps the geometry exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from brownliq import kernels
from brownliq.configuration import Configuration, ModelSpec, is_valid, weighted_cm
from brownliq.geometry import HalfCylinder
from brownliq.records import Snapshot
from brownliq.sampler import make_rng

MAX_NOISE_DOUBLES = 1 << 21


class ProjectionError(RuntimeError):
    def __init__(self, message, cfg=None, step=None):
        super().__init__(message)
        self.cfg = cfg
        self.step = step


@dataclass(frozen=True)
class DynamicsParams:
    dt: float | None = None
    projection_tol: float = 1e-10
    max_projection_iters: int = 1000
    inertia_mode: bool = False
    max_retries: int = 4

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.projection_tol < 0:
            raise ValueError("projection_tol must be >= 0")
        if self.max_projection_iters < 1:
            raise ValueError("max_projection_iters must be >= 1")

    def resolved_dt(self, spec: ModelSpec) -> float:
        return self.dt if self.dt is not None else 1e-4 * float(spec.radii.min()) ** 2


def _coefficients(spec: ModelSpec, inertia: bool):
    if not isinstance(spec.vessel, HalfCylinder):
        raise NotImplementedError("the projection scheme needs a HalfCylinder vessel")
    if inertia:
        m = spec.masses
        return spec.drifts, 1.0 / m**2, 1.0 / m
    one = np.ones(spec.n)
    return spec.drifts, one, one


def inertia_transform(spec: ModelSpec, cfg: Configuration, direction: str = "forward") -> Configuration:
    """Scale ball ``k``'s center by ``m_k`` (``forward``) or ``1/m_k`` (``inverse``)."""
    m = spec.masses[:, None]
    if direction == "forward":
        return Configuration(cfg.centers * m)
    if direction == "inverse":
        return Configuration(cfg.centers / m)
    raise ValueError("direction must be 'forward' or 'inverse'")


def project(spec: ModelSpec, cfg: Configuration, params: DynamicsParams = DynamicsParams(),
            backend: str | None = None) -> tuple[Configuration, int]:
    """Projection alone (no noise, no drift); returns the result and passes used."""
    _, mob, _ = _coefficients(spec, params.inertia_mode)
    x = np.ascontiguousarray(cfg.centers, dtype=float).copy()
    used = kernels.get(backend).project(x, spec.radii, mob, spec.vessel.half_width,
                                        params.projection_tol, params.max_projection_iters)
    if used < 0:
        raise ProjectionError("projection did not converge", Configuration(x))
    return Configuration(x), used


def _run_steps(spec, x, params, dt, n_steps, rng, backend):
    drifts, mob, sig = _coefficients(spec, params.inertia_mode)
    kern = kernels.get(backend)
    per = max(1, MAX_NOISE_DOUBLES // (spec.n * spec.d))
    info = np.array([-1, 0], dtype=np.int64)
    empty = np.zeros((0, spec.n, spec.d))
    done = 0
    while done < n_steps:
        m = min(per, n_steps - done)
        noise = rng.standard_normal((m, spec.n, spec.d))
        kern.em_run(x, spec.radii, drifts, mob, sig, dt, noise, spec.vessel.half_width,
                    params.projection_tol, params.max_projection_iters, 0, empty, info)
        if info[0] >= 0:
            return False
        done += m
    return True


def em_step(spec: ModelSpec, cfg: Configuration, params: DynamicsParams, rng: np.random.Generator,
            backend: str | None = None) -> Configuration:
    """One Euler-Maruyama step plus projection."""
    x = np.ascontiguousarray(cfg.centers, dtype=float).copy()
    if not _run_steps(spec, x, params, params.resolved_dt(spec), 1, rng, backend):
        raise ProjectionError("projection did not converge; retry with a smaller dt", Configuration(x))
    return Configuration(x)


@dataclass
class DynamicsRun:
    snapshots: list
    final: Configuration
    dt: float
    retries: int = 0
    halvings: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def series(self, name: str = "wcm") -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])


def _snapshot(spec, x, t, dt):
    return Snapshot(t, weighted_cm(spec, Configuration(x)), float(np.max(x[:, 0] + spec.radii)), x.copy(),
                    clock="t", extra={"engine": "dynamics", "dt": dt})


def simulate(spec: ModelSpec, init: Configuration, params: DynamicsParams, T: float,
             observe_every: float, seed=0, backend: str | None = None) -> DynamicsRun:
    """Integrate to time ``T``, emitting a snapshot every ``observe_every``.

    A block whose projection fails is redone from its start with the step
    halved, up to ``params.max_retries`` times.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if not is_valid(spec, init, params.projection_tol):
        raise ValueError("initial configuration is not valid")
    rng = make_rng(seed)
    dt = params.resolved_dt(spec)
    per_obs = max(1, int(round(observe_every / dt)))
    n_obs = int(math.floor(T / (per_obs * dt) + 1e-9))
    x = np.ascontiguousarray(init.centers, dtype=float).copy()
    snaps = [_snapshot(spec, x, 0.0, dt)]
    halvings = []
    for i in range(n_obs):
        start = x.copy()
        for attempt in range(params.max_retries + 1):
            h = dt / 2**attempt
            x[:] = start
            if _run_steps(spec, x, params, h, per_obs * 2**attempt, rng, backend):
                break
            halvings.append((i, attempt + 1))
        else:
            raise ProjectionError(f"projection failed after {params.max_retries} halvings",
                                  Configuration(x), step=i)
        snaps.append(_snapshot(spec, x, (i + 1) * per_obs * dt, dt))
    return DynamicsRun(snaps, Configuration(x), dt, len(halvings), halvings)

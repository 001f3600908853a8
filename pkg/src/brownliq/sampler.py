"""Metropolis sampler for the stationary law of hard balls with drift.

The target density on the configuration space is proportional to
``exp(-2 * sum_k a_k * x1[k])`` restricted to valid configurations.  It
factorizes over balls, so a single-ball move only needs the change in that
ball's height.  Proposals are isotropic Gaussians; invalid proposals are
rejected outright, which keeps detailed balance exact for the hard-core
indicator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from brownliq import kernels
from brownliq.configuration import Configuration, ModelSpec, is_valid, weighted_cm
from brownliq.geometry import GraphDomain, HalfCylinder
from brownliq.records import Snapshot

TARGET_ACCEPTANCE = 0.3
MIN_BURN_IN = 1000
MAX_CHUNK_STEPS = 1 << 18


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox); ``seed`` may be an int or SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def replica_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


@dataclass
class ChainState:
    cfg: Configuration
    rng: np.random.Generator
    step_scale: np.ndarray
    accepted: np.ndarray
    proposed: np.ndarray
    sweeps: int = 0
    seed: int | None = None
    best_wcm: float = math.inf
    best_cfg: Configuration | None = None

    @property
    def acceptance_rate(self) -> float:
        p = int(self.proposed.sum())
        return int(self.accepted.sum()) / p if p else float("nan")


def new_chain(spec: ModelSpec, cfg: Configuration, seed=0, step_scale=None) -> ChainState:
    if not is_valid(spec, cfg):
        raise ValueError("initial configuration is not valid")
    steps = spec.radii.copy() if step_scale is None else np.broadcast_to(
        np.asarray(step_scale, dtype=float), spec.radii.shape).copy()
    if np.any(steps <= 0):
        raise ValueError("step scales must be positive")
    n = spec.n
    return ChainState(cfg.copy(), make_rng(seed), steps, np.zeros(n, np.int64), np.zeros(n, np.int64),
                      seed=seed if isinstance(seed, (int, np.integer)) else None,
                      best_wcm=weighted_cm(spec, cfg), best_cfg=cfg.copy())


def log_target_ratio(spec: ModelSpec, k, old_center, new_center, inertia: bool = False):
    """Log density ratio for moving ball ``k`` from ``old_center`` to ``new_center``.

    Broadcasts: ``k`` may be an index array and the centers arrays of
    shape ``(..., d)``, in which case an array of ratios is returned.
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr >= spec.n):
        raise IndexError(f"object index {k} out of range")
    a = spec.effective_drifts(inertia)[k_arr]
    old = np.asarray(old_center, dtype=float)
    new = np.asarray(new_center, dtype=float)
    out = -2.0 * a * (new[..., 0] - old[..., 0])
    return float(out) if np.ndim(out) == 0 else out


def _kernel_args(spec: ModelSpec, inertia: bool):
    v = spec.vessel
    if not isinstance(v, HalfCylinder):
        return None
    small = spec.radii[spec.radii <= np.median(spec.radii) * 1.0000001]
    cell = 2.0 * float(small.max())
    return v.half_width, cell, spec.effective_drifts(inertia)


def _advance(spec: ModelSpec, state: ChainState, n_steps: int, rec_every: int = 0,
             inertia: bool = False, backend: str | None = None):
    """Run ``n_steps`` single-ball steps; returns recorded centers and wcm."""
    n, d = spec.n, spec.d
    n_rec = n_steps // rec_every if rec_every > 0 else 0
    rec_centers = np.zeros((n_rec, n, d))
    rec_wcm = np.zeros(n_rec)
    if n_steps == 0:
        return rec_centers, rec_wcm
    kargs = _kernel_args(spec, inertia)
    kern = kernels.get(backend) if kargs is not None else None
    centers = np.ascontiguousarray(state.cfg.centers, dtype=float)
    stats = np.array([weighted_cm(spec, state.cfg), state.best_wcm])
    best = np.ascontiguousarray(state.best_cfg.centers if state.best_cfg is not None else centers).copy()
    chunk = MAX_CHUNK_STEPS if rec_every <= 0 else rec_every * max(1, MAX_CHUNK_STEPS // rec_every)
    done = 0
    filled = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        ks = state.rng.integers(0, n, size=m, dtype=np.int64)
        noise = state.rng.standard_normal((m, d))
        with np.errstate(divide="ignore"):
            logu = np.log(state.rng.random(m))
        k_rec = m // rec_every if rec_every > 0 else 0
        if kern is not None:
            got = kern.mh_run(centers, spec.radii, kargs[2], spec.weights, state.step_scale, kargs[0], kargs[1],
                              ks, noise, logu, state.accepted, state.proposed, rec_every,
                              rec_centers[filled:filled + k_rec], rec_wcm[filled:filled + k_rec], best, stats)
        else:
            got = _generic_run(spec, centers, ks, noise, logu, state, rec_every,
                               rec_centers[filled:filled + k_rec], rec_wcm[filled:filled + k_rec], best, stats,
                               inertia)
        filled += got
        done += m
    state.cfg = Configuration(centers)
    state.best_wcm = float(stats[1])
    state.best_cfg = Configuration(best)
    return rec_centers, rec_wcm


def _generic_run(spec, centers, ks, noise, logu, state, rec_every, rec_centers, rec_wcm, best, stats, inertia):
    """Vessel-agnostic Python loop (graph-shaped vessels)."""
    from brownliq.geometry import NeighborGrid

    radii = spec.radii
    drifts = spec.effective_drifts(inertia)
    grid = NeighborGrid.build(centers, radii)
    wcm, best_w = float(stats[0]), float(stats[1])
    nrec = 0
    for t in range(ks.shape[0]):
        k = int(ks[t])
        state.proposed[k] += 1
        new = centers[k] + state.step_scale[k] * noise[t]
        ok = spec.vessel.contains_ball(new, radii[k])
        if ok:
            for j in grid.query(new, radii[k]):
                if j != k:
                    diff = new - grid.centers[j]
                    reach = radii[k] + radii[j]
                    if float(diff @ diff) < reach * reach:
                        ok = False
                        break
        if ok:
            dx1 = new[0] - centers[k, 0]
            lr = -2.0 * drifts[k] * dx1
            if lr >= 0.0 or logu[t] < lr:
                centers[k] = new
                grid.move(k, new)
                state.accepted[k] += 1
                wcm += spec.weights[k] * dx1
                if wcm < best_w:
                    best_w = wcm
                    best[:, :] = centers
        if rec_every > 0 and (t + 1) % rec_every == 0:
            rec_centers[nrec] = centers
            rec_wcm[nrec] = wcm
            nrec += 1
    stats[0], stats[1] = wcm, best_w
    return nrec


def mh_step(spec: ModelSpec, state: ChainState, inertia: bool = False, backend: str | None = None) -> ChainState:
    """One Metropolis step on a uniformly chosen ball, in place."""
    _advance(spec, state, 1, 0, inertia, backend)
    return state


def _adapt(state: ChainState, acc0, prop0, gain: float, radii: np.ndarray, cap: float):
    dacc = state.accepted - acc0
    dprop = state.proposed - prop0
    seen = dprop > 0
    rate = np.where(seen, dacc / np.maximum(dprop, 1), TARGET_ACCEPTANCE)
    state.step_scale = np.clip(state.step_scale * np.exp(gain * (rate - TARGET_ACCEPTANCE)),
                               1e-9 * radii, cap)


def _step_cap(spec: ModelSpec) -> float:
    v = spec.vessel
    if isinstance(v, HalfCylinder):
        return 2.0 * v.half_width
    return 10.0 * float(spec.radii.max())


def burn(spec: ModelSpec, state: ChainState, sweeps: int, adapt: bool = True, inertia: bool = False,
         backend: str | None = None, adapt_every: int = 10, record: bool = False):
    """Burn-in sweeps with Robbins-Monro tuning of log step scales.

    Returns the per-sweep wcm trace when ``record`` is set (pilot runs).
    """
    trace = []
    block = max(1, adapt_every)
    cap = _step_cap(spec)
    done = 0
    i = 0
    while done < sweeps:
        b = min(block, sweeps - done)
        acc0, prop0 = state.accepted.copy(), state.proposed.copy()
        _, w = _advance(spec, state, b * spec.n, spec.n if record else 0, inertia, backend)
        trace.extend(w.tolist())
        if adapt:
            _adapt(state, acc0, prop0, 1.0 / (1.0 + i) ** 0.6, spec.radii, cap)
        state.sweeps += b
        done += b
        i += 1
    return np.asarray(trace)


def estimate_burn_in(spec: ModelSpec, state: ChainState, inertia: bool = False, backend=None,
                     pilot: int = MIN_BURN_IN) -> int:
    """Pilot run (adapting); burn-in is ``max(MIN_BURN_IN, 20 * tau)`` sweeps."""
    trace = burn(spec, state, pilot, True, inertia, backend, record=True)
    half = trace[len(trace) // 2:]
    diag = integrated_autocorr(half) if len(half) >= 100 else {"tau": math.inf}
    tau = diag["tau"]
    if not math.isfinite(tau):
        return 10 * MIN_BURN_IN
    return max(MIN_BURN_IN, int(math.ceil(20 * tau)))


@dataclass
class ChainRun:
    snapshots: list
    state: ChainState
    burn_in: int
    thin: int

    def __iter__(self):
        return iter(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def series(self, name: str = "wcm") -> np.ndarray:
        return np.array([getattr(s, name) for s in self.snapshots])


def run_chain(spec: ModelSpec, init: Configuration | ChainState, sweeps: int, thin: int = 1,
              burn_in: int | str = "auto", seed=0, inertia: bool = False, adapt: bool = True,
              backend: str | None = None) -> ChainRun:
    """Burn in, then emit every ``thin``-th sweep as a :class:`Snapshot`.

    ``sweeps`` counts all sweeps including burn-in; one sweep is ``N``
    single-ball steps.  ``burn_in="auto"`` sizes burn-in from a pilot run.
    Step scales are frozen after burn-in, so the production chain is an
    exact Metropolis chain for the target.  Passing a :class:`ChainState`
    continues that chain (its RNG and tuned steps).
    """
    if thin < 1:
        raise ValueError("thin must be >= 1")
    state = init if isinstance(init, ChainState) else new_chain(spec, init, seed)
    if not isinstance(init, ChainState) and not is_valid(spec, state.cfg):
        raise ValueError("initial configuration is not valid")
    if burn_in == "auto":
        burn_in = estimate_burn_in(spec, state, inertia, backend)
        done = min(MIN_BURN_IN, burn_in)
        if burn_in > sweeps:
            raise ValueError(f"estimated burn-in {burn_in} exceeds sweeps {sweeps}")
        burn(spec, state, burn_in - done, adapt, inertia, backend)
    else:
        burn_in = int(burn_in)
        if burn_in > sweeps:
            raise ValueError("sweeps must be >= burn_in")
        burn(spec, state, burn_in, adapt, inertia, backend)
    prod = sweeps - burn_in
    start = state.sweeps
    centers, wcm = _advance(spec, state, prod * spec.n, thin * spec.n, inertia, backend)
    state.sweeps += prod
    snaps = []
    for i in range(centers.shape[0]):
        c = centers[i]
        snaps.append(Snapshot(start + (i + 1) * thin, float(np.dot(spec.weights, c[:, 0])),
                              float(np.max(c[:, 0] + spec.radii)), c))
    return ChainRun(snaps, state, burn_in, thin)


@dataclass
class AnnealResult:
    state: ChainState
    best_wcm: float
    best_cfg: Configuration
    stages: list = field(default_factory=list)


def anneal(spec: ModelSpec, schedule, sweeps_per_stage: int, init: Configuration | None = None,
           seed=0, inertia: bool = False, backend: str | None = None) -> AnnealResult:
    """Raise the drift scale stage by stage, carrying the configuration along.

    Every stage keeps tuning the step scales (this is optimization, not
    sampling).  The lowest-wcm configuration visited is tracked step by step.
    """
    schedule = [float(s) for s in schedule]
    if not schedule:
        raise ValueError("empty schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be increasing")
    rng = make_rng(seed)
    cfg = init if init is not None else initial_configuration(spec, rng)
    state = new_chain(spec.with_drift_scale(schedule[0]), cfg, seed)
    state.rng = rng
    stages = []
    for lam in schedule:
        sp = spec.with_drift_scale(lam)
        burn(sp, state, sweeps_per_stage, True, inertia, backend)
        stages.append((lam, weighted_cm(sp, state.cfg)))
    return AnnealResult(state, state.best_wcm, state.best_cfg, stages)


def integrated_autocorr(x, c: float = 5.0) -> dict:
    """Windowed integrated autocorrelation time.

    ``tau`` is the sum of autocorrelations at positive lags, truncated at
    the first window ``M >= c * (tau(M) + 1/2)``; ``ess = n / (2 tau + 1)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var <= 1e-300 * max(1.0, float(np.abs(x).max()) ** 2):
        return {"tau": math.inf, "ess": 0.0, "converged": False, "n": n}
    size = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acf = np.fft.irfft(f * np.conj(f), size)[:n] / (n * var)
    tau = 0.0
    for m in range(1, n):
        tau += acf[m]
        if m >= c * (tau + 0.5):
            break
    else:
        return {"tau": math.inf, "ess": 0.0, "converged": False, "n": n}
    tau = max(tau, 0.0)
    return {"tau": tau, "ess": n / (2 * tau + 1), "converged": True, "n": n}


def diagnostics(snapshots, observable: str = "wcm", state: ChainState | None = None) -> dict:
    """Autocorrelation time, ESS and acceptance rate of a snapshot stream."""
    if isinstance(snapshots, ChainRun):
        state = state or snapshots.state
        snapshots = snapshots.snapshots
    if len(snapshots) and isinstance(snapshots[0], Snapshot):
        x = [getattr(s, observable) for s in snapshots]
    else:
        x = snapshots
    out = integrated_autocorr(x)
    out["acceptance"] = state.acceptance_rate if state is not None else float("nan")
    return out


def initial_configuration(spec: ModelSpec, rng: np.random.Generator, max_attempts: int = 100_000) -> Configuration:
    """Sequential random insertion, largest balls first; honeycomb fallback."""
    n, d = spec.n, spec.d
    order = np.argsort(-spec.radii, kind="stable")
    rmax = float(spec.radii.max())
    v = spec.vessel
    if isinstance(v, HalfCylinder):
        cross = v.half_width
        base = 0.0
        vol = float(np.sum((2 * spec.radii) ** d))
        height = 2 * rmax + 2.0 * vol / (2 * cross) ** (d - 1)
    else:
        lo = np.array([b[0] for b in v.bounds])
        hi = np.array([b[1] for b in v.bounds])
        probe = lo + (hi - lo) * rng.random((256, d - 1))
        base = max(float(v.g(*p)) for p in probe)
        vol = float(np.sum((2 * spec.radii) ** d))
        height = 2 * rmax + 2.0 * vol / float(np.prod(hi - lo))
    centers = np.zeros((n, d))
    placed = []
    for k in order:
        r = spec.radii[k]
        for _ in range(max_attempts):
            p = np.empty(d)
            if isinstance(v, HalfCylinder):
                p[0] = r + (height - 2 * r) * rng.random()
                lim = cross - r
                while True:
                    q = (2 * rng.random(d - 1) - 1) * lim
                    if d == 2 or q @ q < lim * lim:
                        break
                p[1:] = q
            else:
                p[1:] = lo + (hi - lo) * rng.random(d - 1)
                p[0] = base + r + (height - 2 * r) * rng.random()
            if not v.contains_ball(p, r):
                continue
            if placed:
                idx = np.array(placed)
                diff = centers[idx] - p
                if np.any(np.einsum("ij,ij->i", diff, diff) < (spec.radii[idx] + r) ** 2):
                    continue
            centers[k] = p
            placed.append(k)
            break
        else:
            return _lattice_fallback(spec)
    return Configuration(centers)


def _lattice_fallback(spec: ModelSpec) -> Configuration:
    from brownliq.packing import HoneycombSpec, honeycomb_in_region, lowest_n
    from brownliq.geometry import Box

    if spec.d != 2 or not isinstance(spec.vessel, HalfCylinder):
        raise RuntimeError("random insertion failed and no lattice fallback exists for this vessel")
    rho = float(spec.radii.max()) * (1 + 1e-9)
    w = spec.vessel.half_width
    rows = int(math.ceil(spec.n / max(1, int(w / rho)))) + 2
    region = Box((0.0, -w), (2 * rho * rows * 2 + 2 * rho, w))
    sites = honeycomb_in_region(HoneycombSpec(rho, anchor=(rho * (1 + 1e-9), 0.0)), region, None)
    if len(sites) < spec.n:
        raise RuntimeError("vessel too narrow for a lattice start")
    return Configuration(lowest_n(sites, spec.n))

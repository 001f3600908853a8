"""Drivers that turn the limit statements about the model into measured
frequencies at finite drift.

Every experiment runs one or more Metropolis chains per parameter value,
evaluates a binary event on each retained snapshot, and reports the event
frequency with a Wilson score interval whose sample size is replaced by the
effective sample size.  The limit statements give no finite-size numbers,
so the thresholds an experiment asserts against are parameters of the
experiment and are recorded in the report.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize

from brownliq.configuration import Configuration, ModelSpec, can_translate_down, ordering_violations
from brownliq.geometry import GraphDomain, HalfCylinder
from brownliq.records import write_csv
from brownliq.sampler import (ChainState, burn, initial_configuration, integrated_autocorr, make_rng,
                              new_chain, run_chain)

Z95 = 1.959963984540054
ARCHIMEDES_CRITICAL = math.pi / (4.0 * math.sqrt(12.0))
ARCHIMEDES_PRECONDITION = 2.0 - math.pi / 4.0
MIN_ESS = 100.0


def wilson_interval(successes: int, n: int, ess: float | None = None, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    The point estimate is ``successes / n``; the interval width uses
    ``min(n, ess)`` samples, so autocorrelated chains get wider intervals.
    With no effective samples the interval is ``(0, 1)``.
    """
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    m = float(n) if ess is None else min(float(n), float(ess))
    if m <= 0:
        return 0.0, 1.0
    z2 = z * z
    centre = (p + z2 / (2 * m)) / (1 + z2 / m)
    half = z * math.sqrt(p * (1 - p) / m + z2 / (4 * m * m)) / (1 + z2 / m)
    return max(0.0, centre - half), min(1.0, centre + half)


def effective_size(*series) -> float:
    """Smallest ESS over the given series.

    A series that never varies carries no autocorrelation information and
    is skipped (a binary event that always holds, for instance); if every
    series is constant the plain length is returned.  Series too short or
    too correlated for a windowed estimate count as zero.
    """
    vals = []
    n = 0
    for s in series:
        s = np.asarray(s, dtype=float)
        n = max(n, s.shape[0])
        if s.shape[0] and np.all(s == s[0]):
            continue
        if s.shape[0] < 100:
            vals.append(0.0)
            continue
        diag = integrated_autocorr(s)
        vals.append(diag["ess"] if diag["converged"] else 0.0)
    return float(min(vals)) if vals else float(n)


@dataclass
class EventRow:
    """Frequency of one event at one parameter value, pooled over replicas."""

    setting: float
    event: str
    successes: int
    n: int
    ess: float

    @property
    def probability(self) -> float:
        return self.successes / self.n if self.n else float("nan")

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.n, self.ess)

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {"setting": self.setting, "event": self.event, "successes": self.successes, "n": self.n,
                "ess": self.ess, "probability": self.probability, "ci_low": lo, "ci_high": hi}


@dataclass
class ExperimentReport:
    """Outcome of an experiment.

    ``rows`` holds one :class:`EventRow` per (setting, event); ``samples``
    holds flat per-snapshot columns (``setting``, ``replica``, ``index`` and
    the observables) for the CSV export.  ``checks`` records each asserted
    condition by name, and ``passed`` is their conjunction.
    """

    name: str
    spec: dict
    seed: int
    params: dict
    rows: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def row(self, event: str, setting: float | None = None) -> EventRow:
        rows = [r for r in self.rows if r.event == event and (setting is None or r.setting == setting)]
        if not rows:
            raise KeyError(f"no row for event {event!r} at setting {setting!r}")
        return rows[-1]

    def probabilities(self, event: str) -> list[float]:
        return [r.probability for r in self.rows if r.event == event]

    @property
    def sample_count(self) -> int:
        return max((r.n for r in self.rows), default=0)

    @property
    def ess(self) -> float:
        return min((r.ess for r in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {"name": self.name, "spec": self.spec, "seed": self.seed, "params": self.params,
                "sample_count": self.sample_count, "ess": self.ess,
                "rows": [r.to_dict() for r in self.rows], "checks": self.checks,
                "flags": self.flags, "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, outdir) -> tuple[Path, Path]:
        """Write ``<name>_report.json`` and ``<name>_samples.csv``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        jpath = outdir / f"{self.name}_report.json"
        jpath.write_text(self.to_json() + "\n", encoding="utf-8")
        cpath = outdir / f"{self.name}_samples.csv"
        cols = list(self.samples)
        rows = zip(*(self.samples[c] for c in cols)) if cols else []
        write_csv(cpath, cols, rows)
        return jpath, cpath


def monotone_with_overlap(rows, allowed: int = 1) -> bool:
    """Frequencies non-decreasing along ``rows``, except for at most
    ``allowed`` decreases whose 95% intervals overlap."""
    misses = 0
    for a, b in zip(rows, rows[1:]):
        if b.probability >= a.probability:
            continue
        if b.interval[1] < a.interval[0]:
            return False
        misses += 1
    return misses <= allowed


# ---------------------------------------------------------------------------
# chain fan-out


@dataclass(frozen=True)
class ChainPlan:
    """How each replica chain is run at each drift scale.

    Drift scales are visited in increasing order by a single chain per
    replica.  Before sampling at scale ``lam`` the chain is carried up from
    the previous scale (or from ``start_scale`` for the first) through
    ``approach_stages`` geometric stages of ``approach_sweeps`` adapting
    sweeps each, so dense states are reached by slow compression rather than
    by a quench.  With ``restart=True`` every scale instead starts afresh
    from the initial configuration (no approach stages); this is the way to
    reach a crystalline ground state, which slow compression of a fluid
    misses by freezing in defects.  Then ``burn_in`` adapting sweeps and
    ``sweeps`` production sweeps (thinned by ``thin``) follow.
    """

    sweeps: int = 20_000
    thin: int = 10
    burn_in: int = 2_000
    approach_stages: int = 8
    approach_sweeps: int = 500
    start_scale: float | None = None
    restart: bool = False
    replicas: int = 1
    jobs: int = 1
    inertia: bool = False
    backend: str | None = None

    def __post_init__(self):
        if self.sweeps < 1 or self.thin < 1 or self.replicas < 1 or self.jobs < 1:
            raise ValueError("sweeps, thin, replicas and jobs must be >= 1")
        if self.burn_in < 0 or self.approach_stages < 0 or self.approach_sweeps < 0:
            raise ValueError("burn_in and approach settings must be >= 0")

    def echo(self) -> dict:
        return {k: getattr(self, k) for k in ("sweeps", "thin", "burn_in", "approach_stages", "approach_sweeps",
                                              "start_scale", "restart", "replicas", "inertia")}


def _replica(spec: ModelSpec, scales, plan: ChainPlan, seed_seq, observe, observe_kw, init):
    scales = [float(s) for s in scales]
    rng = make_rng(seed_seq)
    start = plan.start_scale if plan.start_scale is not None else scales[0] / 100.0
    sp0 = spec.with_drift_scale(min(start, scales[0]))
    cfg = init if init is not None else initial_configuration(sp0, rng)
    state: ChainState = new_chain(sp0, cfg, seed_seq)
    state.rng = rng
    prev = sp0.drift_scale
    out = []
    for lam in scales:
        if plan.restart:
            state = new_chain(spec.with_drift_scale(lam), cfg, seed_seq)
            state.rng = rng
        elif plan.approach_stages and lam > prev:
            for s in np.geomspace(prev, lam, plan.approach_stages + 1)[1:]:
                burn(spec.with_drift_scale(s), state, plan.approach_sweeps, True, plan.inertia, plan.backend)
        sp = spec.with_drift_scale(lam)
        run = run_chain(sp, state, plan.burn_in + plan.sweeps, plan.thin, plan.burn_in, inertia=plan.inertia,
                        backend=plan.backend)
        state = run.state
        obs = observe(sp, run.snapshots, **observe_kw)
        obs["acceptance"] = state.acceptance_rate
        out.append(obs)
        prev = lam
    return out


def run_replicas(spec: ModelSpec, scales, plan: ChainPlan, seed: int, observe, observe_kw=None, init=None):
    """Run ``plan.replicas`` chains over ``scales``; returns
    ``results[replica][scale_index] -> dict`` of observables.

    Replica ``i`` uses the ``i``-th child of ``SeedSequence(seed)``, so the
    result does not depend on ``plan.jobs``.
    """
    children = np.random.SeedSequence(seed).spawn(plan.replicas)
    kw = observe_kw or {}
    if plan.jobs > 1 and plan.replicas > 1:
        with ProcessPoolExecutor(max_workers=min(plan.jobs, plan.replicas)) as ex:
            futs = [ex.submit(_replica, spec, scales, plan, c, observe, kw, init) for c in children]
            return [f.result() for f in futs]
    return [_replica(spec, scales, plan, c, observe, kw, init) for c in children]


def _pool(results, scale_index: int, key: str) -> list[np.ndarray]:
    return [np.asarray(rep[scale_index][key]) for rep in results]


def _event_row(results, i: int, setting: float, event: str, primary: str) -> EventRow:
    hits = _pool(results, i, event)
    prim = _pool(results, i, primary)
    succ = int(sum(int(h.sum()) for h in hits))
    n = int(sum(h.shape[0] for h in hits))
    ess = float(sum(effective_size(p, h) for p, h in zip(prim, hits)))
    return EventRow(float(setting), event, succ, n, ess)


def _sample_columns(results, scales, keys) -> dict:
    cols = {"setting": [], "replica": [], "index": []}
    for k in keys:
        cols[k] = []
    for r, rep in enumerate(results):
        for i, lam in enumerate(scales):
            m = len(rep[i]["index"])
            cols["setting"].extend([float(lam)] * m)
            cols["replica"].extend([r] * m)
            cols["index"].extend(rep[i]["index"])
            for k in keys:
                cols[k].extend(np.asarray(rep[i][k]).tolist())
    return cols


def _flag_ess(report: ExperimentReport, min_ess: float):
    for r in report.rows:
        if r.ess < min_ess:
            report.flags.append(f"low ESS {r.ess:.1f} < {min_ess:g} for {r.event} at {r.setting:g}")


# ---------------------------------------------------------------------------
# vessel integrability


@dataclass
class VesselCheck:
    b0_found: bool
    b0: float | None
    condition_holds: bool
    table: list
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"b0_found": self.b0_found, "b0": self.b0, "condition_holds": self.condition_holds,
                "table": self.table, "notes": self.notes}


RESOLVED_CELLS = 10


class _GraphSections:
    """Section measures ``|{y : g(y) < b}|`` of a graph vessel over its
    declared bounds.

    ``g`` is evaluated once on a node grid.  In the planar case the edges
    of each section are located between nodes by root finding, so sections
    spanning a few cells are measured to rounding accuracy; in higher
    dimensions a midpoint rule is used.  A section counts as resolved once
    it covers at least ``RESOLVED_CELLS`` grid cells.
    """

    def __init__(self, v: GraphDomain, nodes: int):
        self.v = v
        self.planar = len(v.bounds) == 1
        if self.planar:
            lo, hi = v.bounds[0]
            self.y = np.linspace(lo, hi, nodes + 1)
            self.cell = (hi - lo) / nodes
            self.gv = np.array([float(v.g(t)) for t in self.y])
        else:
            axes = [lo + (hi - lo) * (np.arange(nodes) + 0.5) / nodes for lo, hi in v.bounds]
            self.cell = float(np.prod([(hi - lo) / nodes for lo, hi in v.bounds]))
            self.gv = np.vectorize(v.g)(*np.meshgrid(*axes, indexing="ij"))

    def measure(self, b: float) -> tuple[float, bool, bool]:
        """``(measure, resolved, fills_bounds)`` at height ``b``."""
        inside = self.gv < b
        if not self.planar:
            cnt = int(inside.sum())
            return cnt * self.cell, cnt >= RESOLVED_CELLS, bool(inside.all())
        total = self.cell * float(np.sum(inside[:-1] & inside[1:]))
        g = self.v.g
        for i in np.flatnonzero(inside[:-1] != inside[1:]):
            t = optimize.brentq(lambda y: float(g(y)) - b, self.y[i], self.y[i + 1], xtol=1e-14 * self.cell)
            total += (t - self.y[i]) if inside[i] else (self.y[i + 1] - t)
        return total, total >= RESOLVED_CELLS * self.cell, bool(inside.all())


def check_vessel(vessel, a: float, b_max: float | None = None, grid: int = 200, d: int = 2,
                 tol: float = 1e-8) -> VesselCheck:
    """Integrability check ``|D_b| exp(-2 a b) -> 0`` on horizontal sections.

    ``|D_b|`` is exact for a :class:`HalfCylinder`.  For a
    :class:`GraphDomain` it is computed over the declared bounds with
    ``grid`` nodes per cross coordinate (``20 * grid`` in the planar case,
    where section edges are root-found).  The product is tabulated at
    ``grid`` heights up to ``b_max`` (default ``25 / a``, where
    ``exp(-2ab)`` is about ``2e-22``).  The condition holds when the
    resolved part of the second half of the table is non-increasing and the
    last value is below ``tol``.  ``b0`` is the first tabulated height with
    a non-empty section.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    b_max = 25.0 / a if b_max is None else float(b_max)
    if not b_max > 0:
        raise ValueError("b_max must be positive")
    bs = np.linspace(0.0, b_max, grid + 1)[1:]
    table = []
    resolved = []
    saturated = False
    if isinstance(vessel, GraphDomain):
        sections = _GraphSections(vessel, 20 * grid if len(vessel.bounds) == 1 else grid)
    elif not isinstance(vessel, HalfCylinder):
        raise TypeError(f"unsupported vessel {type(vessel).__name__}")
    for b in bs:
        if isinstance(vessel, HalfCylinder):
            m, ok = vessel.section_measure(b, d), True
        else:
            m, ok, full = sections.measure(b)
            saturated = saturated or full
        table.append((float(b), float(m), float(m * math.exp(-2 * a * b))))
        resolved.append(ok)
    notes = []
    prods = np.array([t[2] for t in table])
    nonempty = [t[0] for t in table if t[1] > 0]
    half = len(prods) // 2
    tail = prods[half:][np.asarray(resolved[half:])]
    if len(tail) < 3:
        decreasing = False
        notes.append("too few resolved sections in the upper half of the table; refine grid or widen b_max")
    else:
        decreasing = bool(np.all(np.diff(tail) <= 1e-300 + 1e-12 * np.abs(tail[:-1])))
        if len(tail) < len(prods) - half:
            notes.append(f"{len(prods) - half - len(tail)} sections in the upper half are below grid resolution "
                         "and were left out of the monotonicity check")
    small = bool(prods[-1] < tol)
    if not small:
        notes.append(f"product {prods[-1]:.3e} at b_max={b_max:g} not below {tol:g}: increase b_max "
                     "or the section grows too fast")
    if not decreasing:
        notes.append("product not eventually decreasing on the tabulated range")
    if saturated:
        notes.append("sections fill the declared bounds box; measures beyond it are truncated")
    return VesselCheck(bool(nonempty), nonempty[0] if nonempty else None, decreasing and small, table, notes)


# ---------------------------------------------------------------------------
# concentration and surface


def _obs_wcm(spec, snaps, c1: float, deltas: dict):
    wcm = np.array([s.wcm for s in snaps])
    out = {"index": [s.index for s in snaps], "wcm": wcm, "surface": np.array([s.surface for s in snaps])}
    for name, dlt in deltas.items():
        out[name] = wcm < c1 + dlt
    return out


def _resolve_c1(spec: ModelSpec, c1, seed: int, need_cfg: bool) -> tuple[float, str, Configuration | None]:
    """``c1`` with its provenance and, if ``need_cfg``, a configuration at
    (or near) the infimum."""
    if spec.n == 1 and isinstance(spec.vessel, HalfCylinder):
        ground = np.zeros((1, spec.d))
        ground[0, 0] = spec.radii[0] * (1 + 1e-9)
        exact = float(spec.weights[0] * spec.radii[0])
        return (exact, "exact") if c1 is None else (float(c1), "given"), Configuration(ground)
    if c1 is not None and not need_cfg:
        return (float(c1), "given"), None
    from brownliq.packing import c1_estimate

    est = c1_estimate(spec, seed=seed)
    if c1 is not None:
        return (float(c1), "given"), est.argmin
    return (est.value, "c1_estimate"), est.argmin


def _start_cfg(start: str, ground):
    if start == "optimum":
        return ground
    if start == "fluid":
        return None
    raise ValueError("start must be 'optimum' or 'fluid'")


def concentration_experiment(spec: ModelSpec, b_list, eps: float, c1: float | None = None,
                             threshold: float = 0.9, plan: ChainPlan = ChainPlan(), seed: int = 0,
                             allowed_dips: int = 1, start: str = "fluid") -> ExperimentReport:
    """Frequency of ``2 x . v1 > c0 - eps`` along drift scales ``b_list``.

    ``v1`` is the drift at unit scale, so ``2 x . v1 = -2 wcm`` and
    ``c0 = -2 c1`` with ``c1`` the infimum of the weighted center of mass;
    the event is therefore ``wcm < c1 + eps / 2``.  ``c1`` is exact for a
    single ball and estimated by annealing otherwise.  ``start`` picks the
    initial state: ``"fluid"`` (random insertion, then slow compression
    across scales) or ``"optimum"`` (every scale restarts from a
    configuration attaining the ``c1`` estimate).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    b_list = sorted(float(b) for b in b_list)
    if not b_list or b_list[0] <= 0:
        raise ValueError("b_list must contain positive drift scales")
    (c1v, how), ground = _resolve_c1(spec, c1, seed, start == "optimum")
    init = _start_cfg(start, ground)
    plan = replace(plan, restart=plan.restart or init is not None)
    res = run_replicas(spec, b_list, plan, seed, _obs_wcm, {"c1": c1v, "deltas": {"concentrated": eps / 2}},
                       init=init)
    rep = ExperimentReport("concentration", spec.echo(), seed,
                           {"b_list": b_list, "eps": eps, "c1": c1v, "c1_source": how, "c0": -2 * c1v,
                            "threshold": threshold, "start": start, "plan": plan.echo()})
    rep.rows = [_event_row(res, i, b, "concentrated", "wcm") for i, b in enumerate(b_list)]
    rep.samples = _sample_columns(res, b_list, ["wcm", "surface", "concentrated"])
    _flag_ess(rep, MIN_ESS)
    rep.checks["monotone"] = monotone_with_overlap(rep.rows, allowed_dips)
    rep.checks["final_above_threshold"] = rep.rows[-1].probability >= threshold
    return rep


def _all_k_blocked(spec: ModelSpec, centers: np.ndarray, delta: float) -> np.ndarray:
    cfg = Configuration(centers)
    return np.array([can_translate_down(spec, cfg, k, delta) is None for k in range(spec.n)])


def _obs_surface(spec, snaps, c1: float, delta: float, hole_stride: int):
    out = _obs_wcm(spec, snaps, c1, {"near_infimum": delta})
    hole_idx = list(range(0, len(snaps), hole_stride)) if hole_stride else []
    if hole_idx:
        blocked = np.array([_all_k_blocked(spec, snaps[i].centers, delta) for i in hole_idx])
        out["hole_index"] = [snaps[i].index for i in hole_idx]
        out["no_room"] = blocked.all(axis=1)
        out["no_room_per_k"] = blocked.mean(axis=0)
    return out


def surface_experiment(spec: ModelSpec, delta: float, lam_list, c1: float | None = None, threshold: float = 0.9,
                       plan: ChainPlan = ChainPlan(), seed: int = 0, hole_samples: int = 200,
                       allowed_dips: int = 1, start: str = "optimum") -> ExperimentReport:
    """Frequencies of ``wcm < c1 + delta`` and of the no-room event along
    drift scales ``lam_list``.

    The no-room event holds when no ball can be translated by some ``z``
    with ``z1 < -delta`` to a free spot.  It is evaluated for every ball on
    about ``hole_samples`` evenly spaced snapshots per scale (planar
    cylinders only; set ``hole_samples=0`` to skip it).  Both the all-balls
    event and the per-ball frequencies are reported.

    By default every scale restarts from a configuration attaining the
    ``c1`` estimate (``start="optimum"``).  Compressing a fluid instead
    (``start="fluid"``) freezes in lattice defects at large drift, whose
    excess over ``c1`` is a kinetic artifact of single-ball moves.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    lam_list = sorted(float(x) for x in lam_list)
    if not lam_list or lam_list[0] <= 0:
        raise ValueError("lam_list must contain positive drift scales")
    hole = hole_samples > 0 and spec.d == 2 and isinstance(spec.vessel, HalfCylinder)
    n_snap = plan.sweeps // plan.thin
    stride = max(1, n_snap // hole_samples) if hole else 0
    (c1v, how), ground = _resolve_c1(spec, c1, seed, start == "optimum")
    init = _start_cfg(start, ground)
    plan = replace(plan, restart=plan.restart or init is not None)
    res = run_replicas(spec, lam_list, plan, seed, _obs_surface, {"c1": c1v, "delta": delta, "hole_stride": stride},
                       init=init)
    rep = ExperimentReport("surface", spec.echo(), seed,
                           {"lam_list": lam_list, "delta": delta, "c1": c1v, "c1_source": how, "start": start,
                            "threshold": threshold, "hole_stride": stride, "plan": plan.echo()})
    rows_i = [_event_row(res, i, lam, "near_infimum", "wcm") for i, lam in enumerate(lam_list)]
    rep.rows.extend(rows_i)
    rep.samples = _sample_columns(res, lam_list, ["wcm", "surface", "near_infimum"])
    rep.checks["near_infimum_monotone"] = monotone_with_overlap(rows_i, allowed_dips)
    rep.checks["near_infimum_final"] = rows_i[-1].probability > threshold
    if hole:
        rows_ii = []
        for i, lam in enumerate(lam_list):
            hits = _pool(res, i, "no_room")
            succ = int(sum(int(h.sum()) for h in hits))
            n = int(sum(h.shape[0] for h in hits))
            wcm_sub = [np.asarray(rep_[i]["wcm"])[::stride] for rep_ in res]
            ess = float(sum(effective_size(w, h) for w, h in zip(wcm_sub, hits)))
            rows_ii.append(EventRow(lam, "no_room", succ, n, ess))
            per_k = np.mean([rep_[i]["no_room_per_k"] for rep_ in res], axis=0)
            rep.params.setdefault("no_room_per_k", {})[repr(lam)] = per_k.tolist()
        rep.rows.extend(rows_ii)
        rep.checks["no_room_monotone"] = monotone_with_overlap(rows_ii, allowed_dips)
        rep.checks["no_room_final"] = rows_ii[-1].probability > threshold
    else:
        rep.flags.append("no-room event skipped (needs a planar HalfCylinder)")
    _flag_ess(rep, MIN_ESS)
    return rep


# ---------------------------------------------------------------------------
# centrifuge


def _obs_order(spec, snaps, delta: float):
    return {"index": [s.index for s in snaps], "wcm": np.array([s.wcm for s in snaps]),
            "n_violations": np.array([len(ordering_violations(spec, Configuration(s.centers), delta))
                                      for s in snaps]),
            "ordered": np.array([not ordering_violations(spec, Configuration(s.centers), delta) for s in snaps])}


def centrifuge_experiment(spec: ModelSpec, delta: float, lam_list, max_violation: float = 0.05,
                          plan: ChainPlan = ChainPlan(), seed: int = 0, allowed_dips: int = 1) -> ExperimentReport:
    """Frequency of configurations with no ``delta``-violating pair (a
    heavier ball at least ``delta`` above a lighter one) along ``lam_list``.

    Passes when the frequency is monotone up to overlapping intervals and
    the violating frequency at the last scale is below ``max_violation``.
    """
    if not np.allclose(spec.radii, spec.radii[0], rtol=0, atol=0):
        raise ValueError("the centrifuge experiment needs identical radii")
    if not delta > 0:
        raise ValueError("delta must be positive")
    lam_list = sorted(float(x) for x in lam_list)
    res = run_replicas(spec, lam_list, plan, seed, _obs_order, {"delta": delta})
    rep = ExperimentReport("centrifuge", spec.echo(), seed,
                           {"lam_list": lam_list, "delta": delta, "max_violation": max_violation,
                            "plan": plan.echo()})
    rep.rows = [_event_row(res, i, lam, "ordered", "wcm") for i, lam in enumerate(lam_list)]
    rep.samples = _sample_columns(res, lam_list, ["wcm", "n_violations", "ordered"])
    _flag_ess(rep, MIN_ESS)
    rep.checks["monotone"] = monotone_with_overlap(rep.rows, allowed_dips)
    rep.checks["violation_below_max"] = 1.0 - rep.rows[-1].probability < max_violation
    return rep


# ---------------------------------------------------------------------------
# floating and sinking


def archimedes_precondition(rho: float, n: int) -> float:
    """``rho**2 * n * sqrt(12)``; must exceed ``2 - pi/4`` (about 1.2146)."""
    return rho * rho * n * math.sqrt(12.0)


def archimedes_threshold(rho: float, m1: float = 1.0) -> float:
    """Critical drift ratio ``a1/a2 = pi / (4 sqrt(12)) / (rho**2 m1)``."""
    return ARCHIMEDES_CRITICAL / (rho * rho * m1)


def archimedes_spec(rho: float, n: int, gamma_ratio: float, lam: float = 1.0, m1: float = 1.0,
                    half_width: float = 1.0) -> ModelSpec:
    """One disc of radius 1/2 (index 0) and ``n - 1`` discs of radius ``rho``.

    Small discs have weight 1; the large disc has weight
    ``gamma_ratio * archimedes_threshold(rho)``, i.e. ``gamma_ratio`` is the
    drift ratio in units of the inertia-free critical ratio.
    """
    if not 0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 1/2), got {rho}")
    if n < 2:
        raise ValueError("need the large disc and at least one small disc")
    pre = archimedes_precondition(rho, n)
    if not pre > ARCHIMEDES_PRECONDITION:
        raise ValueError(f"rho^2 N sqrt(12) = {pre:.4f} must exceed 2 - pi/4 = {ARCHIMEDES_PRECONDITION:.4f}")
    if not gamma_ratio > 0 or not m1 >= 1:
        raise ValueError("gamma_ratio must be positive and m1 >= 1")
    radii = np.full(n, rho)
    radii[0] = 0.5
    weights = np.ones(n)
    weights[0] = gamma_ratio * archimedes_threshold(rho)
    masses = np.ones(n)
    masses[0] = m1
    return ModelSpec(radii, weights, HalfCylinder(half_width), drift_scale=lam, masses=masses)


def _archimedes_start(spec: ModelSpec, mode: str) -> Configuration:
    """Small discs in a honeycomb from the floor, large disc on top (sink
    runs) or at the bottom (float runs), so the chain must move it across
    the pile to succeed."""
    from brownliq.packing import HoneycombSpec, honeycomb_in_region

    rho = float(spec.radii[1])
    w = spec.vessel.half_width
    pad = 1e-9
    hs = HoneycombSpec(rho * (1 + 1e-6), anchor=(rho * (1 + 1e-6) + pad, -w + rho * (1 + 1e-6) + pad))
    if mode == "sink":
        small = honeycomb_in_region(hs, HalfCylinder(w), count_limit=spec.n - 1)
        top = float(small[:, 0].max()) + rho + 0.5 + 1e-6
        return Configuration(np.vstack([[top, 0.0], small]))
    big = np.array([0.5 + 1e-6, 0.0])
    pts = honeycomb_in_region(hs, HalfCylinder(w), count_limit=4 * spec.n)
    far = np.linalg.norm(pts - big, axis=1) >= 0.5 + rho * (1 + 1e-6)
    return Configuration(np.vstack([big, pts[far][:spec.n - 1]]))


def _obs_archimedes(spec, snaps, delta: float, inertia: bool):
    x = np.array([s.centers[:, 0] for s in snaps])
    x1 = x[:, 0]
    top = x[:, 1:].max(axis=1)
    return {"index": [s.index for s in snaps], "x1_big": x1, "top_small": top,
            "float": x1 >= top - 0.5 - delta, "sink": x1 <= 0.5 + delta}


def archimedes_experiment(rho: float, n: int, gamma_ratio: float, lam: float, delta: float, mode: str,
                          m1: float = 1.0, threshold: float = 0.9, plan: ChainPlan = ChainPlan(),
                          seed: int = 0, start: str = "adverse", half_width: float = 1.0) -> ExperimentReport:
    """Floating (``mode="float"``) or sinking (``mode="sink"``) of a large disc
    among ``n - 1`` small ones.

    ``lam`` is the drift of a small disc.  The float event is
    ``x1_big >= max_small x1 - 1/2 - delta``; the sink event is
    ``x1_big <= 1/2 + delta``.  With ``m1 > 1`` chains sample the exact
    stationary law of the inertia process (see
    :meth:`ModelSpec.effective_drifts`); the reported thresholds carry the
    ``1/m1`` factor.  ``start="adverse"`` starts the large disc on the wrong
    side of the pile; ``start="random"`` uses random insertion.  The
    report passes when the event frequency is at least ``threshold`` and
    every row has ESS of at least 100 on the large disc's height.
    """
    if mode not in ("float", "sink"):
        raise ValueError("mode must be 'float' or 'sink'")
    if not delta > 0 or not lam > 0:
        raise ValueError("delta and lam must be positive")
    spec = archimedes_spec(rho, n, gamma_ratio, lam, m1, half_width)
    inertia = m1 != 1.0
    plan = replace(plan, inertia=inertia)
    init = _archimedes_start(spec, mode) if start == "adverse" else None
    if start not in ("adverse", "random"):
        raise ValueError("start must be 'adverse' or 'random'")
    res = run_replicas(spec.with_drift_scale(1.0), [lam], plan, seed, _obs_archimedes,
                       {"delta": delta, "inertia": inertia}, init=init)
    ratio = float(spec.weights[0])
    rep = ExperimentReport(f"archimedes_{mode}", spec.echo(), seed,
                           {"rho": rho, "N": n, "gamma_ratio": gamma_ratio, "drift_ratio": ratio, "lam": lam,
                            "delta": delta, "mode": mode, "m1": m1, "threshold": threshold, "start": start,
                            "precondition": archimedes_precondition(rho, n),
                            "critical_ratio": archimedes_threshold(rho, 1.0),
                            "critical_ratio_m1": archimedes_threshold(rho, m1),
                            "plan": plan.echo()})
    for ev in ("float", "sink"):
        rep.rows.append(_event_row(res, 0, lam, ev, "x1_big"))
    rep.samples = _sample_columns(res, [lam], ["x1_big", "top_small", "float", "sink"])
    _flag_ess(rep, MIN_ESS)
    main = rep.row(mode)
    rep.checks[f"{mode}_frequency"] = main.probability >= threshold
    rep.checks["ess"] = main.ess >= MIN_ESS
    return rep


def __getattr__(name):
    # connectivity_path lives in its own module; exposed here for discovery.
    if name == "connectivity_path":
        from brownliq.paths import connectivity_path

        return connectivity_path
    raise AttributeError(name)

"""Hexagonal disc packings and the infimum of the weighted center of mass."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from brownliq.configuration import Configuration, ModelSpec, is_valid, weighted_cm
from brownliq.geometry import Box, HalfCylinder

HONEYCOMB_DENSITY = math.pi / math.sqrt(12.0)


@dataclass(frozen=True)
class HoneycombSpec:
    """Hexagonal packing of radius-``rho`` discs, one centered at ``anchor``,
    with nearest neighbours lined up along the first axis."""

    rho: float
    anchor: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    @property
    def basis(self) -> np.ndarray:
        r = self.rho
        return np.array([[2 * r, 0.0], [r, r * math.sqrt(3.0)]])


def _region_bounds(region, x1_max):
    if isinstance(region, Box):
        return np.asarray(region.lo, float), np.asarray(region.hi, float)
    if isinstance(region, HalfCylinder):
        if x1_max is None:
            raise ValueError("a cap x1_max is needed to enumerate an unbounded vessel")
        w = region.half_width
        return np.array([0.0, -w]), np.array([x1_max, w])
    raise TypeError(f"unsupported region {type(region).__name__}")


def honeycomb_in_region(hspec: HoneycombSpec, region, count_limit: int | None = None,
                        x1_max: float | None = None) -> np.ndarray:
    """Centers of all lattice discs lying inside ``region``.

    Sorted by first coordinate, then second; truncated to ``count_limit``.
    For a :class:`HalfCylinder` without ``x1_max`` the cap grows until
    ``count_limit`` discs are found.
    """
    if len(hspec.anchor) != 2:
        raise ValueError("honeycomb packings are planar (d = 2)")
    if isinstance(region, HalfCylinder) and x1_max is None:
        if count_limit is None:
            raise ValueError("give count_limit or x1_max for an unbounded vessel")
        cap = 4 * hspec.rho
        while True:
            pts = honeycomb_in_region(hspec, region, None, cap)
            if len(pts) >= count_limit or 2 * region.half_width < 2 * hspec.rho:
                return pts[:count_limit]
            cap *= 2
    lo, hi = _region_bounds(region, x1_max)
    r = hspec.rho
    h = r * math.sqrt(3.0)
    a1, a2 = hspec.anchor
    j = np.arange(math.floor((lo[1] - a2) / h) - 1, math.ceil((hi[1] - a2) / h) + 2)
    pts = []
    for jj in j:
        x2 = a2 + jj * h
        off = a1 + jj * r
        i = np.arange(math.floor((lo[0] - off) / (2 * r)) - 1, math.ceil((hi[0] - off) / (2 * r)) + 2)
        x1 = off + 2 * r * i
        pts.append(np.column_stack([x1, np.full_like(x1, x2)]))
    pts = np.vstack(pts) if pts else np.zeros((0, 2))
    keep = region.contains_balls(pts, np.full(len(pts), r))
    pts = pts[keep]
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    return pts if count_limit is None else pts[:count_limit]


def lowest_n(centers, n: int) -> np.ndarray:
    """The ``n`` centers with the lowest first coordinate (ties: second
    coordinate, then original index)."""
    centers = np.asarray(centers, dtype=float)
    if n > len(centers):
        raise ValueError(f"asked for {n} of {len(centers)} centers")
    order = np.lexsort((np.arange(len(centers)), centers[:, 1], centers[:, 0]))
    return centers[order[:n]]


def disc_box_area(center, r: float, lo, hi) -> float:
    """Area of ``B(center, r)`` intersected with the box ``[lo, hi]``."""
    c1, c2 = center
    a, b = max(lo[0], c1 - r), min(hi[0], c1 + r)
    if a >= b:
        return 0.0

    def chord(x):
        half = math.sqrt(max(r * r - (x - c1) ** 2, 0.0))
        return max(0.0, min(hi[1], c2 + half) - max(lo[1], c2 - half))

    if lo[0] <= c1 - r and c1 + r <= hi[0] and lo[1] <= c2 - r and c2 + r <= hi[1]:
        return math.pi * r * r
    val, _ = integrate.quad(chord, a, b, limit=200, epsabs=1e-13)
    return val


def covered_fraction(centers, r: float, lo, hi) -> float:
    """Fraction of the box ``[lo, hi]`` covered by disjoint radius-``r`` discs."""
    area = (hi[0] - lo[0]) * (hi[1] - lo[1])
    return sum(disc_box_area(c, r, lo, hi) for c in centers) / area


def compact(spec: ModelSpec, cfg: Configuration, tol: float = 1e-9, margin: float = 1e-12,
            max_passes: int = 10_000) -> Configuration:
    """Drop balls straight down until contact, lowest first, to a fixed point."""
    x = cfg.centers.copy()
    r = spec.radii
    n = spec.n
    for _ in range(max_passes):
        moved = 0.0
        for k in np.argsort(x[:, 0], kind="stable"):
            t = _max_drop(spec, x, k, margin)
            if t > 0:
                x[k, 0] -= t
                moved = max(moved, t)
        if moved <= tol:
            break
    out = Configuration(x)
    if not is_valid(spec, out):
        raise RuntimeError("compaction produced an invalid configuration")
    return out


def _max_drop(spec: ModelSpec, x: np.ndarray, k: int, margin: float) -> float:
    r = spec.radii
    v = spec.vessel
    if isinstance(v, HalfCylinder):
        t = x[k, 0] - r[k] - margin * max(1.0, abs(x[k, 0]))
    else:
        t = _graph_drop(v, x[k], r[k])
    others = np.arange(spec.n) != k
    below = others & (x[:, 0] <= x[k, 0])
    if np.any(below):
        perp = x[below, 1:] - x[k, 1:]
        p2 = np.einsum("ij,ij->i", perp, perp)
        reach = r[below] + r[k]
        hit = p2 < reach * reach
        if np.any(hit):
            gap = x[k, 0] - x[below, 0][hit] - np.sqrt(reach[hit] ** 2 - p2[hit])
            t = min(t, float(gap.min()) - margin * max(1.0, abs(x[k, 0])))
    return max(t, 0.0)


def _graph_drop(v, c, r, iters: int = 60) -> float:
    lo, hi = 0.0, 1.0
    while v.contains_ball(c - np.eye(len(c))[0] * hi, r) and hi < 1e6:
        lo, hi = hi, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if v.contains_ball(c - np.eye(len(c))[0] * mid, r):
            lo = mid
        else:
            hi = mid
    return lo


def staggered_rows(n: int, rho: float, half_width: float, eps: float = 1e-9) -> np.ndarray | None:
    """Lowest ``n`` sites of a row packing of radius-``rho`` discs in a
    planar cylinder, or ``None`` if no row fits.

    Even rows hold as many discs as fit side by side; odd rows are shifted
    sideways and nest into the gaps.  Two variants are compared, and the one
    with the smaller sum of heights wins: odd rows keep the full count and
    shift by whatever width is left over, or they drop one disc and shift by
    a full radius.
    """
    width = 2.0 * half_width
    rho = rho * (1 + eps)  # spacing margin so rounding never creates overlaps
    k = int(math.floor((width - 2 * eps) / (2 * rho)))
    if k < 1:
        return None
    free = width - 2 * rho * k - 2 * eps
    x2_0 = -half_width + rho + eps
    variants = []
    if k >= 2 or free > 0:
        s = min(rho, free)
        variants.append((k, k, s))
    if k >= 2:
        variants.append((k, k - 1, rho))
    best, best_sum = None, math.inf
    for k_even, k_odd, s in variants:
        s = max(s, 0.0)
        h = math.sqrt(max(4 * rho * rho - s * s, 0.0)) + eps
        if s == 0.0:
            h = 2 * rho + eps
        pts = []
        row = 0
        while len(pts) < n:
            cnt, shift = (k_even, 0.0) if row % 2 == 0 else (k_odd, s)
            x1 = rho + eps + row * h
            pts.extend((x1, x2_0 + shift + 2 * rho * i) for i in range(cnt))
            row += 1
        pts = np.array(pts[:n])
        total = float(pts[:, 0].sum())
        if total < best_sum:
            best, best_sum = pts, total
    return best


@dataclass
class C1Estimate:
    value: float
    argmin: Configuration
    restart_values: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    lattice_value: float | None = None


def default_schedule(spec: ModelSpec, stages: int = 12) -> list[float]:
    """Geometric drift scales from gas-like to a thermal length ~1e-3 radius."""
    rmin = float(spec.radii.min())
    wmin = float(spec.weights.min())
    lo = 0.5 / (wmin * 10 * rmin)
    hi = 0.5 / (wmin * 1e-3 * rmin)
    return list(np.geomspace(lo, hi, stages))


def c1_estimate(spec: ModelSpec, restarts: int = 4, schedule=None, sweeps_per_stage: int = 2000,
                seed: int = 0, backend: str | None = None) -> C1Estimate:
    """Upper bound on ``inf sum_k weights[k] * x1[k]`` over valid configurations.

    Best of ``restarts`` annealing runs, each followed by compaction.
    Restart ``i`` always uses the ``i``-th spawned seed, so the value can
    only improve as ``restarts`` grows.  For equal discs in a planar
    cylinder the compacted :func:`staggered_rows` packing is a further
    candidate; annealing alone tends to freeze into polycrystals there.
    """
    from brownliq.sampler import anneal, initial_configuration, make_rng

    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    schedule = default_schedule(spec) if schedule is None else list(schedule)
    children = np.random.SeedSequence(seed).spawn(restarts)
    best_val, best_cfg = math.inf, None
    values = []
    for child in children:
        rng = make_rng(child)
        init = initial_configuration(spec, rng)
        res = anneal(spec, schedule, sweeps_per_stage, init=init, seed=child, backend=backend)
        cand = compact(spec, res.best_cfg)
        val = weighted_cm(spec, cand)
        values.append(val)
        if val < best_val:
            best_val, best_cfg = val, cand
    lattice_val = None
    v = spec.vessel
    if spec.d == 2 and isinstance(v, HalfCylinder) and np.all(spec.radii == spec.radii[0]):
        pts = staggered_rows(spec.n, float(spec.radii[0]), v.half_width)
        if pts is not None:
            cand = Configuration(pts)
            if is_valid(spec, cand):
                cand = compact(spec, cand)
                lattice_val = weighted_cm(spec, cand)
                if lattice_val < best_val:
                    best_val, best_cfg = lattice_val, cand
    return C1Estimate(best_val, best_cfg, values, [c.spawn_key for c in children], lattice_val)

"""Explicit paths between two valid configurations.

The plan moves one ball at a time along straight segments.  Both endpoint
configurations are first "stacked": balls are lifted straight up, highest
first, into horizontal slots far above everything else, spaced at least one
largest diameter apart so balls in different slots can never touch.  The
stack of the source is then reordered into the stack of the target by
swapping neighbouring slots, and finally the target's lifting moves are
played backwards.

A swap sends the two balls to opposite sides of the vessel before they
pass each other vertically.  In a cylinder of half width ``w`` the two side
columns are ``2w - r_a - r_b`` apart, which exceeds ``r_a + r_b`` whenever
``r_a + r_b < w``.  Moving a ball straight up never leaves a
cylinder or the region above a graph, and never brings it closer to a ball
whose center is lower, so the lifting moves are safe.

Every segment is checked at ``samples_per_segment`` evenly spaced points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from brownliq.configuration import Configuration, ModelSpec, is_valid
from brownliq.geometry import GraphDomain, HalfCylinder
from brownliq.records import write_csv


@dataclass
class ConnectivityPath:
    """Piecewise-linear path: ``waypoints[i]`` is an ``(N, d)`` array and the
    path runs straight from each waypoint to the next.

    ``certificate`` is true when every sampled point was valid;
    ``failure`` gives ``(segment, t)`` of the first invalid sample otherwise.
    """

    waypoints: list
    samples_per_segment: int
    certificate: bool
    failure: tuple | None = None
    samples_checked: int = 0
    notes: list = field(default_factory=list)

    @property
    def n_segments(self) -> int:
        return max(0, len(self.waypoints) - 1)

    def at(self, s: float) -> np.ndarray:
        """Position at path parameter ``s`` in ``[0, n_segments]``."""
        if self.n_segments == 0:
            return self.waypoints[0].copy()
        s = min(max(s, 0.0), float(self.n_segments))
        i = min(int(s), self.n_segments - 1)
        t = s - i
        return (1 - t) * self.waypoints[i] + t * self.waypoints[i + 1]

    def polylines(self) -> list[np.ndarray]:
        """Per-object vertex lists (consecutive duplicates removed)."""
        arr = np.stack(self.waypoints)
        out = []
        for k in range(arr.shape[1]):
            pts = arr[:, k, :]
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
            out.append(pts[keep])
        return out

    def to_csv(self, path) -> Path:
        """One row per object vertex: ``object, vertex, x1, ..., xd``."""
        lines = self.polylines()
        d = lines[0].shape[1]
        rows = [[k, j, *map(float, p)] for k, pl in enumerate(lines) for j, p in enumerate(pl)]
        write_csv(path, ["object", "vertex"] + [f"x{i + 1}" for i in range(d)], rows)
        return Path(path)


# ---------------------------------------------------------------------------
# certificate


def _segment_ok(spec: ModelSpec, a: np.ndarray, b: np.ndarray, m: int) -> float | None:
    """First sampled ``t`` at which the segment ``a -> b`` is invalid."""
    ts = np.linspace(0.0, 1.0, m)
    moving = np.flatnonzero(np.any(a != b, axis=1))
    if moving.size == 0:
        return None if is_valid(spec, Configuration(a)) else 0.0
    v = spec.vessel
    if not isinstance(v, HalfCylinder):
        for t in ts:
            if not is_valid(spec, Configuration((1 - t) * a + t * b)):
                return float(t)
        return None
    r = spec.radii
    pts = (1 - ts)[:, None, None] * a[moving][None] + ts[:, None, None] * b[moving][None]  # (m, M, d)
    rm = r[moving]
    ok = v.contains_balls(pts.reshape(-1, spec.d), np.tile(rm, m)).reshape(m, len(moving))
    bad = ~ok.all(axis=1)
    # pairs moving-vs-static and moving-vs-moving
    others = (1 - ts)[:, None, None] * a[None] + ts[:, None, None] * b[None]  # (m, N, d)
    diff = pts[:, :, None, :] - others[:, None, :, :]
    d2 = np.einsum("tijk,tijk->tij", diff, diff)
    reach = rm[:, None] + r[None, :]
    clash = d2 < reach * reach
    clash[:, np.arange(len(moving)), moving] = False
    bad |= clash.any(axis=(1, 2))
    if bad.any():
        return float(ts[np.argmax(bad)])
    return None


def certify(spec: ModelSpec, waypoints, samples_per_segment: int = 1000):
    """Check every segment; returns ``(ok, failure, samples_checked)``."""
    if len(waypoints) == 1:
        ok = is_valid(spec, Configuration(waypoints[0]))
        return ok, None if ok else (0, 0.0), 1
    count = 0
    for i, (a, b) in enumerate(zip(waypoints, waypoints[1:])):
        t = _segment_ok(spec, a, b, samples_per_segment)
        count += samples_per_segment
        if t is not None:
            return False, (i, t), count
    return True, None, count


# ---------------------------------------------------------------------------
# plan


def _sup_graph(v: GraphDomain, pad: float, nodes: int = 64) -> float:
    axes = [np.linspace(lo - pad, hi + pad, nodes) for lo, hi in v.bounds]
    grid = np.meshgrid(*axes, indexing="ij")
    return float(np.max(np.vectorize(v.g)(*grid)))


class _Plan:
    def __init__(self, spec: ModelSpec, start: np.ndarray):
        self.spec = spec
        self.x = start.copy()
        self.waypoints = [start.copy()]

    def move(self, k: int, target) -> None:
        target = np.asarray(target, dtype=float)
        if np.array_equal(self.x[k], target):
            return
        self.x = self.x.copy()
        self.x[k] = target
        self.waypoints.append(self.x)


def _lift(spec: ModelSpec, x: np.ndarray, base: float, gap: float):
    """Lift highest first into slots; returns (waypoints, slot of each ball)."""
    plan = _Plan(spec, x)
    order = np.lexsort((np.arange(spec.n), -x[:, 0]))
    slot = np.empty(spec.n, dtype=int)
    for i, k in enumerate(order):
        s = spec.n - 1 - i
        slot[k] = s
        p = plan.x[k].copy()
        p[0] = base + s * gap
        plan.move(k, p)
    return plan.waypoints, slot


def _columns(spec: ModelSpec, k: int, eps: float):
    """Left and right side positions (cross coordinates) for ball ``k``."""
    v = spec.vessel
    side = np.zeros(spec.d - 1)
    if isinstance(v, HalfCylinder):
        off = v.half_width - spec.radii[k] - eps
        side[0] = off
        return -side, side.copy()
    lo, hi = v.bounds[0]
    left, right = side.copy(), side.copy()
    mid = [0.5 * (a + b) for a, b in v.bounds[1:]]
    left[1:] = mid
    right[1:] = mid
    left[0], right[0] = lo, hi
    return left, right


def _admissible(spec: ModelSpec) -> list[str]:
    """Radii check for the swap moves; returns notes on borderline cases.

    Two balls pass each other at opposite sides of a cylinder as long as
    their radii sum to less than the half width.  That holds whenever every
    diameter is below the half width, and also when a single ball has
    diameter exactly equal to it, which is flagged.
    """
    v = spec.vessel
    r = spec.radii
    two = float(np.sort(r)[-2:].sum()) if spec.n > 1 else 0.0
    notes = []
    if isinstance(v, HalfCylinder):
        if spec.n > 1 and not two < v.half_width:
            raise ValueError("the two largest radii must sum to less than the cylinder half width")
        if np.any(2 * r == v.half_width):
            notes.append("a ball has diameter equal to the half width")
        return notes
    if isinstance(v, GraphDomain):
        lo, hi = v.bounds[0]
        if spec.n > 1 and not hi - lo > 2 * two:
            raise ValueError("the first cross bound interval is too narrow to pass two balls")
        return notes
    raise TypeError(f"unsupported vessel {type(v).__name__}")


def connectivity_path(spec: ModelSpec, cfg_from: Configuration, cfg_to: Configuration,
                      samples_per_segment: int = 1000) -> ConnectivityPath:
    """Build and certify a path of valid configurations from ``cfg_from``
    to ``cfg_to``.

    Raises ``ValueError`` if an endpoint is invalid or the radii are too
    large for the construction.  A failed certificate is reported in the
    result, not raised.
    """
    if samples_per_segment < 2:
        raise ValueError("samples_per_segment must be >= 2")
    a = np.asarray(cfg_from.centers, dtype=float)
    b = np.asarray(cfg_to.centers, dtype=float)
    if not is_valid(spec, cfg_from) or not is_valid(spec, cfg_to):
        raise ValueError("both endpoint configurations must be valid")
    if np.array_equal(a, b):
        ok, fail, cnt = certify(spec, [a], samples_per_segment)
        return ConnectivityPath([a.copy()], samples_per_segment, ok, fail, cnt)
    notes = _admissible(spec)
    r = spec.radii
    rmax = float(r.max())
    gap = 2 * rmax * (1 + 1e-6) + 1e-9
    top = max(float(np.max(a[:, 0] + r)), float(np.max(b[:, 0] + r)))
    base = top + rmax + gap
    if isinstance(spec.vessel, GraphDomain):
        base = max(base, _sup_graph(spec.vessel, rmax) + 2 * rmax + gap)

    up_a, slot_a = _lift(spec, a, base, gap)
    up_b, slot_b = _lift(spec, b, base, gap)

    plan = _Plan(spec, up_a[-1])
    plan.waypoints = list(up_a)
    slot = slot_a.copy()
    who = np.empty(spec.n, dtype=int)
    who[slot] = np.arange(spec.n)
    want = np.empty(spec.n, dtype=int)
    want[slot_b] = np.arange(spec.n)  # want[s] = ball that must end in slot s
    rank = np.empty(spec.n, dtype=int)
    rank[want] = np.arange(spec.n)  # target slot of each ball
    eps = 1e-9
    # bubble sort the stack by target slot with neighbour swaps
    for sweep in range(spec.n):
        swapped = False
        for s in range(spec.n - 1):
            lo_ball, hi_ball = who[s], who[s + 1]
            if rank[lo_ball] < rank[hi_ball]:
                continue
            h_lo, h_hi = base + s * gap, base + (s + 1) * gap
            left, _ = _columns(spec, lo_ball, eps)
            _, right = _columns(spec, hi_ball, eps)
            plan.move(lo_ball, np.concatenate([[h_lo], left]))
            plan.move(hi_ball, np.concatenate([[h_hi], right]))
            plan.move(lo_ball, np.concatenate([[h_hi], left]))
            plan.move(hi_ball, np.concatenate([[h_lo], right]))
            who[s], who[s + 1] = hi_ball, lo_ball
            swapped = True
        if not swapped:
            break
    park_b = up_b[-1]
    for k in range(spec.n):
        plan.move(k, park_b[k])
    waypoints = plan.waypoints + [w.copy() for w in reversed(up_b[:-1])]
    ok, fail, cnt = certify(spec, waypoints, samples_per_segment)
    return ConnectivityPath(waypoints, samples_per_segment, ok, fail, cnt, notes)

"""Vessels, balls and the uniform-grid neighbor index.

All lengths are radii, not diameters.  A ball of radius ``r`` is inside a
vessel when the closed ball of radius ``r - tol`` lies in the (open)
vessel.  Two balls overlap only on strictly positive interpenetration, so
exact tangency is a valid configuration.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class HalfCylinder:
    """One-sided open cylinder ``{x : x1 > 0, |(x2, ..., xd)| < half_width}``."""

    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    def contains_ball(self, center, radius: float, tol: float = 0.0) -> bool:
        c = np.asarray(center, dtype=float)
        if c[0] <= radius - tol:
            return False
        lim = self.half_width - radius + tol
        if lim <= 0:
            return False
        if c.shape[0] == 2:
            return abs(c[1]) < lim
        return float(np.dot(c[1:], c[1:])) < lim * lim

    def contains_balls(self, centers: np.ndarray, radii: np.ndarray, tol: float = 0.0) -> np.ndarray:
        """Vectorized :meth:`contains_ball` over rows of ``centers``."""
        centers = np.asarray(centers, dtype=float)
        lim = self.half_width - radii + tol
        ok = (centers[:, 0] > radii - tol) & (lim > 0)
        if centers.shape[1] == 2:
            ok &= np.abs(centers[:, 1]) < lim
        else:
            ok &= np.einsum("ij,ij->i", centers[:, 1:], centers[:, 1:]) < lim * lim
        return ok

    def section_measure(self, b: float, d: int) -> float:
        """(d-1)-volume of the horizontal section ``{x in D : x1 = b}``."""
        if b <= 0:
            return 0.0
        k = d - 1
        return math.pi ** (k / 2) / math.gamma(k / 2 + 1) * self.half_width**k


def _lower_hemisphere(d: int, m: int) -> np.ndarray:
    """``m`` unit vectors with non-positive first component, plus ``-e1``."""
    if d == 2:
        phi = np.linspace(0.5 * np.pi, 1.5 * np.pi, m)
        dirs = np.column_stack([np.cos(phi), np.sin(phi)])
    else:
        # Fibonacci points on the sphere, reflected into the lower half.
        i = np.arange(2 * m) + 0.5
        z = 1 - 2 * i / (2 * m)
        rest = np.sqrt(1 - z * z)
        theta = np.pi * (1 + 5**0.5) * i
        pts = np.zeros((2 * m, d))
        pts[:, 0] = -np.abs(z)
        pts[:, 1] = rest * np.cos(theta)
        if d > 2:
            pts[:, 2] = rest * np.sin(theta)
        dirs = pts[:m] / np.linalg.norm(pts[:m], axis=1, keepdims=True)
    bottom = np.zeros((1, d))
    bottom[0, 0] = -1.0
    return np.vstack([dirs, bottom])


@dataclass(frozen=True)
class GraphDomain:
    """Region above a graph, ``{x : x1 > g(x2, ..., xd)}``.

    ``bounds`` is the box of cross-section coordinates over which ``g`` may
    be evaluated by quadrature-type queries (one ``(lo, hi)`` pair per
    cross coordinate).  Containment of a ball is tested on ``n_directions``
    boundary points of its lower hemisphere plus its lowest point, so it is
    approximate for rough ``g``.
    """

    g: Callable
    bounds: tuple
    n_directions: int = 64

    def contains_ball(self, center, radius: float, tol: float = 0.0) -> bool:
        c = np.asarray(center, dtype=float)
        r = radius - tol
        if r <= 0:
            return bool(c[0] > self.g(*c[1:]))
        pts = c + r * _lower_hemisphere(c.shape[0], self.n_directions)
        return all(p[0] > self.g(*p[1:]) for p in pts)

    def contains_balls(self, centers, radii, tol: float = 0.0) -> np.ndarray:
        return np.array([self.contains_ball(c, r, tol) for c, r in zip(centers, radii)], dtype=bool)


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box ``lo < x < hi``; used as a packing region."""

    lo: tuple
    hi: tuple

    def contains_ball(self, center, radius: float, tol: float = 0.0) -> bool:
        c = np.asarray(center, dtype=float)
        return bool(np.all(c > np.asarray(self.lo) + radius - tol) and np.all(c < np.asarray(self.hi) - radius + tol))

    def contains_balls(self, centers, radii, tol: float = 0.0) -> np.ndarray:
        centers = np.asarray(centers, dtype=float)
        r = np.asarray(radii, dtype=float)[:, None]
        return np.all((centers > np.asarray(self.lo) + r - tol) & (centers < np.asarray(self.hi) - r + tol), axis=1)


Vessel = HalfCylinder | GraphDomain


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if len(self.center) < 2:
            raise ValueError("balls live in dimension d >= 2")


def ball_inside_vessel(v, b: Ball, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return bool(v.contains_ball(b.center, b.radius, tol))


def balls_overlap(b1: Ball, b2: Ball, tol: float = 0.0) -> bool:
    if len(b1.center) != len(b2.center):
        raise ValueError("dimension mismatch")
    reach = b1.radius + b2.radius - tol
    if reach <= 0:
        return False
    diff = np.subtract(b1.center, b2.center, dtype=float)
    return float(np.dot(diff, diff)) < reach * reach


@dataclass
class NeighborGrid:
    """Uniform cell list keyed by integer cell tuples.

    Balls whose diameter exceeds ``cell_size`` are kept out of the cells in
    an ``oversized`` set and returned by every query.  ``query`` therefore
    returns a superset of the indexed balls that intersect the query ball.
    """

    cell_size: float
    centers: np.ndarray
    radii: np.ndarray
    cells: dict = field(default_factory=lambda: defaultdict(set))
    oversized: set = field(default_factory=set)
    cell_of: dict = field(default_factory=dict)

    @classmethod
    def build(cls, centers, radii, cell_size: float | None = None) -> "NeighborGrid":
        centers = np.array(centers, dtype=float, ndmin=2)
        radii = np.asarray(radii, dtype=float)
        if centers.shape[0] == 0:
            raise ValueError("cannot build a grid over zero balls")
        if cell_size is None:
            cell_size = 2.0 * float(radii.max())
        grid = cls(float(cell_size), centers.copy(), radii.copy())
        for i in range(centers.shape[0]):
            grid._insert(i)
        return grid

    @classmethod
    def from_balls(cls, balls: Sequence[Ball], cell_size: float | None = None) -> "NeighborGrid":
        return cls.build([b.center for b in balls], [b.radius for b in balls], cell_size)

    def key(self, center) -> tuple:
        return tuple(math.floor(x / self.cell_size) for x in center)

    def _insert(self, i: int):
        if 2.0 * self.radii[i] > self.cell_size:
            self.oversized.add(i)
            self.cell_of[i] = None
        else:
            k = self.key(self.centers[i])
            self.cells[k].add(i)
            self.cell_of[i] = k

    def query(self, center, radius: float) -> list[int]:
        """Indices of every ball that might intersect ``B(center, radius)``."""
        reach = radius + 0.5 * self.cell_size
        lo = [math.floor((c - reach) / self.cell_size) for c in center]
        hi = [math.floor((c + reach) / self.cell_size) for c in center]
        out = set(self.oversized)
        for key in _box_keys(lo, hi):
            bucket = self.cells.get(key)
            if bucket:
                out |= bucket
        return sorted(out)

    def move(self, i: int, new_center) -> None:
        if i not in self.cell_of:
            raise IndexError(f"stale index {i}")
        self.centers[i] = new_center
        old = self.cell_of[i]
        if old is None:
            return
        k = self.key(self.centers[i])
        if k != old:
            bucket = self.cells[old]
            bucket.discard(i)
            if not bucket:
                del self.cells[old]
            self.cells[k].add(i)
            self.cell_of[i] = k

    def buckets(self) -> dict:
        """Non-empty cells as ``{key: frozenset(indices)}``; for comparisons."""
        return {k: frozenset(v) for k, v in self.cells.items() if v}

    def occupied_cells(self) -> int:
        return sum(1 for v in self.cells.values() if v)


def _box_keys(lo: Iterable[int], hi: Iterable[int]):
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    if len(ranges) == 2:
        for i in ranges[0]:
            for j in ranges[1]:
                yield (i, j)
        return
    import itertools

    yield from itertools.product(*ranges)

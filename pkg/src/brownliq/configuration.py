"""Model parameters, configurations and the observables built on them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from brownliq.geometry import GraphDomain, HalfCylinder, NeighborGrid


@dataclass(frozen=True)
class ModelSpec:
    """N balls with radii, weights and masses in a vessel.

    The drift of ball ``k`` is ``(-a_k, 0, ..., 0)`` with
    ``a_k = drift_scale * weights[k]``.  ``zero_drift`` switches the drift
    off entirely (free reflected motion), which is only meaningful for
    short runs since the stationary law then fails to be normalizable.
    """

    radii: np.ndarray
    weights: np.ndarray
    vessel: HalfCylinder | GraphDomain
    drift_scale: float = 1.0
    masses: np.ndarray | None = None
    d: int = 2
    zero_drift: bool = False

    def __post_init__(self):
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        weights = np.broadcast_to(np.asarray(self.weights, dtype=float), radii.shape).copy()
        masses = np.ones_like(radii) if self.masses is None else np.broadcast_to(
            np.asarray(self.masses, dtype=float), radii.shape).copy()
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if np.any(radii <= 0) or np.any(weights <= 0) or np.any(masses <= 0):
            raise ValueError("radii, weights and masses must all be strictly positive")
        if not self.drift_scale > 0:
            raise ValueError("drift_scale must be positive")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_drifts(cls, radii, drifts, vessel, **kw) -> "ModelSpec":
        """Build from drift magnitudes directly (``drift_scale = 1``)."""
        return cls(radii=radii, weights=drifts, vessel=vessel, drift_scale=1.0, **kw)

    @property
    def n(self) -> int:
        return self.radii.shape[0]

    @property
    def drifts(self) -> np.ndarray:
        if self.zero_drift:
            return np.zeros_like(self.weights)
        return self.drift_scale * self.weights

    def effective_drifts(self, inertia: bool = False) -> np.ndarray:
        """Drift magnitudes entering the stationary density of the original
        coordinates.  With inertia the transformed process has drift
        ``a_k m_k`` in coordinates scaled by ``m_k``, hence ``a_k m_k**2``."""
        a = self.drifts
        return a * self.masses**2 if inertia else a

    def with_drift_scale(self, lam: float) -> "ModelSpec":
        return replace(self, drift_scale=float(lam))

    @property
    def max_diameter(self) -> float:
        return 2.0 * float(self.radii.max())

    def echo(self) -> dict:
        v = self.vessel
        vessel = {"kind": "half_cylinder", "half_width": v.half_width} if isinstance(v, HalfCylinder) else {
            "kind": "graph", "bounds": [list(b) for b in v.bounds]}
        return {"d": self.d, "N": self.n, "radii": self.radii.tolist(), "weights": self.weights.tolist(),
                "masses": self.masses.tolist(), "drift_scale": self.drift_scale, "vessel": vessel}


@dataclass
class Configuration:
    centers: np.ndarray

    def __post_init__(self):
        self.centers = np.array(self.centers, dtype=float, ndmin=2)

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    def copy(self) -> "Configuration":
        return Configuration(self.centers.copy())

    def to_json(self, spec: ModelSpec) -> str:
        return json.dumps({"d": int(self.centers.shape[1]), "N": self.n,
                           "radii": spec.radii.tolist(), "centers": self.centers.tolist()})

    @classmethod
    def from_json(cls, text: str) -> tuple["Configuration", np.ndarray]:
        """Parse the interchange format; returns the configuration and radii."""
        obj = json.loads(text)
        cfg = cls(np.asarray(obj["centers"], dtype=float).reshape(obj["N"], obj["d"]))
        return cfg, np.asarray(obj["radii"], dtype=float)


@dataclass
class Observables:
    wcm: float
    surface: float
    top_of_object: np.ndarray = field(repr=False)
    depth_rank: np.ndarray = field(repr=False)


def _check_shape(spec: ModelSpec, cfg: Configuration):
    if cfg.centers.shape != (spec.n, spec.d):
        raise ValueError(f"configuration shape {cfg.centers.shape} does not match model ({spec.n}, {spec.d})")


def overlapping_pairs(centers: np.ndarray, radii: np.ndarray, tol: float = 0.0) -> list[tuple[int, int]]:
    """All pairs ``i < j`` with positive interpenetration, via the cell list."""
    grid = NeighborGrid.build(centers, radii)
    out = []
    for i in range(centers.shape[0]):
        for j in grid.query(centers[i], radii[i]):
            if j <= i:
                continue
            reach = radii[i] + radii[j] - tol
            diff = centers[i] - centers[j]
            if reach > 0 and float(diff @ diff) < reach * reach:
                out.append((i, j))
    return out


def is_valid(spec: ModelSpec, cfg: Configuration, tol: float = 0.0) -> bool:
    _check_shape(spec, cfg)
    if not np.all(spec.vessel.contains_balls(cfg.centers, spec.radii, tol)):
        return False
    grid = NeighborGrid.build(cfg.centers, spec.radii)
    c, r = cfg.centers, spec.radii
    for i in range(spec.n):
        for j in grid.query(c[i], r[i]):
            if j <= i:
                continue
            reach = r[i] + r[j] - tol
            diff = c[i] - c[j]
            if reach > 0 and float(diff @ diff) < reach * reach:
                return False
    return True


def weighted_cm(spec: ModelSpec, cfg: Configuration) -> float:
    return float(np.dot(spec.weights, cfg.centers[:, 0]))


def surface_height(spec: ModelSpec, cfg: Configuration, subset=None) -> float:
    tops = cfg.centers[:, 0] + spec.radii
    if subset is not None:
        tops = tops[np.asarray(subset)]
    return float(tops.max())


def observables(spec: ModelSpec, cfg: Configuration) -> Observables:
    tops = cfg.centers[:, 0] + spec.radii
    return Observables(weighted_cm(spec, cfg), float(tops.max()), tops,
                       np.lexsort((cfg.centers[:, 1], cfg.centers[:, 0])))


def ordering_violations(spec: ModelSpec, cfg: Configuration, delta: float) -> list[tuple[int, int]]:
    """Pairs ``(j, k)`` with ``weights[j] > weights[k]`` where the more
    strongly pulled ``j`` sits at least ``delta`` above ``k``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    w = spec.weights
    h = cfg.centers[:, 0]
    heavier = w[:, None] > w[None, :]
    above = h[:, None] >= h[None, :] + delta
    j, k = np.nonzero(heavier & above)
    return [(int(a), int(b)) for a, b in zip(j, k)]


def _circle_circle(c1, r1, c2, r2):
    diff = c2 - c1
    dist2 = float(diff @ diff)
    dist = dist2**0.5
    if dist == 0 or dist > r1 + r2 or dist < abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + dist2) / (2 * dist)
    h2 = r1 * r1 - a * a
    h = h2**0.5 if h2 > 0 else 0.0
    mid = c1 + a * diff / dist
    perp = np.array([-diff[1], diff[0]]) / dist
    return [mid + h * perp, mid - h * perp]


def _hole_candidates(others: np.ndarray, reach: np.ndarray, floor: float, wall: float) -> np.ndarray:
    pts = [np.array([floor, wall]), np.array([floor, -wall])]
    for c, rr in zip(others, reach):
        dy = floor - c[0]
        if abs(dy) <= rr:
            s = (rr * rr - dy * dy) ** 0.5
            pts += [np.array([floor, c[1] + s]), np.array([floor, c[1] - s])]
        for side in (wall, -wall):
            dx = side - c[1]
            if abs(dx) <= rr:
                s = (rr * rr - dx * dx) ** 0.5
                pts += [np.array([c[0] + s, side]), np.array([c[0] - s, side])]
    m = others.shape[0]
    if m > 1:
        diff = others[:, None, :] - others[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        ii, jj = np.nonzero(np.triu(dist <= reach[:, None] + reach[None, :], 1))
        for i, j in zip(ii, jj):
            pts += _circle_circle(others[i], reach[i], others[j], reach[j])
    return np.array(pts)


def can_translate_down(spec: ModelSpec, cfg: Configuration, k: int, delta: float,
                       eps: float = 1e-9) -> np.ndarray | None:
    """A displacement ``z`` with ``z[0] < -delta`` that moves ball ``k`` to
    a free spot, or ``None`` if no such spot exists.

    The lowest reachable free position of a disc among other discs and the
    cylinder walls is attained at a vertex of the free region: a corner,
    a circle/wall intersection or a circle/circle intersection.  These
    finitely many points are enumerated and tested.  Among admissible
    candidates the one with the smallest ``|z|`` is returned, nudged off the
    boundary so that the moved configuration is strictly valid.
    """
    if not 0 <= k < spec.n:
        raise IndexError(f"object index {k} out of range")
    if spec.d != 2:
        raise ValueError("the exact hole test is planar (d = 2)")
    if not isinstance(spec.vessel, HalfCylinder):
        raise ValueError("the exact hole test needs a HalfCylinder vessel")
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = spec.radii[k]
    x = cfg.centers[k]
    wall = spec.vessel.half_width - r
    if wall < 0:
        return None
    mask = np.arange(spec.n) != k
    others = cfg.centers[mask]
    reach = r + spec.radii[mask]
    cand = _hole_candidates(others, reach, r, wall)
    cand = cand[cand[:, 0] < x[0] - delta]
    if cand.size == 0:
        return None
    scale = max(1.0, float(np.abs(cfg.centers).max()))
    tol = eps * scale
    ok = (cand[:, 0] >= r - tol) & (np.abs(cand[:, 1]) <= wall + tol)
    if others.shape[0]:
        diff = cand[:, None, :] - others[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        ok &= np.all(d2 >= (reach * reach)[None, :] - 2 * tol * reach[None, :], axis=1)
    cand = cand[ok]
    if cand.size == 0:
        return None
    z = cand - x
    order = np.argsort(np.einsum("ij,ij->i", z, z), kind="stable")
    trial = cfg.centers.copy()
    for idx in order:
        p = _nudge_inside(cand[idx], others, reach, r, wall, tol)
        if p is None or not p[0] < x[0] - delta:
            continue
        trial[k] = p
        if is_valid(spec, Configuration(trial)):
            return p - x
    return None


def _nudge_inside(p, others, reach, floor, wall, tol):
    """Push a boundary point a few ``tol`` into the free region."""
    step = 4 * tol
    q = p.copy()
    for _ in range(8):
        push = np.zeros(2)
        if q[0] <= floor:
            push[0] += 1
        if q[1] >= wall:
            push[1] -= 1
        if q[1] <= -wall:
            push[1] += 1
        if others.shape[0]:
            diff = q - others
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            near = dist <= reach + step
            for dv, dd in zip(diff[near], dist[near]):
                if dd > 0:
                    push += dv / dd
        if not push.any():
            return q
        q = q + step * push / np.linalg.norm(push)
        inside = q[0] > floor and abs(q[1]) < wall
        if inside and (others.shape[0] == 0 or np.all(np.einsum("ij,ij->i", q - others, q - others) >= reach * reach)):
            return q
    return None

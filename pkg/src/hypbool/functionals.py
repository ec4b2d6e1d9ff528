"""Estimators of volume, surface area and Euler characteristic of ``Z cap B_R``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from . import hypcore
from .hypcore import ball_volume, sphere_area
from .process import Realization, ResourceError

DEFAULT_CLIQUE_CAP = 20
FEASIBILITY_TOL = 1e-9
_DENSE_GRAINS = 256
_DENSE_CHUNK = 2_000_000


@dataclass(frozen=True)
class FunctionalEstimate:
    value: float
    std_error: float
    n_samples: int


# ---------------------------------------------------------------------------
# Membership queries
# ---------------------------------------------------------------------------

def poincare_balls(centers: np.ndarray, radii: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean center and radius of each hyperbolic ball seen in the Poincare ball model."""
    D = np.arccosh(np.maximum(centers[:, 0], 1.0))
    spatial = centers[:, 1:]
    norm = np.linalg.norm(spatial, axis=1)
    direction = np.where(norm[:, None] > 0, spatial / np.where(norm > 0, norm, 1.0)[:, None], 0.0)
    near = np.tanh(0.5 * (D - radii))
    far = np.tanh(0.5 * (D + radii))
    return direction * (0.5 * (near + far))[:, None], 0.5 * (far - near)


def _dense_mask(points: np.ndarray, centers: np.ndarray, radii: np.ndarray, strict: bool) -> np.ndarray:
    inner = -(points * _signs(points.shape[1])) @ centers.T
    bound = np.cosh(radii)[None, :]
    return inner < bound if strict else inner <= bound


def _row_chunks(n: int, m: int):
    step = max(1, _DENSE_CHUNK // max(m, 1))
    for lo in range(0, n, step):
        yield lo, min(n, lo + step)


def _tree_pairs(points: np.ndarray, centers: np.ndarray, radii: np.ndarray):
    """Candidate ``(point, grain)`` pairs from Euclidean ball queries in the Poincare model."""
    m = centers.shape[0]
    tree = cKDTree(hypcore.to_poincare_ball(points))
    ec, er = poincare_balls(centers, radii)
    hits = tree.query_ball_point(ec, er * (1.0 + 1e-9) + 1e-12, return_sorted=False)
    lengths = np.fromiter((len(h) for h in hits), dtype=np.int64, count=m)
    if lengths.sum() == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    pi = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])
    gi = np.repeat(np.arange(m), lengths)
    return pi, gi


def membership_pairs(points: np.ndarray, centers: np.ndarray, radii: np.ndarray, strict: bool = False):
    """Index pairs ``(i, j)`` with point ``i`` inside grain ``j`` (exact hyperboloid test)."""
    n, m = points.shape[0], centers.shape[0]
    if m <= _DENSE_GRAINS:
        parts = []
        for lo, hi in _row_chunks(n, m):
            pi, gi = np.nonzero(_dense_mask(points[lo:hi], centers, radii, strict))
            parts.append((pi + lo, gi))
        if not parts:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])
    pi, gi = _tree_pairs(points, centers, radii)
    inner = -np.einsum("ij,ij->i", points[pi] * _signs(points.shape[1]), centers[gi])
    bound = np.cosh(radii[gi])
    ok = inner < bound if strict else inner <= bound
    return pi[ok], gi[ok]


def _signs(n: int) -> np.ndarray:
    s = np.ones(n)
    s[0] = -1.0
    return s


def covered(points: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Boolean mask of points lying in at least one grain."""
    n, m = points.shape[0], centers.shape[0]
    out = np.zeros(n, dtype=bool)
    if m == 0 or n == 0:
        return out
    if m <= _DENSE_GRAINS:
        for lo, hi in _row_chunks(n, m):
            out[lo:hi] = _dense_mask(points[lo:hi], centers, radii, False).any(axis=1)
        return out
    pi, _ = membership_pairs(points, centers, radii)
    out[pi] = True
    return out


# ---------------------------------------------------------------------------
# Volume and surface
# ---------------------------------------------------------------------------

def estimate_volume(real: Realization, n: int, rng: np.random.Generator) -> FunctionalEstimate:
    """Hit-or-miss estimate of ``Vol(Z cap B_R)``."""
    if n < 1:
        raise ValueError("need at least one sample")
    vol = ball_volume(real.window_radius, real.d)
    if len(real) == 0:
        return FunctionalEstimate(0.0, 0.0, n)
    pts = hypcore.sample_uniform_ball(rng, real.window_radius, real.d, n)
    p = float(np.mean(covered(pts, real.centers, real.radii)))
    return FunctionalEstimate(vol * p, vol * math.sqrt(p * (1.0 - p) / n), n)


def estimate_surface(
    real: Realization,
    n_per_grain: int,
    rng: np.random.Generator,
    n_boundary: int | None = None,
) -> FunctionalEstimate:
    """Estimate of the boundary measure ``V_{d-1}(Z cap B_R)``.

    Grain spheres contribute the part inside the window and outside every
    other grain; the window sphere contributes the part inside ``Z``.
    """
    if n_per_grain < 1:
        raise ValueError("need at least one sample per grain")
    d = real.d
    R = real.window_radius
    m = len(real)
    if m == 0:
        return FunctionalEstimate(0.0, 0.0, 0)
    n_boundary = n_boundary or max(n_per_grain, 10_000)
    cosh_R = math.cosh(R)

    pts = hypcore.sample_sphere(rng, real.centers, real.radii, n_per_grain).reshape(-1, d + 1)
    owner = np.repeat(np.arange(m), n_per_grain)
    alive = pts[:, 0] <= cosh_R
    idx = np.flatnonzero(alive)
    pi, gi = membership_pairs(pts[idx], real.centers, real.radii, strict=True)
    foreign = gi != owner[idx[pi]]
    alive[idx[pi[foreign]]] = False
    frac = alive.reshape(m, n_per_grain).mean(axis=1)
    areas = np.array([sphere_area(r, d) for r in real.radii])
    value = float(np.dot(areas, frac))
    var = float(np.sum(areas ** 2 * frac * (1.0 - frac) / n_per_grain))

    rim = hypcore.point_from_polar(np.full(n_boundary, R), hypcore.sample_directions(rng, d, n_boundary))
    q = float(np.mean(covered(rim, real.centers, real.radii)))
    rim_area = sphere_area(R, d)
    value += rim_area * q
    var += rim_area ** 2 * q * (1.0 - q) / n_boundary
    return FunctionalEstimate(value, math.sqrt(var), m * n_per_grain + n_boundary)


# ---------------------------------------------------------------------------
# Nerve and Euler characteristic (hyperbolic plane)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nerve:
    vertices: tuple
    simplices: tuple

    def euler_characteristic(self) -> int:
        return int(sum((-1) ** (len(s) - 1) for s in self.simplices))


def _minkowski_cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A vector Minkowski-orthogonal to both ``a`` and ``b`` in R^{2,1}."""
    c = np.cross(a, b)
    c[0] = -c[0]
    return c


def _circle_crossings(c1, r1, c2, r2) -> list[np.ndarray]:
    """Intersection points of two hyperbolic circles (empty, one or two points)."""
    q = -float(hypcore.minkowski(c1, c2))
    det = 1.0 - q * q
    if abs(det) < 1e-14:
        return []
    h1, h2 = math.cosh(r1), math.cosh(r2)
    alpha = (h1 - q * h2) / det
    beta = (h2 - q * h1) / det
    tau2 = alpha * alpha + beta * beta + 2.0 * alpha * beta * q - 1.0
    if tau2 < -FEASIBILITY_TOL * max(1.0, q * q):
        return []
    n = _minkowski_cross(c1, c2)
    n = n / math.sqrt(float(hypcore.minkowski(n, n)))
    base = alpha * c1 + beta * c2
    tau = math.sqrt(max(tau2, 0.0))
    return [base + tau * n, base - tau * n]


def _inside_all(x: np.ndarray, centers: np.ndarray, radii: np.ndarray) -> bool:
    inner = -hypcore.minkowski(centers, x[None])
    return bool(np.all(inner <= np.cosh(radii) * (1.0 + FEASIBILITY_TOL)))


def discs_intersect(centers: np.ndarray, radii: np.ndarray) -> bool:
    """Whether finitely many closed discs of the hyperbolic plane share a point.

    A nonempty intersection is either a whole disc contained in all others, or
    a convex region whose boundary has a corner where two circles cross; both
    cases are tested exactly.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    k = radii.size
    if k <= 1:
        return True
    sep = hypcore.dist(centers[:, None, :], centers[None, :, :], check=False)
    if np.any(sep > radii[:, None] + radii[None, :] + FEASIBILITY_TOL):
        return False
    for i in range(k):
        if np.all(sep[i] + radii[i] <= radii + FEASIBILITY_TOL):
            return True
    for i, j in combinations(range(k), 2):
        for x in _circle_crossings(centers[i], radii[i], centers[j], radii[j]):
            if _inside_all(x, centers, radii):
                return True
    return False


def nerve_build(real: Realization, clique_cap: int = DEFAULT_CLIQUE_CAP) -> Nerve:
    """Nerve of the grains clipped to the window.

    In the hyperbolic plane a family of convex sets has a common point iff
    every three of them do, so a set ``S`` of grains is a simplex iff every
    pair of ``S`` meets inside the window and every triple of ``S`` meets.
    """
    if real.d != 2:
        raise ValueError("nerve construction is implemented for d = 2")
    m = len(real)
    if m == 0:
        return Nerve((), ())
    centers, radii = real.centers, real.radii
    window_c = hypcore.base_point(2)
    R = real.window_radius

    sep = hypcore.dist(centers[:, None, :], centers[None, :, :], check=False)
    adjacent = [set() for _ in range(m)]
    for i, j in zip(*np.nonzero(np.triu(sep <= radii[:, None] + radii[None, :] + FEASIBILITY_TOL, 1))):
        trio_c = np.stack([centers[i], centers[j], window_c])
        if discs_intersect(trio_c, np.array([radii[i], radii[j], R])):
            adjacent[i].add(int(j))
            adjacent[j].add(int(i))

    triple_cache: dict = {}

    def triple_ok(a: int, b: int, c: int) -> bool:
        key = tuple(sorted((a, b, c)))
        if key not in triple_cache:
            idx = list(key)
            triple_cache[key] = discs_intersect(centers[idx], radii[idx])
        return triple_cache[key]

    simplices: list[tuple] = []

    def extend(simplex: tuple, candidates: list) -> None:
        simplices.append(simplex)
        if len(simplex) > clique_cap:
            raise ResourceError(
                f"nerve clique reached the cap of {clique_cap} grains; lower the intensity or raise the cap"
            )
        for pos, v in enumerate(candidates):
            if all(triple_ok(a, b, v) for a, b in combinations(simplex, 2)):
                extend(simplex + (v,), [w for w in candidates[pos + 1:] if w in adjacent[v]])

    for v in range(m):
        extend((v,), sorted(w for w in adjacent[v] if w > v))
    return Nerve(tuple(range(m)), tuple(simplices))


def euler_char_2d(real: Realization, clique_cap: int = DEFAULT_CLIQUE_CAP) -> int:
    """Euler characteristic of ``Z cap B_R`` as the alternating simplex count of the nerve."""
    return nerve_build(real, clique_cap).euler_characteristic()


def v0_2d(real: Realization, vol_estimate: float | FunctionalEstimate) -> float:
    """``V_0 = 2 pi chi + V_2`` in the hyperbolic plane."""
    vol = vol_estimate.value if isinstance(vol_estimate, FunctionalEstimate) else float(vol_estimate)
    return 2.0 * math.pi * euler_char_2d(real) + vol

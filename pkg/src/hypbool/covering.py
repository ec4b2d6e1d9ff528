"""Covering of H^d by radius-1/2 balls on a geometric lattice in the upper half-space.

Centers are ``(7/8)^ell * (2 a k, 1)`` for ``k in Z^(d-1)`` and ``ell in Z``.
This module works natively in half-space coordinates (last coordinate is the
height); ``hypcore.from_half_space`` converts to hyperboloid points.
"""

from __future__ import annotations

import math
from itertools import product
from typing import NamedTuple

import numpy as np

from .hypcore import half_space_dist

RADIUS = 0.5
SHRINK = 7.0 / 8.0
ELL_WINDOW = 60
OUTER_LATERAL = 32.0
OUTER_HEIGHT = 16.0 ** 2
_TOL = 1e-12


class CoverageError(RuntimeError):
    """Raised if a point is found outside every covering ball."""


class CoverIndex(NamedTuple):
    k: tuple
    ell: int


def constant_a(d: int = 2) -> float:
    """Lateral half-width factor of the box inscribed in each covering ball."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    return math.sqrt((7.0 * math.sinh(0.25) ** 2 / 2.0 - 1.0 / 64.0) / (d - 1))


def cover_center(idx: CoverIndex) -> np.ndarray:
    """Half-space coordinates of the covering ball with index ``idx``."""
    d = len(idx.k) + 1
    h = SHRINK ** idx.ell
    out = np.empty(d)
    out[:-1] = 2.0 * constant_a(d) * h * np.asarray(idx.k, dtype=float)
    out[-1] = h
    return out


def _candidates(y: np.ndarray):
    """Yield ``(ell, k-array, centers)`` for every lattice ball that may contain a row of ``y``.

    A half-space ball of radius 1/2 around ``(z, h)`` is the Euclidean ball
    with center ``(z, h cosh(1/2))`` and radius ``h sinh(1/2)``; its bounding
    box lies inside the outer box ``C(z, 32h) x [h/256, 256h]``, so enumerating
    the bounding box loses no covering ball.
    """
    n, d = y.shape
    a = constant_a(d)
    log_shrink = math.log(SHRINK)
    ell_c = np.log(y[:, -1]) / log_shrink
    spread = RADIUS / -log_shrink
    lo = np.floor(ell_c - spread) - 1
    span = int(math.ceil(2 * spread)) + 3
    reach = math.sinh(RADIUS)
    width = int(math.ceil(reach / a)) + 2
    for off in range(span):
        ell = lo + off
        ok_ell = np.abs(ell - np.round(ell_c)) <= ELL_WINDOW
        h = SHRINK ** ell
        k_lo = np.floor((y[:, :-1] - reach * h[:, None]) / (2.0 * a * h[:, None]))
        for shift in product(range(width), repeat=d - 1):
            k = k_lo + np.asarray(shift, dtype=float)
            centers = np.concatenate([2.0 * a * h[:, None] * k, h[:, None]], axis=1)
            yield ell, k, centers, ok_ell


def _hits(y: np.ndarray):
    for ell, k, centers, ok_ell in _candidates(y):
        yield ell, k, ok_ell & (half_space_dist(y, centers) <= RADIUS + _TOL)


def cover_counts(y: np.ndarray) -> np.ndarray:
    """Number of covering balls containing each row of ``y``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if np.any(y[:, -1] <= 0):
        raise ValueError("half-space points need a positive last coordinate")
    counts = np.zeros(y.shape[0], dtype=np.int64)
    for _, _, hit in _hits(y):
        counts += hit
    return counts


def covers(y) -> list[CoverIndex]:
    """All lattice indices whose ball contains the half-space point ``y``."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if y[0, -1] <= 0:
        raise ValueError("half-space points need a positive last coordinate")
    found = [
        CoverIndex(tuple(int(v) for v in k[0]), int(ell[0]))
        for ell, k, hit in _hits(y)
        if hit[0]
    ]
    if not found:
        raise CoverageError(f"point {y[0]} is not covered")
    return sorted(set(found), key=lambda c: (c.ell, c.k))


def lateral_clique_bound(d: int = 2) -> int:
    """Maximum number of lattice points ``k`` with ``y in C(2 a h k, 32 h)`` at one level."""
    per_axis = math.floor(OUTER_LATERAL / constant_a(d)) + 1
    return per_axis ** (d - 1)


def overlap_bound(d: int = 2) -> int:
    """The overlap bound ``101 x`` lateral clique bound."""
    return 101 * lateral_clique_bound(d)


def _box_points(rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray, n_random: int) -> np.ndarray:
    d = lo.size
    corners = np.array(list(product(*[(lo[i], hi[i]) for i in range(d)])))
    mid = 0.5 * (lo + hi)
    faces = []
    for i in range(d):
        for v in (lo[i], hi[i]):
            f = mid.copy()
            f[i] = v
            faces.append(f)
    inner = lo + (hi - lo) * rng.random((n_random, d))
    return np.concatenate([corners, np.array(faces), mid[None], inner])


def box_inclusion_check(z, u: float, rng: np.random.Generator | None = None, n_random: int = 1000) -> bool:
    """Check inner box in ball and ball in outer box for the ball of radius 1/2 at ``(z, u)``."""
    if u <= 0:
        raise ValueError("height must be positive")
    rng = rng if rng is not None else np.random.default_rng(0)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d = z.size + 1
    a = constant_a(d)
    center = np.append(z, u)

    lo = np.append(z - a * u, SHRINK * u)
    hi = np.append(z + a * u, u)
    inner_pts = _box_points(rng, lo, hi, n_random)
    inner_ok = bool(np.all(half_space_dist(inner_pts, center[None]) <= RADIUS * (1.0 + 1e-12)))

    # the ball is the Euclidean ball around (z, u cosh(1/2)) of radius u sinh(1/2)
    e_center = np.append(z, u * math.cosh(RADIUS))
    e_radius = u * math.sinh(RADIUS)
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    dirs = rng.standard_normal((n_random, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    shells = rng.random(n_random) ** (1.0 / d)
    ball_pts = np.concatenate([
        e_center + e_radius * axes,
        e_center + e_radius * dirs,
        e_center + e_radius * shells[:, None] * dirs,
    ])
    lateral_ok = np.all(np.abs(ball_pts[:, :-1] - z) <= OUTER_LATERAL * u)
    height_ok = np.all((ball_pts[:, -1] >= u / OUTER_HEIGHT) & (ball_pts[:, -1] <= OUTER_HEIGHT * u))
    return inner_ok and bool(lateral_ok and height_ok)


def sample_test_points(rng: np.random.Generator, n: int, d: int = 2, decades: int = 20, lateral: float = 10.0) -> np.ndarray:
    """Points with log-uniform height over ``decades`` powers of ten centred at 1.

    The lateral part is uniform in ``[-lateral h, lateral h]^(d-1)`` for height
    ``h``, so every decade sees the lattice at the same relative resolution.
    """
    h = 10.0 ** rng.uniform(-decades / 2.0, decades / 2.0, n)
    lat = rng.uniform(-lateral, lateral, (n, d - 1)) * h[:, None]
    return np.concatenate([lat, h[:, None]], axis=1)


def verify_cover(
    n_points: int = 1_000_000,
    seed: int = 0,
    d: int = 2,
    decades: int = 20,
    n_boxes: int = 10_000,
    chunk: int = 200_000,
) -> dict:
    """Empirical coverage, overlap and box-inclusion report."""
    rng = np.random.default_rng(seed)
    failures = 0
    per_decade = np.zeros(decades, dtype=np.int64)
    max_overlap = 0
    done = 0
    while done < n_points:
        m = min(chunk, n_points - done)
        y = sample_test_points(rng, m, d, decades)
        counts = cover_counts(y)
        failures += int(np.sum(counts == 0))
        decade = np.clip(np.floor(np.log10(y[:, -1]) + decades / 2.0).astype(int), 0, decades - 1)
        np.maximum.at(per_decade, decade, counts)
        max_overlap = max(max_overlap, int(counts.max()))
        done += m
    box_failures = 0
    for _ in range(n_boxes):
        u = 10.0 ** rng.uniform(-4.0, 4.0)
        z = rng.uniform(-100.0, 100.0, d - 1) * u
        box_failures += not box_inclusion_check(z, u, rng, n_random=100)
    return {
        "d": d,
        "points_tested": n_points,
        "coverage_failures": failures,
        "max_overlap": max_overlap,
        "per_decade_max_overlap": per_decade.tolist(),
        "overlap_bound": overlap_bound(d),
        "boxes_tested": n_boxes,
        "box_inclusion_failures": box_failures,
    }

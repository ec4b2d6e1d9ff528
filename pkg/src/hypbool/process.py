"""Poisson ball-grain process restricted to a ball window."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import hypcore

DEFAULT_HARD_CAP = 10_000_000


class ResourceError(RuntimeError):
    """Raised when a requested simulation exceeds a configured size cap."""


@dataclass(frozen=True)
class RadiusDistribution:
    """Grain radius law: ``fixed`` at ``b`` or ``uniform`` on ``[a, b]``."""

    kind: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "uniform"):
            raise ValueError(f"unknown radius distribution {self.kind!r}")
        if not (0.0 < self.b < math.inf):
            raise ValueError("radius support bound must be finite and positive")
        if self.kind == "uniform" and not (0.0 <= self.a < self.b):
            raise ValueError("uniform radii need 0 <= a < b")

    @classmethod
    def fixed(cls, r: float) -> "RadiusDistribution":
        return cls("fixed", float(r), float(r))

    @classmethod
    def uniform(cls, a: float, b: float) -> "RadiusDistribution":
        return cls("uniform", float(a), float(b))

    @property
    def r_max(self) -> float:
        return self.b

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.b)
        return rng.uniform(self.a, self.b, n)

    def quadrature(self, n: int = 48) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights integrating functions of the radius against this law."""
        if self.kind == "fixed":
            return np.array([self.b]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (self.b - self.a)
        return self.a + half * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class ModelParams:
    d: int
    gamma: float
    radius: RadiusDistribution

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.gamma < 0:
            raise ValueError("intensity must be non-negative")


class Grain(NamedTuple):
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class Realization:
    """Grains of one sample of the process that hit the window ``B_R``.

    Centers are stored as an ``(n, d+1)`` hyperboloid array and radii as an
    ``(n,)`` array so that estimators can work on whole batches.
    """

    params: ModelParams
    window_radius: float
    centers: np.ndarray
    radii: np.ndarray
    seed: int | None = None

    def __len__(self) -> int:
        return int(self.radii.size)

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def grains(self) -> list[Grain]:
        return [Grain(c, float(r)) for c, r in zip(self.centers, self.radii)]

    def __iter__(self) -> Iterator[Grain]:
        return iter(self.grains)

    def center_distances(self) -> np.ndarray:
        return hypcore.dist(hypcore.base_point(self.d)[None], self.centers, check=False)

    def transformed(self, iso: hypcore.Isometry) -> "Realization":
        return Realization(self.params, self.window_radius, hypcore.apply(iso, self.centers), self.radii, self.seed)


def make_realization(params: ModelParams, R: float, centers, radii, seed: int | None = None) -> Realization:
    """Build a realization from explicit grains, keeping only those that hit ``B_R``."""
    centers = np.asarray(centers, dtype=float).reshape(-1, params.d + 1)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if centers.shape[0]:
        hypcore.check_point(centers)
    p = hypcore.base_point(params.d)
    keep = hypcore.dist(p[None], centers, check=False) <= R + radii
    return Realization(params, float(R), centers[keep], radii[keep], seed)


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``index`` of master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def sample_realization(
    rng: np.random.Generator | int,
    params: ModelParams,
    R: float,
    hard_cap: int = DEFAULT_HARD_CAP,
) -> Realization:
    """Sample the restriction of the process to grains hitting ``B_R``.

    Centers form a Poisson process of intensity ``gamma`` in ``B_{R + r_max}``;
    grains whose ball misses ``B_R`` are discarded.  Passing an integer seed
    records it in the realization.
    """
    if R <= 0:
        raise ValueError("window radius must be positive")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = stream(seed)
    d = params.d
    outer = R + params.radius.r_max
    expected = params.gamma * hypcore.ball_volume(outer, d)
    if expected > hard_cap:
        raise ResourceError(f"expected {expected:.3g} grains exceeds the cap {hard_cap}")
    n = int(rng.poisson(expected)) if expected > 0 else 0
    centers = hypcore.sample_uniform_ball(rng, outer, d, n)
    radii = params.radius.sample(rng, n)
    p = hypcore.base_point(d)
    keep = hypcore.dist(p[None], centers, check=False) <= R + radii
    return Realization(params, float(R), centers[keep], radii[keep], seed)


def empty_prob_point(params: ModelParams) -> float:
    """Probability ``exp(-gamma v_d)`` that the base point is uncovered."""
    from .theory import grain_moments

    return math.exp(-params.gamma * grain_moments(params).v[params.d])


def covers_point(real: Realization, x: np.ndarray) -> bool:
    x = np.asarray(x, dtype=float)
    if len(real) == 0:
        return False
    return bool(np.any(-hypcore.minkowski(real.centers, x[None]) <= np.cosh(real.radii)))


def empirical_coverage(
    rng: np.random.Generator,
    params: ModelParams,
    replicates: int,
    point: np.ndarray | None = None,
) -> float:
    """Fraction of independent replicates in which ``point`` (default: base point) is covered.

    Only grains within ``r_max`` of the point can cover it, so each replicate
    samples the process in the ball of radius ``r_max`` around the point.
    """
    d = params.d
    p = hypcore.base_point(d)
    x = p if point is None else np.asarray(point, dtype=float)
    r_max = params.radius.r_max
    lam = params.gamma * hypcore.ball_volume(r_max, d)
    counts = rng.poisson(lam, replicates)
    hits = 0
    move = hypcore.translation_to(x)
    for n in counts:
        if n == 0:
            continue
        centers = hypcore.apply(move, hypcore.sample_uniform_ball(rng, r_max, d, int(n)))
        radii = params.radius.sample(rng, int(n))
        hits += bool(np.any(-hypcore.minkowski(centers, x[None]) <= np.cosh(radii)))
    return hits / replicates

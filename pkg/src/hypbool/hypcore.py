"""Hyperbolic geometry in the hyperboloid (Minkowski) model.

Points of H^d are stored as arrays of shape ``(..., d+1)`` on the upper sheet
``<x, x> = -1, x0 >= 1`` of the Minkowski form with signature ``(-, +, ..., +)``.
Every function here accepts batches along the leading axes.  Conversions to the
Poincare ball, Beltrami-Klein and upper half-space models happen only at I/O
boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

POINT_TOL = 1e-9
ISOMETRY_TOL = 1e-8
RENORM_EVERY = 32

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-12, limit=500)


class GeometryError(ValueError):
    """Raised when an input violates a hyperboloid-model invariant."""


# ---------------------------------------------------------------------------
# Minkowski primitives
# ---------------------------------------------------------------------------

def minkowski(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minkowski bilinear form ``-x0*y0 + sum_i xi*yi`` over the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def base_point(d: int) -> np.ndarray:
    """The base point ``(1, 0, ..., 0)`` of H^d."""
    p = np.zeros(d + 1)
    p[0] = 1.0
    return p


def check_point(x: np.ndarray, tol: float = POINT_TOL) -> np.ndarray:
    """Validate that ``x`` lies on the upper sheet and return it as an array."""
    x = np.asarray(x, dtype=float)
    norm = minkowski(x, x)
    scale = np.maximum(1.0, x[..., 0] ** 2)
    if np.any(np.abs(norm + 1.0) > tol * scale) or np.any(x[..., 0] < 1.0 - tol):
        raise GeometryError("point is not on the upper sheet of the hyperboloid")
    return x


def project_to_sheet(x: np.ndarray) -> np.ndarray:
    """Recompute the time coordinate so that ``<x, x> = -1`` holds exactly."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 0] = np.sqrt(1.0 + np.sum(x[..., 1:] ** 2, axis=-1))
    return x


def point_from_polar(s: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Point at distance ``s`` from the base point along unit ``direction`` in R^d."""
    s = np.asarray(s, dtype=float)
    direction = np.asarray(direction, dtype=float)
    out = np.empty(np.broadcast_shapes(s.shape + (1,), direction.shape[:-1] + (direction.shape[-1] + 1,)))
    out[..., 0] = np.cosh(s)
    out[..., 1:] = np.sinh(s)[..., None] * direction
    return out


def dist(x: np.ndarray, y: np.ndarray, check: bool = True) -> np.ndarray:
    """Geodesic distance ``arcosh(-<x, y>)``.

    Nearby points use ``2 arsinh(sqrt(<x-y, x-y>)/2)``, which keeps full
    relative precision where the arcosh argument is close to 1; distant
    points use arcosh directly, which avoids cancellation in the chord.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inner = -minkowski(x, y)
    if check:
        check_point(x)
        check_point(y)
        if np.any(inner < 1.0 - POINT_TOL * np.maximum(1.0, np.abs(inner))):
            raise GeometryError("-<x, y> < 1: inputs are not on the same sheet")
    diff = x - y
    chord2 = np.maximum(minkowski(diff, diff), 0.0)
    near = 2.0 * np.arcsinh(0.5 * np.sqrt(chord2))
    return np.where(inner > 2.0, np.arccosh(np.maximum(inner, 1.0)), near)


# ---------------------------------------------------------------------------
# Tangent vectors and the exponential map
# ---------------------------------------------------------------------------

def tangent_at_base(direction: np.ndarray) -> np.ndarray:
    """Embed a unit vector of R^d as a tangent vector at the base point."""
    direction = np.asarray(direction, dtype=float)
    out = np.zeros(direction.shape[:-1] + (direction.shape[-1] + 1,))
    out[..., 1:] = direction
    return out


def check_tangent(x: np.ndarray, u: np.ndarray, tol: float = POINT_TOL) -> None:
    scale = np.maximum(1.0, np.abs(np.asarray(x)[..., 0]))
    if np.any(np.abs(minkowski(u, x)) > tol * scale) or np.any(np.abs(minkowski(u, u) - 1.0) > tol * scale ** 2):
        raise GeometryError("tangent vector must be unit length and Minkowski-orthogonal to its base")


def exp_map(x: np.ndarray, u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Exponential map ``cosh(s) x + sinh(s) u`` for unit tangent ``u`` at ``x``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise GeometryError("exp_map expects s >= 0")
    check_tangent(x, u)
    return np.cosh(s)[..., None] * x + np.sinh(s)[..., None] * u


# ---------------------------------------------------------------------------
# Constants, balls and intrinsic volumes
# ---------------------------------------------------------------------------

def omega(n: int) -> float:
    """Surface area ``2 pi^(n/2) / Gamma(n/2)`` of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def kappa(n: int) -> float:
    """Volume of the unit ball in R^n, with ``kappa(0) = 1``."""
    if n == 0:
        return 1.0
    return omega(n) / n


@dataclass(frozen=True)
class Constants:
    """Tables of ``omega_n`` and ``kappa_n`` for ``n = 0..d+1``."""

    d: int
    omega: tuple = field(init=False)
    kappa: tuple = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega", tuple([float("nan")] + [omega(n) for n in range(1, self.d + 2)]))
        object.__setattr__(self, "kappa", tuple(kappa(n) for n in range(self.d + 2)))


def _check_radius(r: float) -> float:
    if r < 0:
        raise GeometryError(f"radius must be non-negative, got {r}")
    return float(r)


@lru_cache(maxsize=4096)
def _sinh_power_integral(r: float, m: int) -> float:
    """``int_0^r sinh^m(t) dt``."""
    if r == 0.0:
        return 0.0
    if m == 0:
        return r
    if m == 1:
        return math.cosh(r) - 1.0
    val, _ = integrate.quad(lambda t: math.sinh(t) ** m, 0.0, r, **_QUAD_OPTS)
    return val


def ball_volume(r: float, d: int = 2) -> float:
    """Volume of a hyperbolic ball of radius ``r``."""
    r = _check_radius(r)
    if d == 2:
        # 2 pi (cosh r - 1) written without cancellation
        return 4.0 * math.pi * math.sinh(0.5 * r) ** 2
    return omega(d) * _sinh_power_integral(r, d - 1)


def sphere_area(r: float, d: int = 2) -> float:
    """Surface area ``omega_d sinh^(d-1)(r)`` of a hyperbolic sphere."""
    r = _check_radius(r)
    return omega(d) * math.sinh(r) ** (d - 1)


def intrinsic_volume_ball(j: int, r: float, d: int = 2) -> float:
    """Intrinsic volume ``V_j`` of a ball of radius ``r`` in H^d."""
    if not 0 <= j <= d:
        raise IndexError(f"intrinsic volume index {j} outside 0..{d}")
    r = _check_radius(r)
    if j == d:
        return ball_volume(r, d)
    return omega(d) * math.cosh(r) ** (d - 1 - j) * math.sinh(r) ** j


def steiner_coeff(j: int, r: float, d: int = 2) -> float:
    """Coefficient ``binom(d-1, j) int_0^r cosh^j sinh^(d-1-j)`` of the Steiner formula."""
    if not 0 <= j <= d - 1:
        raise IndexError(f"Steiner index {j} outside 0..{d - 1}")
    r = _check_radius(r)
    if r == 0.0:
        return 0.0
    val, _ = integrate.quad(lambda t: math.cosh(t) ** j * math.sinh(t) ** (d - 1 - j), 0.0, r, **_QUAD_OPTS)
    return math.comb(d - 1, j) * val


def renorm_const(k: int, d: int = 2) -> float:
    """Factor turning ``V_k`` into the renormalized ``V_k^0``."""
    if not 0 <= k <= d:
        raise IndexError(f"index {k} outside 0..{d}")
    if k == d:
        return 1.0
    return omega(d + 1) / (omega(k + 1) * omega(d - k)) * math.comb(d - 1, k)


def cap_fraction(c: np.ndarray, d: int) -> np.ndarray:
    """Fraction of the unit sphere S^(d-1) where the first coordinate is ``>= c``."""
    c = np.clip(np.asarray(c, dtype=float), -1.0, 1.0)
    if d == 2:
        return np.arccos(c) / math.pi
    x = (1.0 - np.abs(c)) * (1.0 + np.abs(c))
    half = 0.5 * special.betainc(0.5 * (d - 1), 0.5, x)
    return np.where(c >= 0.0, half, 1.0 - half)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_directions(rng: np.random.Generator, d: int, size: int | tuple = ()) -> np.ndarray:
    """Uniform unit vectors in R^d."""
    shape = (size,) if isinstance(size, int) else tuple(size)
    g = rng.standard_normal(shape + (d,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


class _RadialSampler:
    """Radius sampler with density proportional to ``sinh^(d-1)`` on ``[0, R]``.

    A monotone cubic interpolant of the inverse CDF serves as proposal and a
    rejection step corrects it to the exact law.
    """

    GRID = 4096

    def __init__(self, R: float, d: int) -> None:
        self.R = R
        self.d = d
        s = np.linspace(0.0, R, self.GRID)
        dens = np.sinh(s) ** (d - 1)
        cdf = integrate.cumulative_simpson(dens, x=s, initial=0.0)
        cdf = np.maximum.accumulate(cdf / cdf[-1])
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._inv = PchipInterpolator(cdf[keep], s[keep])
        self._dinv = self._inv.derivative()
        u = np.linspace(0.0, 1.0, 8 * self.GRID)
        ratio = self._target(self._inv(u)) * self._dinv(u)
        self._bound = 1.05 * float(np.max(ratio))

    def _target(self, s: np.ndarray) -> np.ndarray:
        return np.sinh(s) ** (self.d - 1) / _sinh_power_integral(self.R, self.d - 1)

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty(0)
        while out.size < n:
            m = int(1.3 * (n - out.size)) + 16
            u = rng.random(m)
            s = self._inv(u)
            ratio = self._target(s) * self._dinv(u) / self._bound
            out = np.concatenate([out, s[rng.random(m) < ratio]])
        return out[:n]


@lru_cache(maxsize=64)
def _radial_sampler(R: float, d: int) -> _RadialSampler:
    return _RadialSampler(R, d)


def sample_radius(rng: np.random.Generator, R: float, d: int, n: int) -> np.ndarray:
    """Distances from the base point of ``n`` uniform points in the ball of radius ``R``."""
    if d == 2:
        # cosh s = 1 + V (cosh R - 1), inverted stably via arcosh(1 + y)
        y = rng.random(n) * (math.cosh(R) - 1.0)
        return np.log1p(y + np.sqrt(y * (y + 2.0)))
    return _radial_sampler(float(R), d)(rng, n)


def sample_uniform_ball(rng: np.random.Generator, R: float, d: int = 2, n: int | None = None) -> np.ndarray:
    """Uniform point(s) in the ball of radius ``R`` around the base point."""
    if R <= 0:
        raise GeometryError("window radius must be positive")
    count = 1 if n is None else n
    s = sample_radius(rng, R, d, count)
    pts = point_from_polar(s, sample_directions(rng, d, count))
    return pts[0] if n is None else pts


def sample_sphere(rng: np.random.Generator, center: np.ndarray, r: np.ndarray, n: int) -> np.ndarray:
    """``n`` uniform points on each sphere ``S(center_i, r_i)``; shape ``(m, n, d+1)``."""
    center = np.atleast_2d(center)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d = center.shape[-1] - 1
    local = point_from_polar(np.broadcast_to(r[:, None], (r.size, n)), sample_directions(rng, d, (r.size, n)))
    boosts = translation_matrices(center)
    return np.einsum("mij,mnj->mni", boosts, local)


# ---------------------------------------------------------------------------
# Isometries
# ---------------------------------------------------------------------------

def _minkowski_metric(d: int) -> np.ndarray:
    J = np.eye(d + 1)
    J[0, 0] = -1.0
    return J


def _lorentz_defect(m: np.ndarray) -> float:
    J = _minkowski_metric(m.shape[0] - 1)
    return float(np.max(np.abs(m.T @ J @ m - J)) / max(1.0, float(np.max(np.abs(m))) ** 2))


def _lorentz_orthonormalize(m: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the columns in the Minkowski metric."""
    d = m.shape[0] - 1
    J = _minkowski_metric(d)
    cols = []
    for i in range(d + 1):
        v = m[:, i].copy()
        for j, w in enumerate(cols):
            sign = -1.0 if j == 0 else 1.0
            v -= sign * (w @ J @ v) * w
        v /= math.sqrt(abs(v @ J @ v))
        cols.append(v)
    out = np.stack(cols, axis=1)
    if out[0, 0] < 0:
        out[:, 0] = -out[:, 0]
    return out


@dataclass(frozen=True)
class Isometry:
    """Lorentz matrix acting on hyperboloid points.

    ``depth`` counts the matrix factors accumulated since the last
    re-orthonormalization; composition resets it every ``RENORM_EVERY`` steps.
    """

    matrix: np.ndarray
    depth: int = 1

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GeometryError("isometry matrix must be square")
        if m[0, 0] < 1.0 - ISOMETRY_TOL or _lorentz_defect(m) > ISOMETRY_TOL:
            raise GeometryError("matrix is not an orthochronous Lorentz transformation")
        object.__setattr__(self, "matrix", m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0] - 1


def identity(d: int) -> Isometry:
    return Isometry(np.eye(d + 1), depth=0)


def random_rotation(rng: np.random.Generator, d: int) -> Isometry:
    """Haar-distributed element of the stabilizer of the base point."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    m = np.eye(d + 1)
    m[1:, 1:] = q
    return Isometry(m)


def compose(a: Isometry, b: Isometry) -> Isometry:
    """The isometry ``a o b``."""
    m = a.matrix @ b.matrix
    depth = a.depth + b.depth
    if depth >= RENORM_EVERY:
        m = _lorentz_orthonormalize(m)
        depth = 0
    return Isometry(m, depth)


def apply(a: Isometry, x: np.ndarray) -> np.ndarray:
    """Apply an isometry to one point or a batch of points."""
    y = np.asarray(x, dtype=float) @ a.matrix.T
    return project_to_sheet(y)


def translation_matrices(x: np.ndarray) -> np.ndarray:
    """Boost matrices sending the base point to each ``x`` along the geodesic."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[-1] - 1
    x0 = x[:, 0]
    v = x[:, 1:]
    m = np.empty((x.shape[0], d + 1, d + 1))
    m[:, 0, 0] = x0
    m[:, 0, 1:] = v
    m[:, 1:, 0] = v
    m[:, 1:, 1:] = np.eye(d)[None] + v[:, :, None] * v[:, None, :] / (1.0 + x0)[:, None, None]
    return m


def translation_to(x: np.ndarray) -> Isometry:
    """Hyperbolic translation along the geodesic from the base point to ``x``."""
    x = check_point(x)
    return Isometry(translation_matrices(x)[0])


def random_isometry_into_ball(rng: np.random.Generator, R: float, d: int) -> Isometry:
    """Isometry whose image of the base point is uniform in the ball of radius ``R``."""
    return compose(translation_to(sample_uniform_ball(rng, R, d)), random_rotation(rng, d))


# ---------------------------------------------------------------------------
# Busemann functions and horoballs
# ---------------------------------------------------------------------------

def busemann(z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Busemann function ``ln(-<z, p + u>)`` for a unit direction ``u`` at the base point.

    ``u`` may be given either as a tangent vector (leading zero) or as a unit
    vector of R^d.
    """
    z = np.asarray(z, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.shape[-1] == z.shape[-1]:
        u = u[..., 1:]
    zv = z[..., 1:]
    along = np.sum(zv * u, axis=-1)
    perp2 = np.sum((zv - along[..., None] * u) ** 2, axis=-1)
    # z0 - along == (1 + |z_perp|^2) / (z0 + along) avoids cancellation when along > 0
    arg = np.where(along > 0.0, (1.0 + perp2) / (z[..., 0] + along), z[..., 0] - along)
    return np.log(arg)


@dataclass(frozen=True)
class Horoball:
    """Horoball ``{z : busemann(z, dir) <= -offset}``; ``dir`` is a tangent vector at the base point."""

    dir: np.ndarray
    offset: float

    def contains(self, z: np.ndarray) -> np.ndarray:
        return busemann(z, self.dir) <= -self.offset

    def boundary_point(self) -> np.ndarray:
        """``exp_p(offset * dir)``, the boundary point on the axis of the horoball."""
        v = np.asarray(self.dir, dtype=float)[1:]
        t = float(self.offset)
        out = np.empty(v.size + 1)
        out[0] = math.cosh(t)
        out[1:] = math.sinh(t) * v
        return out


def horoball_hit_prob(s: float, d: int = 2) -> float:
    """Probability that a point at distance ``s`` from the base point lies in a random horoball.

    The horoball has uniform direction and offset ``T`` with ``-T ~ Exp(d-1)``.
    """
    if s < 0:
        raise GeometryError("distance must be non-negative")
    if s == 0.0:
        return 1.0
    cs, ss = math.cosh(s), math.sinh(s)
    # inside the horoball through the base point iff cos(theta) >= tanh(s/2)
    theta0 = math.acos(math.tanh(0.5 * s))
    norm = math.sqrt(math.pi) * math.gamma(0.5 * (d - 1)) / math.gamma(0.5 * d)

    def tail(theta: float) -> float:
        return (cs - ss * math.cos(theta)) ** (-(d - 1)) * math.sin(theta) ** (d - 2)

    val, _ = integrate.quad(tail, theta0, math.pi, **_QUAD_OPTS)
    return float(cap_fraction(math.tanh(0.5 * s), d)) + val / norm


# ---------------------------------------------------------------------------
# Model conversions
# ---------------------------------------------------------------------------

def to_poincare_ball(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / (1.0 + x[..., :1])


def from_poincare_ball(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    n2 = np.sum(b * b, axis=-1, keepdims=True)
    denom = 1.0 - n2
    return np.concatenate([(1.0 + n2) / denom, 2.0 * b / denom], axis=-1)


def to_klein(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 1:] / x[..., :1]


def from_klein(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    x0 = 1.0 / np.sqrt(1.0 - np.sum(k * k, axis=-1, keepdims=True))
    return np.concatenate([x0, x0 * k], axis=-1)


def to_half_space(x: np.ndarray) -> np.ndarray:
    """Upper half-space coordinates; the last coordinate is the height."""
    x = np.asarray(x, dtype=float)
    zd = x[..., -1]
    spatial = x[..., 1:-1]
    # x0 - x_d computed stably as (1 + |x_mid|^2) / (x0 + x_d) when x_d > 0
    mid2 = np.sum(spatial * spatial, axis=-1)
    gap = np.where(zd > 0.0, (1.0 + mid2) / (x[..., 0] + zd), x[..., 0] - zd)
    return np.concatenate([spatial / gap[..., None], (1.0 / gap)[..., None]], axis=-1)


def from_half_space(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    h = y[..., -1]
    lateral = y[..., :-1]
    l2 = np.sum(lateral * lateral, axis=-1)
    x0 = 0.5 * (1.0 / h + h + l2 / h)
    xd = 0.5 * (h + l2 / h - 1.0 / h)
    return np.concatenate([x0[..., None], lateral / h[..., None], xd[..., None]], axis=-1)


def half_space_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Distance in the half-space model, ``2 arsinh(|x - y| / (2 sqrt(x_d y_d)))``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    gap = np.linalg.norm(x - y, axis=-1)
    return 2.0 * np.arcsinh(gap / (2.0 * np.sqrt(x[..., -1] * y[..., -1])))

"""Closed-form and quadrature evaluation of mean, variance and covariance formulas.

All integrals over a single variable use scipy's adaptive Gauss-Kronrod
``quad``; integrals against the grain-radius law use fixed Gauss-Legendre nodes
(see ``RadiusDistribution.quadrature``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from . import hypcore
from .hypcore import ball_volume, intrinsic_volume_ball, omega, renorm_const, sphere_area
from .process import ModelParams

QUAD = dict(epsabs=1e-10, epsrel=1e-10, limit=1000)
_FINE = dict(epsabs=1e-13, epsrel=1e-11, limit=1000)


class NumericError(RuntimeError):
    """Raised when a quadrature fails to converge."""


def _quad(f, a: float, b: float, points=None, opts=QUAD) -> float:
    if b <= a:
        return 0.0
    pts = None
    if points is not None:
        pts = sorted({p for p in points if a < p < b})
        pts = pts or None
    val, err, *rest = integrate.quad(f, a, b, points=pts, full_output=1, **opts)
    if rest and len(rest) > 1 and "roundoff" not in str(rest[1]) and err > 1e3 * max(opts["epsabs"], opts["epsrel"] * abs(val)):
        raise NumericError(f"quadrature did not converge on [{a}, {b}]: {rest[1]}")
    return val


def _cap(c: float, d: int) -> float:
    """Scalar fraction of S^(d-1) with first coordinate >= c."""
    if c <= -1.0:
        return 1.0
    if c >= 1.0:
        return 0.0
    if d == 2:
        return math.acos(c) / math.pi
    if d == 3:
        return 0.5 * (1.0 - c)
    half = 0.5 * special.betainc(0.5 * (d - 1), 0.5, (1.0 - abs(c)) * (1.0 + abs(c)))
    return half if c >= 0 else 1.0 - half


# ---------------------------------------------------------------------------
# Grain moments and mean values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrainMoments:
    """Moments of the typical grain: ``v[j] = E V_j``, renormalized ``v0[j]`` and ``E Vol(B(G,1))^2``."""

    d: int
    v: tuple
    v0: tuple
    vbar2: float


@lru_cache(maxsize=256)
def grain_moments(params: ModelParams) -> GrainMoments:
    d = params.d
    rad = params.radius
    if rad.kind == "uniform":
        a, b = rad.a, rad.b
        v = [_quad(lambda r, j=j: intrinsic_volume_ball(j, r, d), a, b, opts=_FINE) / (b - a) for j in range(d + 1)]
        vbar2 = _quad(lambda r: ball_volume(r + 1.0, d) ** 2, a, b, opts=_FINE) / (b - a)
    else:
        v = [intrinsic_volume_ball(j, rad.b, d) for j in range(d + 1)]
        vbar2 = ball_volume(rad.b + 1.0, d) ** 2
    v0 = tuple(renorm_const(j, d) * v[j] for j in range(d + 1))
    return GrainMoments(d, tuple(v), v0, float(vbar2))


def window_intrinsic_volumes(R: float, d: int) -> tuple:
    """``V_m(B_R)`` for ``m = 0..d``."""
    return tuple(intrinsic_volume_ball(m, R, d) for m in range(d + 1))


def window_renormalized(R: float, d: int) -> tuple:
    """``V_m^0(B_R)`` for ``m = 0..d``."""
    return tuple(renorm_const(m, d) * intrinsic_volume_ball(m, R, d) for m in range(d + 1))


def mean_volume(W_vol: float, gm: GrainMoments, gamma: float) -> float:
    return W_vol * -math.expm1(-gamma * gm.v[gm.d])


def mean_surface(W_vol: float, W_surf: float, gm: GrainMoments, gamma: float) -> float:
    d = gm.d
    e = math.exp(-gamma * gm.v[d])
    return W_vol * gamma * gm.v[d - 1] * e + W_surf * (1.0 - e)


def surface_density(gm: GrainMoments, gamma: float) -> float:
    """Limit of the mean surface in ``B_R`` divided by ``Vol(B_R)``."""
    d = gm.d
    e = math.exp(-gamma * gm.v[d])
    return gamma * gm.v[d - 1] * e + (d - 1) * (1.0 - e)


@lru_cache(maxsize=1024)
def _compositions(s: int, total: int, lo: int, hi: int) -> tuple:
    """All ``s``-tuples with entries in ``lo..hi`` summing to ``total``."""
    if s == 0:
        return ((),) if total == 0 else ()
    out = []
    for first in range(lo, hi + 1):
        rest = total - first
        if (s - 1) * lo <= rest <= (s - 1) * hi:
            out.extend((first,) + tail for tail in _compositions(s - 1, rest, lo, hi))
    return tuple(out)


def _series_coefficient(k: int, m: int, gm: GrainMoments, gamma: float) -> float:
    d = gm.d
    total = 0.0
    for s in range(1, m - k + 1):
        inner = 0.0
        for combo in _compositions(s, s * d + k - m, k, d - 1):
            inner += math.prod(gm.v0[i] for i in combo)
        total += (-1) ** (s - 1) * gamma ** s / math.factorial(s) * inner
    return total


def mean_intrinsic_k0(k: int, W_v0, gm: GrainMoments, gamma: float) -> float:
    """Mean renormalized intrinsic volume ``E V_k^0(Z cap W)`` from the table ``W_v0[m] = V_m^0(W)``."""
    d = gm.d
    if not 0 <= k <= d - 1:
        raise IndexError(f"index {k} outside 0..{d - 1}")
    e = math.exp(-gamma * gm.v[d])
    acc = W_v0[k] * (1.0 - e)
    for m in range(k + 1, d + 1):
        acc += e * W_v0[m] * _series_coefficient(k, m, gm, gamma)
    return acc


def _kappa_ratio(m: int, k: int, d: int) -> float:
    kap = hypcore.kappa
    return kap(m) * kap(d - 1 - m) / (kap(k) * kap(d - 1 - k))


def asymptotic_density_k(k: int, gm: GrainMoments, gamma: float) -> float:
    """Limit of ``E V_k(Z cap B_R) / Vol(B_R)``."""
    d = gm.d
    if not 0 <= k <= d - 1:
        raise IndexError(f"index {k} outside 0..{d - 1}")
    kap = hypcore.kappa
    e = math.exp(-gamma * gm.v[d])
    acc = (d - 1) * (1.0 - e)
    for m in range(k + 1, d + 1):
        if m < d:
            b = (d - 1) * _kappa_ratio(m, k, d)
        else:
            b = d / math.pi * kap(d) / (kap(k) * kap(d - 1 - k))
        acc += e * b * _series_coefficient(k, m, gm, gamma)
    return acc


def mean_euler_2d(W_v1: float, W_v2: float, gm: GrainMoments, gamma: float) -> float:
    """Mean Euler characteristic of ``Z cap W`` in the hyperbolic plane."""
    if gm.d != 2:
        raise ValueError("planar formula needs d = 2")
    _, v1, v2 = gm.v
    e = math.exp(-gamma * v2)
    return (
        (1.0 - e)
        + W_v1 * e * gamma * v1 / (2.0 * math.pi)
        + W_v2 * e * (gamma + gamma * v2 / (2.0 * math.pi) - (gamma * v1) ** 2 / (4.0 * math.pi))
    )


def euler_density_2d(gm: GrainMoments, gamma: float) -> float:
    """Limit of the mean Euler characteristic per unit area."""
    _, v1, v2 = gm.v
    e = math.exp(-gamma * v2)
    return gamma * e - gamma ** 2 * e * v1 ** 2 / (4.0 * math.pi) + gamma * e * (v1 + v2) / (2.0 * math.pi)


def euler_from_renormalized(values0, d: int) -> float:
    """Euler characteristic from renormalized intrinsic volumes (alternating even-index sum)."""
    total = sum((-1) ** l * values0[2 * l] for l in range(d // 2 + 1))
    return 2.0 / omega(d + 1) * total


# ---------------------------------------------------------------------------
# Two-ball intersections
# ---------------------------------------------------------------------------

def _cap_cos(r1: float, r2: float, s: float, rho: float) -> float:
    """Cosine threshold: a point at distance ``rho`` from center 1, at angle theta to
    the direction of center 2 (distance ``s`` away), lies in ball 2 iff cos(theta) >= value."""
    sr, ss = math.sinh(rho), math.sinh(s)
    if sr == 0.0 or ss == 0.0:
        return -math.inf if math.cosh(rho) * math.cosh(s) <= math.cosh(r2) else math.inf
    return (math.cosh(rho) * math.cosh(s) - math.cosh(r2)) / (sr * ss)


def lens_volume(r1: float, r2: float, s: float, d: int = 2) -> float:
    """Volume of ``B(x, r1) cap B(y, r2)`` with ``dist(x, y) = s``."""
    if min(r1, r2) < 0 or s < 0:
        raise ValueError("radii and separation must be non-negative")
    if s >= r1 + r2:
        return 0.0
    if s <= abs(r1 - r2):
        return ball_volume(min(r1, r2), d)
    od = omega(d)

    def shell(rho: float) -> float:
        return od * math.sinh(rho) ** (d - 1) * _cap(_cap_cos(r1, r2, s, rho), d)

    lo = max(0.0, s - r2)
    breaks = [abs(s - r2), r2 - s]
    inner = ball_volume(r2 - s, d) if r2 > s else 0.0
    start = max(lo, r2 - s if r2 > s else 0.0)
    return inner + _quad(shell, start, r1, points=breaks, opts=_FINE)


def lens_surface(r1: float, r2: float, s: float, d: int = 2) -> float:
    """Boundary area of ``B(x, r1) cap B(y, r2)`` with ``dist(x, y) = s``."""
    if min(r1, r2) < 0 or s < 0:
        raise ValueError("radii and separation must be non-negative")
    if s >= r1 + r2:
        return 0.0
    if s <= abs(r1 - r2):
        return sphere_area(min(r1, r2), d)
    return (
        sphere_area(r1, d) * _cap(_cap_cos(r1, r2, s, r1), d)
        + sphere_area(r2, d) * _cap(_cap_cos(r2, r1, s, r2), d)
    )


# ---------------------------------------------------------------------------
# Covariogram and tabulated kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariogramTable:
    """Mean covariogram ``C(s)`` on ``[0, 2 r_max]`` with monotone cubic interpolation."""

    grid: np.ndarray
    values: np.ndarray
    interp: PchipInterpolator = field(repr=False)

    @property
    def support(self) -> float:
        return float(self.grid[-1])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.interp(np.clip(s, 0.0, self.support))
        return np.where(s >= self.support, 0.0, np.maximum(out, 0.0))


def _table(grid: np.ndarray, values: np.ndarray) -> CovariogramTable:
    return CovariogramTable(grid, values, PchipInterpolator(grid, values))


def _grid(top: float, n: int) -> np.ndarray:
    # cluster nodes near both ends where the kernels have square-root type behaviour
    t = np.linspace(0.0, 1.0, n)
    return top * 0.5 * (1.0 - np.cos(math.pi * t))


def covariogram(params: ModelParams, n_grid: int = 401) -> CovariogramTable:
    """``C(s) = E lens_volume(U, U, s)`` tabulated for the radius law of ``params``."""
    return _covariogram_table(params.d, params.radius, n_grid)


@lru_cache(maxsize=64)
def _covariogram_table(d: int, rad, n_grid: int) -> CovariogramTable:
    grid = _grid(2.0 * rad.r_max, n_grid)
    if rad.kind == "fixed":
        values = np.array([lens_volume(rad.b, rad.b, s, d) for s in grid])
    else:
        a, b = rad.a, rad.b
        values = np.array([
            _quad(lambda u, s=s: lens_volume(u, u, s, d), max(a, 0.5 * s), b) / (b - a) for s in grid
        ])
    values[-1] = 0.0
    values = np.minimum.accumulate(values)
    return _table(grid, values)


def covariogram_exact(params: ModelParams, s: float) -> float:
    """Untabulated ``C(s)``; slower, used for cross-checks."""
    d = params.d
    rad = params.radius
    if rad.kind == "fixed":
        return lens_volume(rad.b, rad.b, s, d)
    return _quad(lambda u: lens_volume(u, u, s, d), max(rad.a, 0.5 * s), rad.b) / (rad.b - rad.a)


@lru_cache(maxsize=64)
def _lens_table(R: float, top: float, d: int, n_grid: int = 401) -> CovariogramTable:
    grid = _grid(top, n_grid)
    return _table(grid, np.array([lens_volume(R, R, s, d) for s in grid]))


@lru_cache(maxsize=16)
def _hit_prob_table(top: float, d: int, n_grid: int = 401) -> CovariogramTable:
    grid = _grid(top, n_grid)
    return _table(grid, np.array([hypcore.horoball_hit_prob(s, d) for s in grid]))


# ---------------------------------------------------------------------------
# Variances
# ---------------------------------------------------------------------------

def _radial(params: ModelParams, kernel, minus_one: bool = True) -> float:
    """``omega_d int_0^{2 r_max} (e^{gamma C(s)} - 1) kernel(s) sinh^{d-1}(s) ds``."""
    d = params.d
    gamma = params.gamma
    cov = covariogram(params)
    top = cov.support

    def f(s: float) -> float:
        c = float(cov(s))
        g = math.expm1(gamma * c) if minus_one else math.exp(gamma * c)
        return g * kernel(s) * math.sinh(s) ** (d - 1)

    return omega(d) * _quad(f, 0.0, top)


def var_volume_exact(params: ModelParams, R: float) -> float:
    """Variance of ``Vol(Z cap B_R)``."""
    if R <= 0:
        raise ValueError("window radius must be positive")
    d = params.d
    e2 = math.exp(-2.0 * params.gamma * grain_moments(params).v[d])
    return e2 * _radial(params, lambda s: lens_volume(R, R, s, d))


def var_volume_asymptotic(params: ModelParams) -> float:
    """Limit of ``Var Vol(Z cap B_R) / Vol(B_R)``."""
    d = params.d
    e2 = math.exp(-2.0 * params.gamma * grain_moments(params).v[d])
    return e2 * _radial(params, lambda s: hypcore.horoball_hit_prob(s, d))


def var_volume_no_horoball(params: ModelParams) -> float:
    """The asymptotic variance integral with the horoball probability replaced by 1."""
    d = params.d
    e2 = math.exp(-2.0 * params.gamma * grain_moments(params).v[d])
    return e2 * _radial(params, lambda s: 1.0)


# ---------------------------------------------------------------------------
# Horoball integrals
# ---------------------------------------------------------------------------

def horoball_pair_weight(
    y: np.ndarray,
    z: np.ndarray,
    n_mc: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Invariant horoball measure of the horoballs containing both ``y`` and ``z``.

    The offset integral is done in closed form, leaving
    ``(1/omega_d) int_S exp(-(d-1) max(b_u(y), b_u(z))) du``.  The direction
    integral uses adaptive quadrature for ``d = 2``, a kink-aligned adaptive rule
    for ``d = 3`` and a Monte Carlo average when ``n_mc`` is given or ``d >= 4``.
    """
    y = hypcore.check_point(y)
    z = hypcore.check_point(z)
    d = y.shape[-1] - 1

    def weight(u: np.ndarray) -> np.ndarray:
        b = np.maximum(hypcore.busemann(y, u), hypcore.busemann(z, u))
        return np.exp(-(d - 1) * b)

    if n_mc is None and d == 2:
        f = lambda phi: float(weight(np.array([math.cos(phi), math.sin(phi)])))
        # kinks where the two Busemann values cross; quad subdivides adaptively around them
        return _quad(f, 0.0, 2.0 * math.pi, opts=_FINE) / omega(2)
    if n_mc is None and d == 3:
        return _pair_weight_sphere(y, z, weight) / omega(3)
    rng = rng if rng is not None else np.random.default_rng(0)
    n = n_mc or 100_000
    return float(np.mean(weight(hypcore.sample_directions(rng, d, n))))


# ---------------------------------------------------------------------------
# Surface-volume covariance
# ---------------------------------------------------------------------------

def _pair_weight_sphere(y: np.ndarray, z: np.ndarray, weight) -> float:
    """Integral of ``weight`` over the unit 2-sphere of directions.

    The two Busemann values coincide on the plane section
    ``(z_s - y_s) . u = z_0 - y_0``, a circle.  Taking its normal as the polar
    axis puts the kink at a fixed polar angle.  Each side is integrated
    adaptively in ``cos(theta)`` with a periodic trapezoid rule in the azimuth;
    the weight peaks with width about ``1/z_0``, which sets the azimuth count.
    """
    w = z[1:] - y[1:]
    norm = float(np.linalg.norm(w))
    if norm > 1e-14:
        axis = w / norm
        kink = float(np.clip((z[0] - y[0]) / norm, -1.0, 1.0))
    else:
        axis = np.array([0.0, 0.0, 1.0])
        kink = 1.0
    # orthonormal frame (e1, e2, axis)
    helper = np.eye(3)[int(np.argmin(np.abs(axis)))]
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    n_azimuth = max(128, int(64 * max(y[0], z[0])))
    phi = 2.0 * math.pi * np.arange(n_azimuth) / n_azimuth
    ring = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2

    def ring_mean(t: float) -> float:
        st = math.sqrt(max(1.0 - t * t, 0.0))
        return float(np.mean(weight(st * ring + t * axis)))

    total = _quad(ring_mean, -1.0, kink, opts=_FINE) + _quad(ring_mean, kink, 1.0, opts=_FINE)
    return 2.0 * math.pi * total


@dataclass(frozen=True)
class CovarianceResult:
    value: float
    std_error: float
    terms: tuple
    term_std_errors: tuple
    warning: str | None = None


def _term2_mc(params: ModelParams, kernel, n_mc: int, rng: np.random.Generator, pair=None):
    """MC estimate of ``E int_{dG} int_G e^{gamma C(y,z)} K(y,z) dz dy`` over the typical grain.

    The radius mark is stratified: each Gauss node of the radius law receives
    an equal share of the samples.  ``kernel`` maps distances to weights; if
    ``pair`` is given it maps point batches ``(y, z)`` to weights instead.
    """
    d = params.d
    gamma = params.gamma
    cov = covariogram(params)
    nodes, weights = params.radius.quadrature(16)
    per = max(n_mc // len(nodes), 2)
    means, variances = [], []
    for r in nodes:
        s_z = hypcore.sample_radius(rng, r, d, per)
        z = hypcore.point_from_polar(s_z, hypcore.sample_directions(rng, d, per))
        y = hypcore.point_from_polar(np.full(per, r), hypcore.sample_directions(rng, d, per))
        sep = hypcore.dist(y, z, check=False)
        k = pair(y, z) if pair is not None else kernel(sep)
        vals = np.exp(gamma * cov(sep)) * k * sphere_area(r, d) * ball_volume(r, d)
        means.append(vals.mean())
        variances.append(vals.var(ddof=1) / per)
    mean = float(np.dot(weights, means))
    se = float(math.sqrt(np.dot(weights ** 2, variances)))
    return mean, se


def _term2_quad(params: ModelParams, kernel) -> float:
    """Deterministic counterpart of ``_term2_mc`` by nested radial quadrature."""
    d = params.d
    gamma = params.gamma
    cov = covariogram(params)
    nodes, weights = params.radius.quadrature(16)
    total = 0.0
    for r, w in zip(nodes, weights):
        cr = 1.0 / math.tanh(r)

        def f(s: float) -> float:
            shell = omega(d) * math.sinh(s) ** (d - 1) * _cap(cr * math.tanh(0.5 * s), d)
            return math.exp(gamma * float(cov(s))) * kernel(s) * shell

        total += w * sphere_area(r, d) * _quad(f, 0.0, 2.0 * r)
    return total


def _finish(terms, ses, n_mc: int, rel_tol: float = 0.1) -> CovarianceResult:
    value = float(sum(terms))
    se = float(math.sqrt(sum(s * s for s in ses)))
    warning = None
    mc_terms = [(t, s) for t, s in zip(terms, ses) if s > 0]
    if any(s > rel_tol * abs(t) for t, s in mc_terms):
        warning = f"Monte Carlo standard error above {rel_tol:.0%} of a term value at n_mc={n_mc}"
    return CovarianceResult(value, se, tuple(terms), tuple(ses), warning)


def cov_surf_vol_local(
    params: ModelParams,
    R: float,
    n_mc: int = 200_000,
    seed: int = 0,
    method: str = "mc",
) -> CovarianceResult:
    """Covariance of surface area and volume of ``Z cap B_R`` as a sum of three terms."""
    if n_mc < 10_000 and method == "mc":
        raise ValueError("n_mc must be at least 1e4")
    d = params.d
    gamma = params.gamma
    gm = grain_moments(params)
    e2 = math.exp(-2.0 * gamma * gm.v[d])
    term1 = -gamma * gm.v[d - 1] * var_volume_exact(params, R)
    lens = _lens_table(float(R), 2.0 * params.radius.r_max, d)
    if method == "mc":
        mean, se = _term2_mc(params, lens, n_mc, np.random.default_rng(seed))
    else:
        mean, se = _term2_quad(params, lambda s: lens_volume(R, R, s, d)), 0.0
    term2, se2 = e2 * gamma * mean, e2 * gamma * se
    cr = 1.0 / math.tanh(R)
    term3 = e2 * sphere_area(R, d) * _radial(params, lambda s: _cap(cr * math.tanh(0.5 * s), d))
    return _finish((term1, term2, term3), (0.0, se2, 0.0), n_mc)


def cov_surf_vol_asymptotic(
    params: ModelParams,
    n_mc: int = 200_000,
    seed: int = 0,
    method: str = "mc",
) -> CovarianceResult:
    """Limit of the surface-volume covariance of ``Z cap B_R`` divided by ``Vol(B_R)``."""
    if n_mc < 10_000 and method == "mc":
        raise ValueError("n_mc must be at least 1e4")
    d = params.d
    gamma = params.gamma
    gm = grain_moments(params)
    e2 = math.exp(-2.0 * gamma * gm.v[d])
    term1 = -gamma * gm.v[d - 1] * var_volume_asymptotic(params)
    rng = np.random.default_rng(seed)
    if method == "mc":
        def pair(y, z):
            # one random direction per sample; the offset integral is closed form
            u = hypcore.sample_directions(rng, d, y.shape[0])
            b = np.maximum(hypcore.busemann(y, u), hypcore.busemann(z, u))
            return np.exp(-(d - 1) * b)

        mean, se = _term2_mc(params, None, n_mc, rng, pair=pair)
    else:
        table = _hit_prob_table(2.0 * params.radius.r_max, d)
        mean, se = _term2_quad(params, lambda s: float(table(s))), 0.0
    term2, se2 = e2 * gamma * mean, e2 * gamma * se
    term3 = (d - 1) * e2 * _radial(params, lambda s: _cap(math.tanh(0.5 * s), d))
    return _finish((term1, term2, term3), (0.0, se2, 0.0), n_mc)


# ---------------------------------------------------------------------------
# Kinematic formula checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KinematicReport:
    k: int
    d: int
    r_a: float
    r_b: float
    lhs: float
    rhs: float
    rel_error: float


def kinematic_check(k: int, r_a: float, r_b: float, d: int = 2) -> KinematicReport:
    """Compare both sides of the kinematic formula for two balls.

    The left side integrates the functional of the lens over all relative
    positions; the right side is the convolution of renormalized intrinsic
    volumes.
    """
    if k == d:
        phi = lambda s: lens_volume(r_a, r_b, s, d)
    elif k == d - 1:
        phi = lambda s: renorm_const(d - 1, d) * lens_surface(r_a, r_b, s, d)
    elif d == 2 and k == 0:
        # V_0 of a nonempty convex lens is 2 pi + area
        phi = lambda s: 2.0 * math.pi + lens_volume(r_a, r_b, s, d)
    else:
        raise ValueError(f"kinematic check not available for k={k}, d={d}")
    lhs = omega(d) * _quad(lambda s: phi(s) * math.sinh(s) ** (d - 1), 0.0, r_a + r_b, points=[abs(r_a - r_b)], opts=_FINE)
    a0 = [renorm_const(i, d) * intrinsic_volume_ball(i, r_a, d) for i in range(d + 1)]
    b0 = [renorm_const(j, d) * intrinsic_volume_ball(j, r_b, d) for j in range(d + 1)]
    rhs = sum(a0[i] * b0[d + k - i] for i in range(k, d + 1))
    return KinematicReport(k, d, r_a, r_b, lhs, rhs, abs(lhs - rhs) / abs(rhs))

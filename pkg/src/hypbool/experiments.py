"""Replicate harness comparing simulated functionals with their predicted moments."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from . import functionals, hypcore, theory
from .process import ModelParams, RadiusDistribution, ResourceError, sample_realization, stream

FUNCTIONALS = ("volume", "surface", "euler", "v0")
AD_LEVEL = 1.0
NOTES = (
    "Each replicate value carries Monte Carlo estimator noise. The empirical variance of the "
    "replicate values equals the between-realization variance plus the mean squared estimator "
    "standard error; mean z-scores use the total empirical variance, and variance comparisons "
    "subtract the mean squared estimator standard error.",
    "Normality is assessed by the Anderson-Darling test of the limit law; convergence rates are not tested.",
)


class DegenerateInputError(ValueError):
    """Raised when a statistical test receives constant data."""


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 2
    gamma: float = 0.5
    radius: RadiusDistribution = RadiusDistribution.fixed(1.0)
    window_R: float = 4.0
    replicates: int = 200
    master_seed: int = 0
    mc_samples: int | None = 100_000
    surface_samples: int = 200
    boundary_samples: int = 10_000
    functionals: tuple = ("volume",)
    threads: int | None = None

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.d, self.gamma, self.radius)


@dataclass(frozen=True)
class ReplicateRecord:
    seed: int
    R: float
    values: dict
    error: str | None = None


@dataclass
class FunctionalSummary:
    n: int
    empirical_mean: float
    empirical_var: float
    mc_noise_var: float
    theory_mean: float | None
    theory_var: float | None
    z_scores: dict
    normality_stat: float | None = None
    normality_pass: bool | None = None
    var_ci99: tuple | None = None


@dataclass
class SummaryReport:
    config: dict
    functionals: dict
    runtime: float
    errors: list = field(default_factory=list)
    notes: tuple = NOTES

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def replicate_seed(master_seed: int, index: int) -> int:
    """64-bit seed of replicate ``index``; ``stream(replicate_seed(...))`` reproduces it."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def thread_count(config: ExperimentConfig) -> int:
    if config.threads:
        return max(1, int(config.threads))
    env = os.environ.get("HYPBOOL_THREADS")
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# Replicates
# ---------------------------------------------------------------------------

def simulate_replicate(config: ExperimentConfig, index: int, R: float | None = None) -> ReplicateRecord:
    R = config.window_R if R is None else R
    seed = replicate_seed(config.master_seed, index)
    rng = stream(seed)
    try:
        real = sample_realization(rng, config.params, R)
        values = {}
        vol = None
        if "volume" in config.functionals or "v0" in config.functionals:
            vol = functionals.estimate_volume(real, config.mc_samples or 10_000, rng)
        if "volume" in config.functionals:
            values["volume"] = vol
        if "surface" in config.functionals:
            values["surface"] = functionals.estimate_surface(real, config.surface_samples, rng, config.boundary_samples)
        if "euler" in config.functionals or "v0" in config.functionals:
            chi = functionals.euler_char_2d(real)
            if "euler" in config.functionals:
                values["euler"] = functionals.FunctionalEstimate(float(chi), 0.0, 0)
            if "v0" in config.functionals:
                values["v0"] = functionals.FunctionalEstimate(2.0 * math.pi * chi + vol.value, vol.std_error, vol.n_samples)
        return ReplicateRecord(seed, float(R), values)
    except ResourceError as exc:
        return ReplicateRecord(seed, float(R), {}, error=str(exc))


def _run_one(args):
    config, index, R = args
    return simulate_replicate(config, index, R)


def run_replicates(config: ExperimentConfig, R: float | None = None, start: int = 0, count: int | None = None) -> list[ReplicateRecord]:
    """Replicates ``start .. start+count-1``, in index order regardless of thread count."""
    count = config.replicates if count is None else count
    jobs = [(config, start + i, R) for i in range(count)]
    workers = thread_count(config)
    if workers == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, count // (4 * workers))))


def tune_mc_samples(config: ExperimentConfig, pilot: int = 20, n0: int = 5_000, cap: int = 2_000_000) -> int:
    """Hit-or-miss sample size making estimator noise at most 10% of the between-replicate SD."""
    trial = replace(config, mc_samples=n0, functionals=("volume",))
    recs = [r for r in run_replicates(trial, start=10**9, count=pilot) if r.error is None]
    vals = np.array([r.values["volume"].value for r in recs])
    noise = np.array([r.values["volume"].std_error ** 2 for r in recs])
    between = max(vals.var(ddof=1) - noise.mean(), 1e-300)
    needed = n0 * noise.mean() / (0.01 * between)
    return int(min(cap, max(n0, math.ceil(needed))))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    critical_value: float
    passed: bool


def clt_test(values: Sequence[float], level: float = AD_LEVEL) -> NormalityResult:
    """Anderson-Darling test of normality with estimated mean and variance."""
    x = np.asarray(values, dtype=float)
    if x.size < 100:
        raise ValueError("normality test needs at least 100 values")
    if np.ptp(x) == 0.0:
        raise DegenerateInputError("values are constant")
    z = (x - x.mean()) / x.std(ddof=1)
    res = stats.anderson(z, dist="norm")
    crit = float(res.critical_values[list(res.significance_level).index(level)])
    return NormalityResult(float(res.statistic), crit, bool(res.statistic < crit))


def bootstrap_var_ci(values: np.ndarray, rng: np.random.Generator, n_boot: int = 1000, level: float = 0.99, offset: float = 0.0):
    """Percentile bootstrap interval for ``Var(values) - offset``."""
    values = np.asarray(values, dtype=float)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    boots = values[idx].var(axis=1, ddof=1) - offset
    alpha = 0.5 * (1.0 - level)
    return float(np.quantile(boots, alpha)), float(np.quantile(boots, 1.0 - alpha))


def _z(diff: float, se: float, scale: float) -> float:
    floor = 1e-12 * max(1.0, abs(scale))
    return 0.0 if diff == 0.0 else diff / max(se, floor)


def _theory(config: ExperimentConfig, name: str, R: float):
    params = config.params
    d = config.d
    gm = theory.grain_moments(params)
    g = config.gamma
    vol = hypcore.ball_volume(R, d)
    if name == "volume":
        return theory.mean_volume(vol, gm, g), (theory.var_volume_exact(params, R) if g > 0 else 0.0)
    if name == "surface":
        return theory.mean_surface(vol, hypcore.sphere_area(R, d), gm, g), None
    if name == "euler":
        return theory.mean_euler_2d(hypcore.sphere_area(R, 2), vol, gm, g), None
    if name == "v0":
        return theory.mean_intrinsic_k0(0, theory.window_renormalized(R, 2), gm, g), None
    raise KeyError(name)


def summarize(config: ExperimentConfig, records: list[ReplicateRecord], R: float, seed: int = 0) -> dict:
    out = {}
    good = [r for r in records if r.error is None]
    rng = np.random.default_rng(seed)
    for name in config.functionals:
        vals = np.array([r.values[name].value for r in good])
        noise = np.array([r.values[name].std_error ** 2 for r in good])
        n = vals.size
        mean = math.fsum(vals) / n
        var = math.fsum((vals - mean) ** 2) / (n - 1) if n > 1 else 0.0
        mc_var = math.fsum(noise) / n
        t_mean, t_var = _theory(config, name, R)
        z = {"mean": _z(mean - t_mean, math.sqrt(var / n), t_mean)}
        ci = None
        if t_var is not None and n > 1 and var > 0:
            ci = bootstrap_var_ci(vals, rng, offset=mc_var)
            z["var_in_ci99"] = bool(ci[0] <= t_var <= ci[1])
        summary = FunctionalSummary(n, mean, var, mc_var, t_mean, t_var, z, var_ci99=ci)
        if n >= 100 and var > 0:
            res = clt_test(vals)
            summary.normality_stat, summary.normality_pass = res.statistic, res.passed
        out[name] = summary
    return out


def run_experiment(config: ExperimentConfig) -> tuple[SummaryReport, list[ReplicateRecord]]:
    """Simulate all replicates and compare them with the predicted moments."""
    t0 = time.perf_counter()
    if config.mc_samples is None and config.gamma > 0:
        config = replace(config, mc_samples=tune_mc_samples(config))
    records = run_replicates(config)
    errors = [f"replicate seed {r.seed}: {r.error}" for r in records if r.error]
    funcs = summarize(config, records, config.window_R, config.master_seed) if len(errors) < len(records) else {}
    report = SummaryReport(config_dict(config), funcs, time.perf_counter() - t0, errors)
    return report, records


def config_dict(config: ExperimentConfig) -> dict:
    out = asdict(config)
    out["radius"] = asdict(config.radius)
    out["functionals"] = list(config.functionals)
    return out


def write_records_csv(records: list[ReplicateRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "R", "functional", "value", "se"])
        for rec in records:
            for name, est in rec.values.items():
                w.writerow([rec.seed, repr(rec.R), name, f"{est.value:.17g}", f"{est.std_error:.17g}"])


# ---------------------------------------------------------------------------
# Variance scan and joint normality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    R: float
    ratio: float
    ci_low: float
    ci_high: float
    exact_ratio: float
    asymptotic: float
    in_band: bool


def variance_scan(config: ExperimentConfig, R_grid: Sequence[float], band: float = 0.5, n_boot: int = 1000) -> list[ScanRow]:
    """Normalized volume variance per window radius with bootstrap 99% intervals."""
    if list(R_grid) != sorted(R_grid):
        raise ValueError("R_grid must be increasing")
    params = config.params
    asym = theory.var_volume_asymptotic(params)
    rng = np.random.default_rng(config.master_seed)
    cfg = replace(config, functionals=("volume",))
    rows = []
    for R in R_grid:
        recs = [r for r in run_replicates(cfg, R) if r.error is None]
        vals = np.array([r.values["volume"].value for r in recs])
        noise = np.mean([r.values["volume"].std_error ** 2 for r in recs])
        vol = hypcore.ball_volume(R, config.d)
        ratio = (vals.var(ddof=1) - noise) / vol
        lo, hi = bootstrap_var_ci(vals, rng, n_boot, offset=noise)
        rows.append(ScanRow(
            float(R), float(ratio), lo / vol, hi / vol,
            theory.var_volume_exact(params, R) / vol, asym,
            bool((1.0 - band) * asym <= ratio <= (1.0 + band) * asym),
        ))
    return rows


@dataclass(frozen=True)
class MultivariateReport:
    skipped: bool
    n: int = 0
    correlation: float = float("nan")
    theory_correlation: float = float("nan")
    correlation_z: float = float("nan")
    volume_normality: NormalityResult | None = None
    surface_normality: NormalityResult | None = None
    passed: bool = False
    notice: str | None = None


def multivariate_check(config: ExperimentConfig, n_mc: int = 200_000) -> MultivariateReport:
    """Joint behaviour of volume and surface: correlation against the predicted one and marginal normality.

    The predicted correlation combines the asymptotic covariance and volume
    variance (scaled by the window volume) with the empirical surface variance,
    since no surface-variance formula is implemented.
    """
    if config.replicates < 500:
        raise ValueError("joint check needs at least 500 replicates")
    params = config.params
    if config.gamma <= 0 or config.gamma * theory.grain_moments(params).v[config.d] < 1e-6:
        return MultivariateReport(True, notice="intensity too small for a non-degenerate joint law")
    cfg = replace(config, functionals=("volume", "surface"))
    recs = [r for r in run_replicates(cfg) if r.error is None]
    vol = np.array([r.values["volume"].value for r in recs])
    surf = np.array([r.values["surface"].value for r in recs])
    vol_noise = np.mean([r.values["volume"].std_error ** 2 for r in recs])
    surf_noise = np.mean([r.values["surface"].std_error ** 2 for r in recs])
    n = vol.size
    corr = float(np.corrcoef(vol, surf)[0, 1])
    W = hypcore.ball_volume(config.window_R, config.d)
    cov = theory.cov_surf_vol_asymptotic(params, n_mc=n_mc, seed=config.master_seed).value * W
    var_v = theory.var_volume_asymptotic(params) * W
    # estimator noise inflates the empirical variances but not the covariance
    var_s = surf.var(ddof=1) - surf_noise
    rho = cov / math.sqrt(var_v * var_s)
    attenuation = math.sqrt(var_v / (var_v + vol_noise)) * math.sqrt(var_s / (var_s + surf_noise))
    rho_obs = max(-0.999999, min(0.999999, rho * attenuation))
    z = (math.atanh(corr) - math.atanh(rho_obs)) * math.sqrt(n - 3)
    nv, ns = clt_test(vol), clt_test(surf)
    return MultivariateReport(False, n, corr, rho_obs, float(z), nv, ns, bool(abs(z) <= 3.0 and nv.passed and ns.passed))

"""Command-line front end.

Configuration files are flat ``key = value`` text with ``#`` comments, e.g.::

    d = 2
    grains_per_window = 500
    window = 5
    radius = uniform 0 1
    window_R = 5
    replicates = 200
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import covering, experiments, hypcore, theory
from .experiments import ExperimentConfig
from .process import RadiusDistribution, sample_realization, stream

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
POLYLINE_POINTS = 64

VALID_KEYS = (
    "d", "gamma", "grains_per_window", "window", "radius", "window_R", "replicates",
    "master_seed", "mc_samples", "surface_samples", "boundary_samples", "functionals",
    "threads", "out_json", "out_csv", "out_dump",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    experiment: ExperimentConfig
    out_json: str | None = None
    out_csv: str | None = None
    out_dump: str | None = None


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _parse_radius(text: str) -> RadiusDistribution:
    parts = text.split()
    try:
        if parts[0] == "fixed" and len(parts) == 2:
            return RadiusDistribution.fixed(float(parts[1]))
        if parts[0] == "uniform" and len(parts) == 3:
            return RadiusDistribution.uniform(float(parts[1]), float(parts[2]))
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad radius specification {text!r}: {exc}") from exc
    raise ConfigError(f"radius must be 'fixed r' or 'uniform a b', got {text!r}")


def parse_config(text: str) -> Config:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in VALID_KEYS:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(VALID_KEYS)}")
        raw[key] = value
    try:
        d = int(raw.get("d", 2))
        radius = _parse_radius(raw.get("radius", "fixed 1"))
        if "gamma" in raw:
            gamma = float(raw["gamma"])
        elif "grains_per_window" in raw:
            gamma = float(raw["grains_per_window"]) / hypcore.ball_volume(float(raw.get("window", 5)), d)
        else:
            raise ConfigError("either gamma or grains_per_window must be given")
        mc = raw.get("mc_samples", "100000")
        exp = ExperimentConfig(
            d=d,
            gamma=gamma,
            radius=radius,
            window_R=float(raw.get("window_R", 4)),
            replicates=int(raw.get("replicates", 200)),
            master_seed=int(raw.get("master_seed", 0)),
            mc_samples=None if mc == "auto" else int(mc),
            surface_samples=int(raw.get("surface_samples", 200)),
            boundary_samples=int(raw.get("boundary_samples", 10000)),
            functionals=tuple(raw.get("functionals", "volume").replace(",", " ").split()),
            threads=int(raw["threads"]) if "threads" in raw else None,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if d < 2:
        raise ConfigError("d must be at least 2")
    if gamma < 0:
        raise ConfigError("gamma must be non-negative")
    if exp.replicates < 1:
        raise ConfigError("replicates must be at least 1")
    unknown = set(exp.functionals) - set(experiments.FUNCTIONALS)
    if unknown:
        raise ConfigError(f"unknown functionals {sorted(unknown)}; valid: {', '.join(experiments.FUNCTIONALS)}")
    if d != 2 and {"euler", "v0"} & set(exp.functionals):
        raise ConfigError("euler and v0 are available for d = 2 only")
    return Config(exp, raw.get("out_json"), raw.get("out_csv"), raw.get("out_dump"))


def format_config(cfg: Config) -> str:
    e = cfg.experiment
    rad = e.radius
    radius = f"fixed {fmt(rad.b)}" if rad.kind == "fixed" else f"uniform {fmt(rad.a)} {fmt(rad.b)}"
    lines = [
        f"d = {e.d}",
        f"gamma = {fmt(e.gamma)}",
        f"radius = {radius}",
        f"window_R = {fmt(e.window_R)}",
        f"replicates = {e.replicates}",
        f"master_seed = {e.master_seed}",
        f"mc_samples = {'auto' if e.mc_samples is None else e.mc_samples}",
        f"surface_samples = {e.surface_samples}",
        f"boundary_samples = {e.boundary_samples}",
        f"functionals = {' '.join(e.functionals)}",
    ]
    if e.threads is not None:
        lines.append(f"threads = {e.threads}")
    for key in ("out_json", "out_csv", "out_dump"):
        if getattr(cfg, key):
            lines.append(f"{key} = {getattr(cfg, key)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------------------
# Realization dump
# ---------------------------------------------------------------------------

def _boundary_directions(d: int) -> np.ndarray:
    if d == 2:
        t = 2.0 * math.pi * np.arange(POLYLINE_POINTS) / POLYLINE_POINTS
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    # Fibonacci points on the sphere
    i = np.arange(POLYLINE_POINTS) + 0.5
    z = 1.0 - 2.0 * i / POLYLINE_POINTS
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def dump_realization(cfg: Config, path=None) -> Path:
    """Write one realization as Poincare-ball centers, radii and boundary polylines."""
    e = cfg.experiment
    if e.d not in (2, 3):
        raise ConfigError("realization dumps support d = 2 or d = 3")
    path = Path(path or cfg.out_dump or "realization.txt")
    seed = experiments.replicate_seed(e.master_seed, 0)
    real = sample_realization(stream(seed), e.params, e.window_R)
    dirs = _boundary_directions(e.d)
    header = ["# hypbool realization"] + ["# " + line for line in format_config(cfg).splitlines()]
    header += [f"# seed = {seed}", f"# grains = {len(real)}",
               "# columns: center (Poincare ball), hyperbolic radius, then "
               f"{POLYLINE_POINTS} boundary points (Poincare ball)"]
    rows = []
    for c, r in zip(real.centers, real.radii):
        local = hypcore.point_from_polar(np.full(POLYLINE_POINTS, r), dirs)
        boundary = local @ hypcore.translation_matrices(c)[0].T
        err = np.max(np.abs(hypcore.dist(boundary, c[None], check=False) - r))
        if err > 1e-8:
            raise RuntimeError(f"boundary self-check failed: distance error {err:.3g}")
        poincare = hypcore.to_poincare_ball(boundary)
        if np.any(np.linalg.norm(poincare, axis=1) >= 1.0):
            raise RuntimeError("boundary point left the Poincare ball")
        fields = list(hypcore.to_poincare_ball(c)) + [r] + list(poincare.ravel())
        rows.append(" ".join(fmt(v) for v in fields))
    path.write_text("\n".join(header + rows) + "\n")
    return path


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _theory_table(e: ExperimentConfig) -> dict:
    params = e.params
    gm = theory.grain_moments(params)
    d, g, R = e.d, e.gamma, e.window_R
    W = hypcore.ball_volume(R, d)
    table = {
        "gamma": g,
        "grain_moments_v": list(gm.v),
        "gamma_v_d": g * gm.v[d],
        "volume_fraction": 1.0 - math.exp(-g * gm.v[d]),
        "window_volume": W,
        "mean_volume": theory.mean_volume(W, gm, g),
        "mean_surface": theory.mean_surface(W, hypcore.sphere_area(R, d), gm, g),
        "surface_density": theory.surface_density(gm, g),
        "density_k": [theory.asymptotic_density_k(k, gm, g) for k in range(d)],
    }
    if d == 2:
        table["mean_euler"] = theory.mean_euler_2d(hypcore.sphere_area(R, 2), W, gm, g)
        table["euler_density"] = theory.euler_density_2d(gm, g)
    return table


def _print_table(table: dict) -> None:
    for key, value in table.items():
        if isinstance(value, (list, tuple)):
            print(f"{key} = {' '.join(fmt(v) for v in value)}")
        else:
            print(f"{key} = {fmt(value)}")


def cmd_theory(args) -> int:
    cfg = load_config(args.config)
    table = _theory_table(cfg.experiment)
    if args.variance:
        p = cfg.experiment.params
        table["var_volume_exact"] = theory.var_volume_exact(p, cfg.experiment.window_R)
        table["var_volume_asymptotic"] = theory.var_volume_asymptotic(p)
        table["var_volume_no_horoball"] = theory.var_volume_no_horoball(p)
    _print_table(table)
    return EXIT_OK


def _report_passes(report: experiments.SummaryReport) -> bool:
    ok = not report.errors
    for summary in report.functionals.values():
        ok &= abs(summary.z_scores["mean"]) <= 3.0
        ok &= summary.z_scores.get("var_in_ci99", True)
    return bool(ok)


def _emit_report(report, records, cfg: Config, out_json=None, out_csv=None) -> None:
    text = report.to_json()
    out_json = out_json or cfg.out_json
    out_csv = out_csv or cfg.out_csv
    if out_json:
        Path(out_json).write_text(text + "\n")
    else:
        print(text)
    if out_csv and records is not None:
        experiments.write_records_csv(records, out_csv)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    report, records = experiments.run_experiment(cfg.experiment)
    _emit_report(report, records, cfg, args.json, args.csv)
    return EXIT_OK if _report_passes(report) else EXIT_FAIL


def cmd_report(args) -> int:
    """Rebuild a summary report from a replicate CSV written by ``simulate``."""
    cfg = load_config(args.config)
    e = cfg.experiment
    rows: dict = {}
    with open(args.records, newline="") as fh:
        for row in csv.DictReader(fh):
            est = experiments.functionals.FunctionalEstimate(float(row["value"]), float(row["se"]), 0)
            rows.setdefault((int(row["seed"]), float(row["R"])), {})[row["functional"]] = est
    records = [experiments.ReplicateRecord(seed, R, vals) for (seed, R), vals in rows.items()]
    names = tuple(n for n in e.functionals if all(n in r.values for r in records))
    e = replace(e, functionals=names)
    funcs = experiments.summarize(e, records, e.window_R, e.master_seed)
    report = experiments.SummaryReport(experiments.config_dict(e), funcs, 0.0)
    _emit_report(report, None, cfg, args.json, None)
    return EXIT_OK if _report_passes(report) else EXIT_FAIL


def cmd_verify_cover(args) -> int:
    rep = covering.verify_cover(args.points, args.seed, args.d, args.decades, args.boxes)
    rep["per_decade_constant"] = len(set(rep["per_decade_max_overlap"])) == 1
    print(json.dumps(rep, indent=2))
    ok = rep["coverage_failures"] == 0 and rep["box_inclusion_failures"] == 0 and rep["per_decade_constant"]
    return EXIT_OK if ok else EXIT_FAIL


def cmd_kinematic(args) -> int:
    reports = []
    for d in (2, 3):
        ks = [0, 1, 2] if d == 2 else [d - 1, d]
        for k in ks:
            for ra, rb in ((1.0, 1.0), (0.5, 2.0)):
                reports.append(asdict(theory.kinematic_check(k, ra, rb, d)))
    print(json.dumps(reports, indent=2, default=float))
    return EXIT_OK if all(r["rel_error"] <= args.tol for r in reports) else EXIT_FAIL


def cmd_dump(args) -> int:
    cfg = load_config(args.config)
    path = dump_realization(cfg, args.out)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypbool", description="Boolean models in hyperbolic space")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replicates and compare with theory")
    p.add_argument("--config", required=True)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="print predicted means and densities")
    p.add_argument("--config", required=True)
    p.add_argument("--variance", action="store_true", help="also evaluate the variance integrals")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("verify-cover", aliases=["cover-verify"], help="check the half-space covering")
    p.add_argument("--points", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--decades", type=int, default=20)
    p.add_argument("--boxes", type=int, default=10_000)
    p.set_defaults(func=cmd_verify_cover)

    p = sub.add_parser("kinematic", help="check kinematic formulas for pairs of balls")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_kinematic)

    p = sub.add_parser("report", help="summarize a replicate CSV against theory")
    p.add_argument("--config", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dump-realization", help="write one realization for plotting")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: seeded, reproducible sweeps over all library facilities.

Configs are JSON; each subcommand maps to one experiment family.  All numeric
CSV output uses 17-significant-digit formatting so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    arcsine_density,
    concentration_mass,
    nevai_integral,
    alpha_nevai_functional,
    semicircle_density,
    totik_error,
    universality_error,
)
from .bounds import constant_A, tail_probability_mc
from .errors import ConfigurationError, OpelabError
from .functions import from_spec
from .kernel import CDKernel
from .linstat import ScaledStatistic, exact_mean, exact_scaled_variance, exact_variance
from .measures import Measure
from .sampler import RngStream, export_samples, sample_gue_batch, sample_ope_batch

_EXPERIMENTS = ("sample", "stats", "bounds", "nevai", "universality", "report")


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentConfig:
    experiment: str
    measure: Measure
    n_grid: list
    statistic: ScaledStatistic
    f_spec: object
    replicas: int = 1
    seed: int = 0
    epsilons: list = field(default_factory=lambda: [0.1, 0.3])
    normalization: str = "n"
    method: str = "hkpv"
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            experiment = raw["experiment"].lower()
        except (KeyError, AttributeError):
            raise ConfigurationError("config must name an 'experiment'") from None
        if experiment not in _EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {experiment!r}; one of {_EXPERIMENTS}")
        measure = Measure.from_json(raw.get("measure", {"family": "chebyshev1st"}))
        n_grid = list(raw.get("n_grid", [10]))
        if not n_grid or any(int(b) <= int(a) for a, b in zip(n_grid, n_grid[1:])) \
                or any(int(k) < 1 for k in n_grid):
            raise ConfigurationError("n_grid must be nonempty and strictly increasing")
        n_grid = [int(k) for k in n_grid]
        stat_raw = raw.get("statistic", {"f": "identity", "alpha": 0.0, "xstar": 0.0})
        f_spec = stat_raw.get("f", "identity")
        f = from_spec(f_spec)
        alpha = float(stat_raw.get("alpha", 0.0))
        if not (0.0 <= alpha < 1.0):
            raise ConfigurationError("statistic.alpha must lie in [0, 1)")
        statistic = ScaledStatistic(f, alpha, float(stat_raw.get("xstar", 0.0)))
        replicas = int(raw.get("replicas", 1))
        if replicas < 1:
            raise ConfigurationError("replicas must be >= 1")
        seed = int(raw.get("seed", 0))
        if not (0 <= seed < 2**64):
            raise ConfigurationError("seed must be u64")
        eps = [float(e) for e in raw.get("epsilons", [0.1, 0.3])]
        if any(e <= 0 for e in eps):
            raise ConfigurationError("epsilons must be positive")
        method = raw.get("method", "hkpv")
        if method not in ("hkpv", "tridiagonal"):
            raise ConfigurationError("method must be 'hkpv' or 'tridiagonal'")
        return cls(experiment, measure, n_grid, statistic, f_spec, replicas,
                   seed, eps, raw.get("normalization", "n"), method, raw)


def _load_config(path: str) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (str, int, bool)) else _fmt(v)
                             for v in row])


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Experiment bodies: each returns a list of written file names
# ---------------------------------------------------------------------------

def _run_sample(cfg: ExperimentConfig, out: Path) -> list:
    files = []
    for n in cfg.n_grid:
        rng = RngStream(cfg.seed, 0)
        if cfg.method == "tridiagonal":
            if cfg.measure.family != "varying_gaussian":
                raise ConfigurationError("tridiagonal method requires varying_gaussian")
            samples = sample_gue_batch(n, rng, cfg.replicas)
        else:
            samples = sample_ope_batch(CDKernel(cfg.measure, n), rng, cfg.replicas)
        path = out / f"samples_n{n}.csv"
        export_samples(path, samples, cfg.measure, cfg.seed, cfg.method)
        files.append(path.name)
    return files


def _run_stats(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    s = cfg.statistic
    for n in cfg.n_grid:
        kern = CDKernel(cfg.measure, n)
        mean = exact_mean(kern, s.f)
        var = exact_variance(kern, s.f)
        svar = exact_scaled_variance(kern, s) if s.alpha > 0 else var
        rows.append([n, mean, var, svar])
    path = out / "stats.csv"
    _write_csv(path, ["n", "mean", "variance", "scaled_variance"], rows)
    return [path.name]


def _run_bounds(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    f = cfg.statistic.f
    for n in cfg.n_grid:
        kern = CDKernel(cfg.measure, n)
        norm = float(n) if cfg.normalization == "n" else float(cfg.normalization)
        for eps in cfg.epsilons:
            res = tail_probability_mc(kern, f, eps, max(1000, cfg.replicas),
                                      RngStream(cfg.seed, 0), norm)
            rows.append([n, eps, res["empirical"], res["wilson"][0], res["wilson"][1],
                         res["bound"].rhs, res["bound"].regime, res["dominated"]])
    path = out / "bounds.csv"
    _write_csv(path, ["n", "epsilon", "empirical", "wilson_lo", "wilson_hi",
                      "rhs", "regime", "dominated"], rows)
    return [path.name]


def _run_nevai(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    s = cfg.statistic
    alpha = s.alpha if s.alpha > 0 else 0.5
    for n in cfg.n_grid:
        kern = CDKernel(cfg.measure, n)
        ni = nevai_integral(kern, s.f, s.xstar)
        an = alpha_nevai_functional(kern, s.f, alpha, s.xstar)
        cm = concentration_mass(kern, s.xstar, 0.1)
        sv = float(n) ** (alpha - 1.0) * exact_scaled_variance(
            kern, ScaledStatistic(s.f, alpha, s.xstar))
        rows.append([n, ni, an, cm, sv])
    path = out / "nevai.csv"
    _write_csv(path, ["n", "nevai_integral", "alpha_nevai", "concentration_mass",
                      "scaled_variance_rate"], rows)
    return [path.name]


def _run_universality(cfg: ExperimentConfig, out: Path) -> list:
    rows = []
    xstar = cfg.statistic.xstar
    for n in cfg.n_grid:
        kern = CDKernel(cfg.measure, n)
        ue = universality_error(kern, xstar)
        if cfg.measure.family == "varying_gaussian":
            rho = semicircle_density(cfg.measure, n)
        else:
            rho = arcsine_density()
        lo, hi = rho.support
        te = totik_error(kern, rho, (0.5 * lo, 0.5 * hi))
        rows.append([n, ue, te])
    path = out / "universality.csv"
    _write_csv(path, ["n", "universality_error", "totik_error"], rows)
    return [path.name]


def _run_report(cfg: ExperimentConfig, out: Path) -> list:
    files = _run_stats(cfg, out)
    files += _run_nevai(cfg, out)
    files += _run_universality(cfg, out)
    summary = {
        "constant_A": constant_A().value,
        "measure": cfg.measure.to_json(),
        "n_grid": cfg.n_grid,
    }
    path = out / "report.json"
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return files + [path.name]


_RUNNERS = {
    "sample": _run_sample,
    "stats": _run_stats,
    "bounds": _run_bounds,
    "nevai": _run_nevai,
    "universality": _run_universality,
    "report": _run_report,
}


def run(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Execute the configured experiment; returns the run manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages = {}
    t0 = time.perf_counter()
    files = _RUNNERS[cfg.experiment](cfg, out)
    stages[cfg.experiment] = time.perf_counter() - t0
    manifest = {
        "schema_version": 1,
        "tool_version": __version__,
        "config": cfg.raw,
        "constant_A": constant_A().value,
        "wall_clock_s": stages,
        "outputs": {name: _sha256(out / name) for name in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="opelab",
        description="Orthogonal polynomial ensemble experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _EXPERIMENTS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
    pv = sub.add_parser("validate", help="check a config without running it")
    pv.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print("valid")
        return 0

    if cfg.experiment != args.command:
        print(f"config names experiment {cfg.experiment!r}, "
              f"but subcommand is {args.command!r}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    out_dir = args.out or cfg.raw.get("output_dir", "opelab-out")
    try:
        run(cfg, out_dir)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OpelabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

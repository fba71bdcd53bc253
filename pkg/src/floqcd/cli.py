"""Command-line front end: configure, run, persist.

Subcommands: state-prep, anneal, learn-agp, landscape, exact-cd.  Every run
writes a schema-versioned report.json, plot-ready CSVs, rendered PNG figures
and a manifest listing each output with its checksum.  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, apply_overrides, bundled_config, load_config
from .dynamics import PropagationError
from .optimize import landscape_scan, make_control_cost, make_cost, CostContext, CostSpec
from .models import two_qubit_model
from .operators import ground_state
from .protocols import (
    run_agp_learning,
    run_ising_anneal,
    run_state_prep,
    reference_exact_cd,
)
from . import plotting

SCHEMA_VERSION = 1
OUT_DIR_ENV = "FLOQCD_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_DEFAULT_CONFIGS = {
    "state-prep": "state_prep",
    "anneal": "ising",
    "learn-agp": "learn_agp",
    "landscape": "landscape_beta",
    "exact-cd": "exact_cd",
}


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_json(path: Path, obj: dict) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True).encode())


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue().encode())


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    """Collects output files and writes the manifest at the end."""

    def __init__(self, out_dir: Path, raw_config: bytes, seed: int):
        self.out_dir = out_dir
        self.raw_config = raw_config
        self.seed = seed
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.files.append(p)
        return p

    def report(self, experiment: str, results: dict) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "artifact": {"name": "floqcd", "version": __version__},
            "experiment": experiment,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "seed": self.seed,
            "config_sha256": hashlib.sha256(self.raw_config).hexdigest(),
            "config_echo": self.raw_config.decode("utf-8"),
            "results": results,
        }

    def finish(self) -> None:
        manifest = {
            "artifact_version": __version__,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "seed": self.seed,
            "config_sha256": hashlib.sha256(self.raw_config).hexdigest(),
            "outputs": [
                {"path": p.name, "sha256": _sha256(p)}
                for p in self.files if p.exists()
            ],
        }
        _write_json(self.out_dir / "manifest.json", manifest)


def _trajectory_rows(arm) -> list[list]:
    rows = []
    rec = arm.record
    for i, t in enumerate(rec.times):
        rows.append([
            float(t), float(rec.lambdas[i]),
            float(arm.target_fidelity_series[i]),
            float(arm.instantaneous_fidelity[i]),
            float(rec.energies[i]), float(rec.norm_drifts[i]),
        ])
    return rows


def _cmd_state_prep(cfg, run: _Run, args) -> int:
    report = run_state_prep(cfg)
    results = {"arms": [a.to_dict() for a in report.arms]}
    _write_json(run.path("report.json"), run.report("state_prep", results))
    for arm in report.arms:
        if arm.record is None:
            continue
        _write_csv(
            run.path(f"trajectory_{arm.name}.csv"),
            ["t", "lambda", "fidelity_target", "fidelity_instantaneous",
             "energy", "norm_drift"],
            _trajectory_rows(arm),
        )
    if not args.no_plots:
        plotting.plot_state_prep(report, run.path("state_prep.png"))
    return EXIT_OK


def _cmd_anneal(cfg, run: _Run, args) -> int:
    report = run_ising_anneal(cfg, jobs=args.jobs)
    results = report.to_dict()
    _write_json(run.path("report.json"), run.report("ising_anneal", results))
    rows = [[r.n_sites, r.n_harmonics, r.n_segments, r.arm, float(r.energy_gap)]
            for r in report.rows]
    _write_csv(run.path("ising_gaps.csv"),
               ["N", "N_k", "N_tau", "arm", "energy_gap"], rows)
    if not args.no_plots:
        plotting.plot_ising(report, run.path("ising.png"))
    return EXIT_NUMERICAL if report.error else EXIT_OK


def _cmd_learn_agp(cfg, run: _Run, args) -> int:
    report = run_agp_learning(cfg)
    _write_json(run.path("report.json"), run.report("agp_learning", report.to_dict()))
    n = cfg.learning.n_segments
    tau = cfg.schedule.tau
    from .schedules import lambda_at

    rows = []
    for s in report.segments:
        t_mid = (s.index - 0.5) * tau / n
        row = [s.index, float(t_mid), float(lambda_at(cfg.schedule, t_mid))]
        row.extend(float(v) for v in s.learned)
        row.append(float(s.analytic_average) if s.analytic_average is not None else "")
        row.append(int(s.flagged))
        rows.append(row)
    learned_cols = [f"learned_beta{k+1}" for k in range(cfg.drive.n_harmonics)]
    _write_csv(run.path("agp_learning.csv"),
               ["segment", "t_mid", "lambda_mid", *learned_cols,
                "analytic_segment_avg", "unidentifiable_tail"], rows)
    if report.analytic_curve is not None:
        _write_csv(run.path("agp_analytic_curve.csv"), ["t", "lambda", "beta1"],
                   [[float(a), float(b), float(c)] for a, b, c in report.analytic_curve])
    if not args.no_plots:
        plotting.plot_learning(report, run.path("agp_learning.png"))
    return EXIT_NUMERICAL if report.error else EXIT_OK


def _cmd_landscape(cfg, run: _Run, args) -> int:
    model = two_qubit_model(cfg.two_qubit)
    _, psi0 = ground_state(model.hamiltonian(0.0))
    _, target = ground_state(model.hamiltonian(1.0))
    tau = cfg.schedule.tau
    ls = cfg.landscape
    if ls.arm == "caffeine":
        ctx = CostContext(model, cfg.schedule, psi0, cfg.propagator,
                          omega=cfg.drive.omega(tau), omega0=cfg.drive.omega0(tau),
                          n_harmonics=1, n_segments=1)
        cost = make_cost(CostSpec("infidelity", target_state=target), ctx)
        label = "beta_1 (units of omega_0)"
    elif ls.arm == "optimized_anneal":
        cost = make_control_cost(target, model, cfg.schedule, psi0,
                                 cfg.drive.omega0(tau), cfg.propagator)
        label = "gamma_1 (units of omega_0)"
    else:
        raise ConfigError(f"landscape arm must be caffeine or optimized_anneal, "
                          f"got {ls.arm!r}")
    grid = np.linspace(ls.lo, ls.hi, ls.points)
    params, costs = landscape_scan(cost, [grid], jobs=args.jobs)
    i = int(np.argmin(costs))
    results = {
        "arm": ls.arm,
        "minimum": {"param": float(params[i, 0]), "cost": float(costs[i])},
        "points": ls.points,
    }
    _write_json(run.path("report.json"), run.report("landscape", results))
    _write_csv(run.path("landscape.csv"), ["param", "cost"],
               [[float(p[0]), float(c)] for p, c in zip(params, costs)])
    if not args.no_plots:
        plotting.plot_landscape(params, costs, label, run.path("landscape.png"))
    return EXIT_OK


def _cmd_exact_cd(cfg, run: _Run, args) -> int:
    report = reference_exact_cd(cfg)
    _write_json(run.path("report.json"), run.report("exact_cd", report.to_dict()))
    rec = report.record
    rows = [[float(rec.times[i]), float(rec.lambdas[i]),
             float(report.instantaneous_fidelity[i]),
             float(rec.energies[i]), float(rec.norm_drifts[i])]
            for i in range(len(rec.times))]
    _write_csv(run.path("exact_cd_trajectory.csv"),
               ["t", "lambda", "fidelity_instantaneous", "energy", "norm_drift"],
               rows)
    if not args.no_plots:
        plotting.plot_exact_cd(report, run.path("exact_cd.png"))
    return EXIT_OK


_COMMANDS = {
    "state-prep": _cmd_state_prep,
    "anneal": _cmd_anneal,
    "learn-agp": _cmd_learn_agp,
    "landscape": _cmd_landscape,
    "exact-cd": _cmd_exact_cd,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floqcd",
        description="Floquet-engineered counterdiabatic state preparation, "
                    "annealing and gauge-potential learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="TOML config (bundled default if omitted)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--omega-mult", type=float, default=None,
                       help="override drive.omega_mult")
        p.add_argument("--out-dir", type=Path, default=None)
        p.add_argument("--arm", type=str, default=None,
                       help="restrict the run to a single arm")
        p.add_argument("--no-plots", action="store_true")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg, raw = load_config(args.config)
        else:
            cfg, raw = bundled_config(_DEFAULT_CONFIGS[args.command])
        cfg = apply_overrides(cfg, seed=args.seed, omega_mult=args.omega_mult,
                              arm=args.arm)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out_dir or (
        Path(os.environ[OUT_DIR_ENV]) if OUT_DIR_ENV in os.environ
        else Path("floqcd-out") / args.command
    )
    run = _Run(out_dir, raw, cfg.seed)
    try:
        code = _COMMANDS[args.command](cfg, run, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PropagationError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())

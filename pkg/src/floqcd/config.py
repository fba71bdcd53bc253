"""Experiment configuration: TOML schema, validation, bundled defaults.

Configs are a single human-editable TOML file with nested tables.  Validation
is strict: unknown keys are rejected so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import PropagatorConfig
from .models import TwoQubitParams
from .optimize import DualAnnealingConfig
from .protocols import (
    ARM_NAMES,
    DriveConfig,
    ExperimentConfig,
    IsingGridConfig,
    LandscapeConfig,
    LearningConfig,
)
from .schedules import Schedule


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or violates the schema."""


_SCHEMA: dict[str, Any] = {
    "seed": int,
    "trajectory_samples": int,
    "model": {
        "kind": str,
        "J": float,
        "h_z": float,
    },
    "schedule": {
        "kind": str,
        "tau": float,
    },
    "drive": {
        "omega_mult": float,
        "omega0_mult": float,
        "n_harmonics": int,
        "n_segments": int,
        "bounds": list,
        "control_bounds": list,
    },
    "run": {
        "arms": list,
    },
    "optimizer": {
        "max_function_evals": int,
        "max_global_iterations": int,
        "initial_temperature": float,
        "visiting_shape": float,
        "acceptance_shape": float,
        "local_search": bool,
    },
    "propagator": {
        "method": str,
        "rel_tol": float,
        "abs_tol": float,
        "min_steps_per_oscillation": int,
        "max_steps": int,
        "fixed_step_count": int,
    },
    "ising": {
        "sizes": list,
        "segments_grid": list,
        "harmonics_grid": list,
        "coupling": float,
        "field": float,
        "boundary": str,
    },
    "learning": {
        "n_segments": int,
        "bounds": list,
        "tail_cutoff": float,
    },
    "landscape": {
        "arm": str,
        "lo": float,
        "hi": float,
        "points": int,
    },
}


def _validate_tree(data: dict, schema: dict, path: str = "") -> None:
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {where!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a table")
            _validate_tree(value, expected, where)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{where!r} must be a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{where!r} must be an integer")
        elif not isinstance(value, expected):
            raise ConfigError(f"{where!r} must be of type {expected.__name__}")


def _pair(raw: Any, where: str) -> tuple[float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ConfigError(f"{where!r} must be a [lo, hi] pair")
    lo, hi = float(raw[0]), float(raw[1])
    if not lo < hi:
        raise ConfigError(f"{where!r} must have lo < hi")
    return lo, hi


def parse_config(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed TOML tree, validating strictly."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _validate_tree(data, _SCHEMA)

    model = data.get("model", {})
    schedule = data.get("schedule", {})
    drive = data.get("drive", {})
    run = data.get("run", {})
    optimizer = data.get("optimizer", {})
    propagator = data.get("propagator", {})
    ising = data.get("ising", {})
    learning = data.get("learning", {})
    landscape = data.get("landscape", {})

    try:
        cfg = ExperimentConfig(
            model_kind=model.get("kind", "two_qubit"),
            two_qubit=TwoQubitParams(
                J=float(model.get("J", 1.0)), h_z=float(model.get("h_z", 5.0))
            ),
            schedule=Schedule(
                kind=schedule.get("kind", "smooth"),
                tau=float(schedule.get("tau", 0.1)),
            ),
            drive=DriveConfig(
                omega_mult=float(drive.get("omega_mult", 1000.0)),
                omega0_mult=float(drive.get("omega0_mult", 1.0)),
                n_harmonics=int(drive.get("n_harmonics", 1)),
                n_segments=int(drive.get("n_segments", 1)),
                bounds=_pair(drive.get("bounds", [-3.0, 3.0]), "drive.bounds"),
                control_bounds=_pair(
                    drive.get("control_bounds", [-0.5, 0.5]), "drive.control_bounds"
                ),
            ),
            arms=tuple(run.get("arms", list(ARM_NAMES))),
            optimizer=DualAnnealingConfig(
                max_function_evals=int(optimizer.get("max_function_evals", 100_000)),
                max_global_iterations=int(optimizer.get("max_global_iterations", 1000)),
                initial_temperature=float(optimizer.get("initial_temperature", 5230.0)),
                visiting_distribution_shape=float(optimizer.get("visiting_shape", 2.62)),
                acceptance_shape=float(optimizer.get("acceptance_shape", -5.0)),
                local_search_enabled=bool(optimizer.get("local_search", True)),
                rng_seed=int(data.get("seed", 2024)),
            ),
            propagator=PropagatorConfig(
                method=propagator.get("method", "adaptive-embedded-RK"),
                rel_tol=float(propagator.get("rel_tol", 1e-10)),
                abs_tol=float(propagator.get("abs_tol", 1e-12)),
                min_steps_per_oscillation=int(
                    propagator.get("min_steps_per_oscillation", 20)
                ),
                max_steps=int(propagator.get("max_steps", 50_000_000)),
                fixed_step_count=propagator.get("fixed_step_count"),
            ),
            seed=int(data.get("seed", 2024)),
            trajectory_samples=int(data.get("trajectory_samples", 201)),
            ising=IsingGridConfig(
                sizes=tuple(int(n) for n in ising.get("sizes", [2, 4, 6])),
                segments_grid=tuple(int(n) for n in ising.get("segments_grid", [1])),
                harmonics_grid=tuple(int(n) for n in ising.get("harmonics_grid", [1])),
                coupling=float(ising.get("coupling", 1.0)),
                field=float(ising.get("field", 0.0)),
                boundary=ising.get("boundary", "open"),
            ),
            learning=LearningConfig(
                n_segments=int(learning.get("n_segments", 12)),
                bounds=_pair(learning.get("bounds", [-1.0, 0.0]), "learning.bounds"),
                tail_cutoff=float(learning.get("tail_cutoff", 0.8)),
            ),
            landscape=LandscapeConfig(
                arm=landscape.get("arm", "caffeine"),
                lo=float(landscape.get("lo", -3.0)),
                hi=float(landscape.get("hi", 3.0)),
                points=int(landscape.get("points", 241)),
            ),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: "Path | str") -> tuple[ExperimentConfig, bytes]:
    """Load and validate a TOML config; returns (config, raw bytes for echoing)."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    raw = p.read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return parse_config(data), raw


def bundled_config(name: str) -> tuple[ExperimentConfig, bytes]:
    """Load one of the packaged example configs by bare name."""
    ref = resources.files("floqcd") / "configs" / f"{name}.toml"
    try:
        raw = ref.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigError(f"no bundled config named {name!r}") from exc
    return parse_config(tomllib.loads(raw.decode("utf-8"))), raw


def apply_overrides(cfg: ExperimentConfig, seed: Optional[int] = None,
                    omega_mult: Optional[float] = None,
                    arm: Optional[str] = None) -> ExperimentConfig:
    """Apply CLI-level overrides on top of a parsed config."""
    if seed is not None:
        cfg = replace(cfg, seed=seed,
                      optimizer=replace(cfg.optimizer, rng_seed=seed))
    if omega_mult is not None:
        cfg = replace(cfg, drive=replace(cfg.drive, omega_mult=omega_mult))
    if arm is not None:
        name = arm.replace("-", "_")
        if name not in ARM_NAMES:
            raise ConfigError(f"unknown arm {arm!r}")
        cfg = replace(cfg, arms=(name,))
    return cfg

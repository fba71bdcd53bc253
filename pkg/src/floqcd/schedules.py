"""Protocol schedules lambda(t) and piecewise-constant drive-coefficient tables."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

SCHEDULE_KINDS = ("smooth", "linear")


@dataclass(frozen=True)
class Schedule:
    """Protocol parameter path with lambda(0)=0 and lambda(tau)=1.

    ``smooth`` is sin^2((pi/2) sin^2(pi t / 2 tau)), whose time derivative
    vanishes at both endpoints; ``linear`` is t/tau.
    """

    kind: str
    tau: float

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


def _check_time(t: float, tau: float) -> None:
    if not -1e-12 * tau <= t <= tau * (1 + 1e-12):
        raise ValueError(f"t={t} outside protocol window [0, {tau}]")


def lambda_at(s: Schedule, t: float) -> float:
    _check_time(t, s.tau)
    if s.kind == "smooth":
        inner = np.sin(np.pi * t / (2.0 * s.tau))
        return float(np.sin(0.5 * np.pi * inner * inner) ** 2)
    return float(t / s.tau)


def lambda_dot_at(s: Schedule, t: float) -> float:
    """Analytical d lambda/dt (no finite differencing in the propagation path)."""
    _check_time(t, s.tau)
    if s.kind == "smooth":
        b = np.pi * t / (2.0 * s.tau)
        a = 0.5 * np.pi * np.sin(b) ** 2
        return float(np.pi**2 / (4.0 * s.tau) * np.sin(2.0 * a) * np.sin(2.0 * b))
    return float(1.0 / s.tau)


@dataclass(frozen=True)
class PiecewiseBeta:
    """N_k x N_tau table of drive coefficients, in units of the reference frequency.

    Entry (k-1, j-1) is the coefficient of harmonic k on the j-th uniform time
    segment.  Segmentation is uniform in t (the parameter step is tau/N_tau);
    the right endpoint t=tau belongs to the last segment.
    """

    values: tuple[tuple[float, ...], ...]
    tau: float
    bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("values must be a non-empty 2-D table")
        object.__setattr__(
            self, "values", tuple(tuple(float(v) for v in row) for row in arr)
        )
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise ValueError(f"invalid bounds ({lo}, {hi})")
            if arr.size and (arr.min() < lo - 1e-12 or arr.max() > hi + 1e-12):
                raise ValueError("table entries violate bounds")

    @property
    def n_harmonics(self) -> int:
        return len(self.values)

    @property
    def n_segments(self) -> int:
        return len(self.values[0])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def segment_index(b: PiecewiseBeta, t: float) -> int:
    """0-based segment index of time t; t=tau maps to the last segment."""
    _check_time(t, b.tau)
    j = int(t * b.n_segments / b.tau)
    return min(j, b.n_segments - 1)


def beta_at(b: PiecewiseBeta, k: int, t: float) -> float:
    """Value of harmonic k (1-based) at time t."""
    if not 1 <= k <= b.n_harmonics:
        raise IndexError(f"harmonic index {k} outside [1, {b.n_harmonics}]")
    return b.values[k - 1][segment_index(b, t)]


def beta_to_json(b: PiecewiseBeta) -> str:
    return json.dumps(
        {
            "values": [list(row) for row in b.values],
            "tau": b.tau,
            "bounds": list(b.bounds) if b.bounds is not None else None,
        }
    )


def beta_from_json(text: str) -> PiecewiseBeta:
    obj = json.loads(text)
    bounds = tuple(obj["bounds"]) if obj.get("bounds") is not None else None
    return PiecewiseBeta(
        tuple(tuple(row) for row in obj["values"]), obj["tau"], bounds
    )


def constant_beta(value: float, n_harmonics: int, n_segments: int, tau: float,
                  bounds: Optional[tuple[float, float]] = None) -> PiecewiseBeta:
    row = (value,) * n_segments
    return PiecewiseBeta((row,) * n_harmonics, tau, bounds)


def beta_from_flat(flat: np.ndarray, n_harmonics: int, n_segments: int, tau: float,
                   bounds: Optional[tuple[float, float]] = None) -> PiecewiseBeta:
    """Build a table from an optimizer parameter vector (harmonic-major order)."""
    arr = np.asarray(flat, dtype=float).reshape(n_harmonics, n_segments)
    return PiecewiseBeta(tuple(tuple(row) for row in arr), tau, bounds)

"""Global optimization of drive parameters: dual annealing, cost plumbing, landscape scans.

Dual annealing (generalized simulated annealing with a distorted Cauchy-Lorentz
visiting distribution and periodic local refinement) is provided by scipy; the
wrapper here adds hard budget enforcement, a full cost trace, non-finite cost
handling and a determinism audit, which the raw scipy interface does not give.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import dual_annealing

from .dynamics import (
    FloquetDriveSpec,
    PropagationPlan,
    PropagatorConfig,
    PropagationError,
    plan_controlled,
    plan_floquet,
    propagate,
)
from .models import ControlTermSpec
from .schedules import Schedule, beta_from_flat, lambda_at


@dataclass(frozen=True)
class Bounds:
    """Per-parameter (lo, hi) box."""

    pairs: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.pairs:
            if not lo < hi:
                raise ValueError(f"invalid bound ({lo}, {hi})")

    def __len__(self) -> int:
        return len(self.pairs)

    @staticmethod
    def uniform(lo: float, hi: float, n: int) -> "Bounds":
        return Bounds(((lo, hi),) * n)


@dataclass(frozen=True)
class DualAnnealingConfig:
    max_function_evals: int = 100_000
    max_global_iterations: int = 1000
    initial_temperature: float = 5230.0
    visiting_distribution_shape: float = 2.62
    acceptance_shape: float = -5.0
    local_search_enabled: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_function_evals < 1 or self.max_global_iterations < 1:
            raise ValueError("budgets must be positive")


@dataclass(frozen=True)
class CostSpec:
    """What the optimizer minimizes: infidelity, final energy, or segment energy."""

    kind: str
    target_state: Optional[np.ndarray] = None
    target_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("infidelity", "final_energy", "segment_energy"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "infidelity" and self.target_state is None:
            raise ValueError("infidelity cost needs a target state")
        if self.kind in ("final_energy",) and self.target_matrix is None:
            raise ValueError("final_energy cost needs the problem Hamiltonian")


@dataclass
class OptimizationResult:
    best_params: np.ndarray
    best_cost: float
    evaluation_count: int
    cost_trace: np.ndarray
    termination_reason: str
    seed: int
    non_finite_evals: int = 0

    def to_dict(self) -> dict:
        return {
            "best_params": [float(x) for x in self.best_params],
            "best_cost": self.best_cost,
            "evaluation_count": self.evaluation_count,
            "termination_reason": self.termination_reason,
            "seed": self.seed,
            "non_finite_evals": self.non_finite_evals,
            "cost_trace": [float(c) for c in self.cost_trace],
        }


class _BudgetExhausted(Exception):
    pass


class _TracedCost:
    """Counts evaluations, records the trace, maps non-finite costs to +inf."""

    def __init__(self, cost: Callable[[np.ndarray], float], budget: int):
        self.cost = cost
        self.budget = budget
        self.trace: list[float] = []
        self.best_cost = math.inf
        self.best_params: Optional[np.ndarray] = None
        self.non_finite = 0

    @property
    def count(self) -> int:
        return len(self.trace)

    def __call__(self, x: np.ndarray) -> float:
        if self.count >= self.budget:
            raise _BudgetExhausted
        try:
            value = float(self.cost(np.asarray(x, dtype=float)))
        except PropagationError:
            value = math.inf
        if not math.isfinite(value):
            self.non_finite += 1
            value = math.inf
        self.trace.append(value)
        if value < self.best_cost:
            self.best_cost = value
            self.best_params = np.array(x, dtype=float)
        return value


def dual_anneal(cost: Callable[[np.ndarray], float], bounds: Bounds,
                cfg: Optional[DualAnnealingConfig] = None,
                x0: Optional[np.ndarray] = None) -> OptimizationResult:
    """Minimize ``cost`` over the box with dual annealing.

    Identical (seed, config, cost, x0) inputs produce identical results.
    Costs that raise PropagationError or return non-finite values score +inf
    and are flagged rather than aborting the run.
    """
    cfg = cfg or DualAnnealingConfig()
    traced = _TracedCost(cost, cfg.max_function_evals)
    reason = None
    try:
        scipy_result = dual_annealing(
            traced,
            bounds=list(bounds.pairs),
            maxiter=cfg.max_global_iterations,
            maxfun=cfg.max_function_evals,
            initial_temp=cfg.initial_temperature,
            visit=cfg.visiting_distribution_shape,
            accept=cfg.acceptance_shape,
            no_local_search=not cfg.local_search_enabled,
            rng=cfg.rng_seed,
            x0=None if x0 is None else np.asarray(x0, dtype=float),
        )
        message = scipy_result.message
        if isinstance(message, (list, tuple)):
            message = message[0] if message else ""
        if "Maximum number of iteration" in str(message):
            reason = "budget_exhausted"
        elif "function call" in str(message).lower():
            reason = "budget_exhausted"
        else:
            reason = "converged"
    except _BudgetExhausted:
        reason = "budget_exhausted"
    if traced.best_params is None:
        raise RuntimeError("optimizer never completed a finite cost evaluation")
    return OptimizationResult(
        best_params=traced.best_params,
        best_cost=traced.best_cost,
        evaluation_count=traced.count,
        cost_trace=np.asarray(traced.trace),
        termination_reason=reason,
        seed=cfg.rng_seed,
        non_finite_evals=traced.non_finite,
    )


def audit_result(result: OptimizationResult, cost: Callable[[np.ndarray], float],
                 tol: float = 1e-12) -> None:
    """Re-evaluate the best point; determinism requires bit-level agreement."""
    value = float(cost(result.best_params))
    if not (abs(value - result.best_cost) <= tol):
        raise AssertionError(
            f"determinism audit failed: stored {result.best_cost!r}, "
            f"re-evaluated {value!r}"
        )


def landscape_scan(cost: Callable[[np.ndarray], float],
                   grid: Sequence[np.ndarray],
                   jobs: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive evaluation over the cartesian grid, row-major order.

    Returns (params, costs); failed evaluations are recorded as +inf rows.
    Rows are independent, so ``jobs`` threads may evaluate them concurrently
    without changing the result.
    """
    axes = [np.asarray(a, dtype=float) for a in grid]
    mesh = np.meshgrid(*axes, indexing="ij")
    params = np.stack([m.ravel() for m in mesh], axis=1)

    def one(x: np.ndarray) -> float:
        try:
            value = float(cost(x))
        except PropagationError:
            value = math.inf
        return value if math.isfinite(value) else math.inf

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            costs = np.array(list(pool.map(one, params)))
    else:
        costs = np.array([one(x) for x in params])
    return params, costs


@dataclass(frozen=True)
class CostContext:
    """Everything a drive-parameter cost needs: model, schedule, drive shape, propagator."""

    model: object
    schedule: Schedule
    psi0: np.ndarray
    propagator: PropagatorConfig
    omega: float = 0.0
    omega0: float = 0.0
    n_harmonics: int = 1
    n_segments: int = 1
    t_window: Optional[tuple[float, float]] = None


def make_cost(spec: CostSpec, ctx: CostContext) -> Callable[[np.ndarray], float]:
    """Build the scalar cost function of a flat parameter vector.

    For infidelity/final_energy the vector is the flattened beta table of a
    Floquet drive; for segment_energy it is the beta values of one segment
    window, propagated over ``ctx.t_window`` only.
    """
    tau = ctx.schedule.tau

    if spec.kind in ("infidelity", "final_energy"):
        def cost(x: np.ndarray) -> float:
            beta = beta_from_flat(x, ctx.n_harmonics, ctx.n_segments, tau)
            drive = FloquetDriveSpec(ctx.omega, ctx.omega0, ctx.n_harmonics, beta,
                                     enforce_separation=False)
            plan = plan_floquet(ctx.model, ctx.schedule, drive)
            psi = propagate(plan, ctx.psi0, (0.0, tau), ctx.propagator)
            if spec.kind == "infidelity":
                return 1.0 - abs(np.vdot(spec.target_state, psi)) ** 2
            return float(np.real(psi.conj() @ (spec.target_matrix @ psi)))
        return cost

    if spec.kind == "segment_energy":
        if ctx.t_window is None:
            raise ValueError("segment_energy cost needs ctx.t_window")
        t_s, t_f = ctx.t_window

        def cost(x: np.ndarray) -> float:
            # constant table equal to this segment's values over the window
            beta = beta_from_flat(np.repeat(x, ctx.n_segments),
                                  ctx.n_harmonics, ctx.n_segments, tau)
            drive = FloquetDriveSpec(ctx.omega, ctx.omega0, ctx.n_harmonics, beta,
                                     enforce_separation=False)
            plan = plan_floquet(ctx.model, ctx.schedule, drive)
            psi = propagate(plan, ctx.psi0, (t_s, t_f), ctx.propagator)
            hmat = ctx.model.hamiltonian(lambda_at(ctx.schedule, t_f))
            return float(np.real(psi.conj() @ (hmat @ psi)))
        return cost

    raise ValueError(spec.kind)


def make_control_cost(target_state: np.ndarray, model, schedule: Schedule,
                      psi0: np.ndarray, omega0: float,
                      propagator: PropagatorConfig) -> Callable[[np.ndarray], float]:
    """Infidelity cost over the sine-series control amplitudes (gamma vector)."""

    def cost(x: np.ndarray) -> float:
        ctrl = ControlTermSpec(tuple(float(g) for g in x), schedule.tau, omega0)
        plan = plan_controlled(model, schedule, ctrl)
        psi = propagate(plan, psi0, (0.0, schedule.tau), propagator)
        return 1.0 - abs(np.vdot(target_state, psi)) ** 2

    return cost

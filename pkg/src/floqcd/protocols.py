"""End-to-end experiments: state preparation, Ising annealing, gauge-potential learning.

Each runner consumes an ExperimentConfig and returns a plain report object
(JSON-serializable through ``to_dict``).  Initial states are always computed
as ground states of the initial Hamiltonian, never hard-coded kets; degenerate
initial ground spaces are rejected.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .agp import analytic_floquet_beta1
from .dynamics import (
    FloquetDriveSpec,
    PropagationError,
    PropagatorConfig,
    TrajectoryRecord,
    instantaneous_fidelity_series,
    plan_bare,
    plan_cd_two_qubit,
    plan_controlled,
    plan_floquet,
    plan_floquet_analytic,
    propagate,
    propagate_recorded,
)
from .models import (
    AnnealModel,
    ControlTermSpec,
    IsingParams,
    TwoQubitParams,
    ising_model,
    two_qubit_model,
    uniform_ising,
)
from .operators import eigendecompose, ground_state
from .optimize import (
    Bounds,
    CostContext,
    CostSpec,
    DualAnnealingConfig,
    OptimizationResult,
    audit_result,
    dual_anneal,
    make_control_cost,
    make_cost,
)
from .schedules import Schedule, beta_from_flat, lambda_at, lambda_dot_at

ARM_NAMES = ("unassisted", "optimized_anneal", "analytical_floquet", "exact_cd", "caffeine")


@dataclass(frozen=True)
class DriveConfig:
    omega_mult: float = 1000.0
    omega0_mult: float = 1.0
    n_harmonics: int = 1
    n_segments: int = 1
    bounds: tuple[float, float] = (-3.0, 3.0)
    control_bounds: tuple[float, float] = (-0.5, 0.5)

    def omega(self, tau: float) -> float:
        return self.omega_mult * 2.0 * np.pi / tau

    def omega0(self, tau: float) -> float:
        return self.omega0_mult * 2.0 * np.pi / tau


@dataclass(frozen=True)
class IsingGridConfig:
    sizes: tuple[int, ...] = (2, 4, 6)
    segments_grid: tuple[int, ...] = (1,)
    harmonics_grid: tuple[int, ...] = (1,)
    coupling: float = 1.0
    field: float = 0.0
    boundary: str = "open"


@dataclass(frozen=True)
class LearningConfig:
    n_segments: int = 12
    bounds: tuple[float, float] = (-1.0, 0.0)
    tail_cutoff: float = 0.8


@dataclass(frozen=True)
class LandscapeConfig:
    arm: str = "caffeine"
    lo: float = -3.0
    hi: float = 3.0
    points: int = 241


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str = "two_qubit"
    two_qubit: TwoQubitParams = TwoQubitParams()
    schedule: Schedule = Schedule("smooth", 0.1)
    drive: DriveConfig = DriveConfig()
    arms: tuple[str, ...] = ARM_NAMES
    optimizer: DualAnnealingConfig = DualAnnealingConfig()
    propagator: PropagatorConfig = PropagatorConfig()
    seed: int = 2024
    trajectory_samples: int = 201
    ising: IsingGridConfig = IsingGridConfig()
    learning: LearningConfig = LearningConfig()
    landscape: LandscapeConfig = LandscapeConfig()

    def __post_init__(self):
        for arm in self.arms:
            if arm not in ARM_NAMES:
                raise ValueError(f"unknown arm {arm!r}")
        if self.model_kind not in ("two_qubit", "ising"):
            raise ValueError(f"unknown model kind {self.model_kind!r}")


@dataclass
class ArmResult:
    name: str
    infidelity: float
    params: Optional[np.ndarray] = None
    optimizer: Optional[OptimizationResult] = None
    record: Optional[TrajectoryRecord] = None
    instantaneous_fidelity: Optional[np.ndarray] = None
    target_fidelity_series: Optional[np.ndarray] = None
    tracking_flags: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        out = {"arm": self.name, "infidelity": self.infidelity}
        if self.params is not None:
            out["params"] = [float(x) for x in self.params]
        if self.optimizer is not None:
            out["optimizer"] = self.optimizer.to_dict()
        return out


@dataclass
class StatePrepReport:
    arms: list[ArmResult]
    seed: int

    def to_dict(self) -> dict:
        return {"experiment": "state_prep", "seed": self.seed,
                "arms": [a.to_dict() for a in self.arms]}


def _two_qubit_setup(cfg: ExperimentConfig):
    if cfg.model_kind != "two_qubit":
        raise ValueError("this experiment requires the two-qubit model")
    model = two_qubit_model(cfg.two_qubit)
    _, psi0 = ground_state(model.hamiltonian(0.0))
    _, target = ground_state(model.hamiltonian(1.0))
    return model, psi0, target


def _record_arm(result: ArmResult, plan, model, cfg: ExperimentConfig,
                psi0: np.ndarray, target: np.ndarray) -> None:
    _, record = propagate_recorded(plan, psi0, cfg.schedule, model,
                                   cfg.propagator, cfg.trajectory_samples)
    fid, flags = instantaneous_fidelity_series(record, model, cfg.schedule)
    result.record = record
    result.instantaneous_fidelity = fid
    result.tracking_flags = tuple(flags)
    result.target_fidelity_series = np.abs(record.states @ target.conj()) ** 2


def run_state_prep(cfg: ExperimentConfig, with_records: bool = True) -> StatePrepReport:
    """Two-qubit Bell-state preparation, one result per configured arm."""
    model, psi0, target = _two_qubit_setup(cfg)
    tau = cfg.schedule.tau
    omega = cfg.drive.omega(tau)
    omega0 = cfg.drive.omega0(tau)
    report = StatePrepReport(arms=[], seed=cfg.seed)

    for arm in cfg.arms:
        if arm == "unassisted":
            plan = plan_bare(model, cfg.schedule)
            psi = propagate(plan, psi0, (0.0, tau), cfg.propagator)
            result = ArmResult(arm, 1.0 - abs(np.vdot(target, psi)) ** 2)
        elif arm == "analytical_floquet":
            plan = plan_floquet_analytic(model, cfg.schedule, omega, omega0)
            psi = propagate(plan, psi0, (0.0, tau), cfg.propagator)
            result = ArmResult(arm, 1.0 - abs(np.vdot(target, psi)) ** 2)
        elif arm == "exact_cd":
            plan = plan_cd_two_qubit(model, cfg.schedule)
            psi = propagate(plan, psi0, (0.0, tau), cfg.propagator)
            result = ArmResult(arm, 1.0 - abs(np.vdot(target, psi)) ** 2)
        elif arm == "optimized_anneal":
            cost = make_control_cost(target, model, cfg.schedule, psi0, omega0,
                                     cfg.propagator)
            bounds = Bounds.uniform(*cfg.drive.control_bounds, cfg.drive.n_segments)
            opt = dual_anneal(cost, bounds,
                              replace(cfg.optimizer, rng_seed=cfg.seed + 1))
            audit_result(opt, cost)
            result = ArmResult(arm, opt.best_cost, params=opt.best_params,
                               optimizer=opt)
            plan = plan_controlled(
                model, cfg.schedule,
                ControlTermSpec(tuple(opt.best_params), tau, omega0))
        elif arm == "caffeine":
            ctx = CostContext(model, cfg.schedule, psi0, cfg.propagator,
                              omega=omega, omega0=omega0,
                              n_harmonics=cfg.drive.n_harmonics,
                              n_segments=cfg.drive.n_segments)
            cost = make_cost(CostSpec("infidelity", target_state=target), ctx)
            n_params = cfg.drive.n_harmonics * cfg.drive.n_segments
            bounds = Bounds.uniform(*cfg.drive.bounds, n_params)
            opt = dual_anneal(cost, bounds,
                              replace(cfg.optimizer, rng_seed=cfg.seed))
            audit_result(opt, cost)
            result = ArmResult(arm, opt.best_cost, params=opt.best_params,
                               optimizer=opt)
            beta = beta_from_flat(opt.best_params, cfg.drive.n_harmonics,
                                  cfg.drive.n_segments, tau)
            plan = plan_floquet(model, cfg.schedule,
                                FloquetDriveSpec(omega, omega0,
                                                 cfg.drive.n_harmonics, beta,
                                                 enforce_separation=False))
        else:
            raise ValueError(arm)
        if with_records:
            _record_arm(result, plan, model, cfg, psi0, target)
        report.arms.append(result)
    return report


@dataclass
class IsingRow:
    n_sites: int
    n_harmonics: int
    n_segments: int
    arm: str
    energy_gap: float
    optimizer: Optional[OptimizationResult] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"N": self.n_sites, "N_k": self.n_harmonics, "N_tau": self.n_segments,
               "arm": self.arm, "energy_gap": self.energy_gap}
        if self.optimizer is not None:
            out["optimizer"] = self.optimizer.to_dict()
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class IsingReport:
    rows: list[IsingRow]
    seed: int
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"experiment": "ising_anneal", "seed": self.seed,
                "rows": [r.to_dict() for r in self.rows], "error": self.error}


def _resample_table(values: np.ndarray, nk_from: int, ntau_from: int,
                    nk_to: int, ntau_to: int) -> np.ndarray:
    """Embed a coarse drive table into a finer grid (new harmonics start at zero).

    The embedded table represents the identical drive, so a warmed-up search
    can only improve on the coarser cell's best cost.
    """
    table = np.asarray(values, dtype=float).reshape(nk_from, ntau_from)
    out = np.zeros((nk_to, ntau_to))
    for j in range(ntau_to):
        src = min(int(j * ntau_from / ntau_to), ntau_from - 1)
        out[:nk_from, j] = table[:, src]
    return out.ravel()


def _ising_size_group(cfg: ExperimentConfig, n_sites: int,
                      seed_base: int) -> list[IsingRow]:
    """All grid cells of one system size, warm-starting finer cells from coarser."""
    grid = cfg.ising
    params = uniform_ising(n_sites, grid.coupling, grid.field, grid.boundary)
    model = AnnealModel(ising_model(params))
    _, psi0 = ground_state(model.hamiltonian(0.0))
    energies, _ = eigendecompose(model.problem_matrix)
    e_target = float(energies[0])
    tau = cfg.schedule.tau

    rows = []
    plan = plan_bare(model, cfg.schedule)
    psi = propagate(plan, psi0, (0.0, tau), cfg.propagator)
    e_bare = float(np.real(psi.conj() @ (model.problem_matrix @ psi)))
    rows.append(IsingRow(n_sites, 0, 0, "unassisted", e_bare - e_target))

    omega = cfg.drive.omega(tau)
    omega0 = cfg.drive.omega0(tau)
    best_by_cell: dict[tuple[int, int], np.ndarray] = {}
    cell_index = 0
    for nk in sorted(grid.harmonics_grid):
        for ntau in sorted(grid.segments_grid):
            ctx = CostContext(model, cfg.schedule, psi0, cfg.propagator,
                              omega=omega, omega0=omega0,
                              n_harmonics=nk, n_segments=ntau)
            cost = make_cost(
                CostSpec("final_energy", target_matrix=model.problem_matrix), ctx)
            bounds = Bounds.uniform(*cfg.drive.bounds, nk * ntau)
            x0 = None
            for (nk0, ntau0), prev in sorted(best_by_cell.items()):
                if nk0 <= nk and ntau0 <= ntau and (nk0, ntau0) != (nk, ntau):
                    x0 = _resample_table(prev, nk0, ntau0, nk, ntau)
            try:
                opt = dual_anneal(cost, bounds,
                                  replace(cfg.optimizer,
                                          rng_seed=seed_base + cell_index),
                                  x0=x0)
                audit_result(opt, cost)
                best_by_cell[(nk, ntau)] = opt.best_params
                rows.append(IsingRow(n_sites, nk, ntau, "caffeine",
                                     opt.best_cost - e_target, optimizer=opt))
            except PropagationError as exc:
                rows.append(IsingRow(n_sites, nk, ntau, "caffeine", float("nan"),
                                     error=str(exc)))
            cell_index += 1
    return rows


def run_ising_anneal(cfg: ExperimentConfig, jobs: int = 1) -> IsingReport:
    """Energy-gap table over the (N, N_k, N_tau) grid, unassisted baseline included.

    Within one system size, cells run coarse to fine: each optimization is
    warm-started from the best coarser drive table, which the finer grid
    represents exactly.  Different sizes are independent and may run in
    parallel.
    """
    if cfg.model_kind != "ising":
        raise ValueError("this experiment requires the Ising model")
    sizes = list(cfg.ising.sizes)
    seed_bases = {n: cfg.seed + 10 + 100 * i for i, n in enumerate(sizes)}

    def work(n):
        return _ising_size_group(cfg, n, seed_bases[n])

    error = None
    chunks: list[list[IsingRow]] = []
    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                chunks = list(pool.map(work, sizes))
        else:
            for n in sizes:
                chunks.append(work(n))
    except KeyboardInterrupt:
        error = "interrupted; partial rows only"

    rows = [row for chunk in chunks for row in chunk]
    return IsingReport(rows=rows, seed=cfg.seed, error=error)


@dataclass
class SegmentResult:
    index: int
    learned: tuple[float, ...]
    energy: float
    analytic_average: Optional[float] = None
    flagged: bool = False
    optimizer: Optional[OptimizationResult] = None
    state_ref: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"segment": self.index, "learned": list(self.learned),
               "energy": self.energy, "flagged": self.flagged}
        if self.analytic_average is not None:
            out["analytic_average"] = self.analytic_average
        return out


@dataclass
class AGPLearningReport:
    segments: list[SegmentResult]
    analytic_curve: Optional[np.ndarray]  # (t, lambda, beta1) rows, two-qubit only
    seed: int
    error: Optional[str] = None
    final_state: Optional[np.ndarray] = None

    def learned_table(self) -> np.ndarray:
        return np.array([s.learned for s in self.segments]).T

    def to_dict(self) -> dict:
        return {"experiment": "agp_learning", "seed": self.seed,
                "segments": [s.to_dict() for s in self.segments],
                "error": self.error}


def segment_average_analytic_beta1(p: TwoQubitParams, schedule: Schedule,
                                   omega0: float, t_lo: float, t_hi: float,
                                   n_quad: int = 201) -> float:
    """Time average of the closed-form drive coefficient over a segment window."""
    ts = np.linspace(t_lo, t_hi, n_quad)
    vals = [analytic_floquet_beta1(p, lambda_at(schedule, t), omega0) for t in ts]
    return float(trapezoid(vals, ts) / (t_hi - t_lo))


def run_agp_learning(cfg: ExperimentConfig) -> AGPLearningReport:
    """Learn the drive coefficients segment by segment through energy minimization.

    The protocol runs in series over the N_tau uniform windows: each segment's
    coefficients are optimized to minimize the energy at the segment's end,
    starting from the previous segment's final state.  For the two-qubit model
    the closed-form coefficient provides an oracle column.  Smooth-schedule
    segments past the tail cutoff are flagged: the protocol implements the
    product lambda_dot * beta, so where lambda_dot tends to zero the learned
    values carry no information.
    """
    two_qubit = cfg.model_kind == "two_qubit"
    if two_qubit:
        model = two_qubit_model(cfg.two_qubit)
    else:
        params = uniform_ising(cfg.ising.sizes[0], cfg.ising.coupling,
                               cfg.ising.field, cfg.ising.boundary)
        model = AnnealModel(ising_model(params))
    _, psi = ground_state(model.hamiltonian(0.0))

    tau = cfg.schedule.tau
    learn = cfg.learning
    n_seg = learn.n_segments
    nk = cfg.drive.n_harmonics
    omega = cfg.drive.omega(tau)
    omega0 = cfg.drive.omega0(tau)
    dt = tau / n_seg

    segments: list[SegmentResult] = []
    error = None
    warm_start = None
    for j in range(1, n_seg + 1):
        t_s, t_f = (j - 1) * dt, j * dt
        ctx = CostContext(model, cfg.schedule, psi, cfg.propagator,
                          omega=omega, omega0=omega0, n_harmonics=nk,
                          n_segments=n_seg, t_window=(t_s, t_f))
        cost = make_cost(CostSpec("segment_energy"), ctx)
        bounds = Bounds.uniform(*learn.bounds, nk)
        try:
            opt = dual_anneal(cost, bounds,
                              replace(cfg.optimizer, rng_seed=cfg.seed + 100 + j),
                              x0=warm_start)
            audit_result(opt, cost)
        except PropagationError as exc:
            error = f"segment {j}: {exc}"
            break
        learned = tuple(float(x) for x in opt.best_params)
        warm_start = opt.best_params
        flagged = (cfg.schedule.kind == "smooth"
                   and t_s / tau >= learn.tail_cutoff - 1e-9)
        analytic_avg = None
        if two_qubit:
            analytic_avg = segment_average_analytic_beta1(
                cfg.two_qubit, cfg.schedule, omega0, t_s, t_f)
        # chain: advance the state through this segment with the learned values
        beta = beta_from_flat(np.repeat(opt.best_params, n_seg), nk, n_seg, tau)
        plan = plan_floquet(model, cfg.schedule,
                            FloquetDriveSpec(omega, omega0, nk, beta,
                                             enforce_separation=False))
        psi = propagate(plan, psi, (t_s, t_f), cfg.propagator)
        segments.append(SegmentResult(j, learned, opt.best_cost, analytic_avg,
                                      flagged, opt, state_ref=psi.copy()))

    curve = None
    if two_qubit:
        ts = np.linspace(0.0, tau, 401)
        curve = np.array([
            (t, lambda_at(cfg.schedule, t),
             analytic_floquet_beta1(cfg.two_qubit, lambda_at(cfg.schedule, t), omega0))
            for t in ts
        ])
    return AGPLearningReport(segments=segments, analytic_curve=curve,
                             seed=cfg.seed, error=error,
                             final_state=psi if error is None else None)


@dataclass
class ExactCDReport:
    final_infidelity: float
    min_instantaneous_fidelity: float
    record: TrajectoryRecord
    instantaneous_fidelity: np.ndarray

    def to_dict(self) -> dict:
        return {"experiment": "exact_cd",
                "final_infidelity": self.final_infidelity,
                "min_instantaneous_fidelity": self.min_instantaneous_fidelity}


def reference_exact_cd(cfg: ExperimentConfig) -> ExactCDReport:
    """Gold-standard arm: propagate H + lambda_dot * A and verify adiabatic following."""
    model, psi0, target = _two_qubit_setup(cfg)
    plan = plan_cd_two_qubit(model, cfg.schedule)
    psi, record = propagate_recorded(plan, psi0, cfg.schedule, model,
                                     cfg.propagator, cfg.trajectory_samples)
    fid, _ = instantaneous_fidelity_series(record, model, cfg.schedule)
    return ExactCDReport(
        final_infidelity=1.0 - abs(np.vdot(target, psi)) ** 2,
        min_instantaneous_fidelity=float(fid.min()),
        record=record,
        instantaneous_fidelity=fid,
    )

"""Time-dependent Schrodinger propagation and Hamiltonian assembly for all arms.

Structured Hamiltonians (everything the experiments use) run through compiled
kernels; arbitrary callables fall back to scipy's DOP853.  Propagation is pure:
given the same plan, initial state and config, the result is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import integrators as K
from .agp import analytic_floquet_beta1, analytical_two_qubit_agp, exact_agp
from .models import AnnealModel, ControlTermSpec, TwoQubitModel
from .operators import materialize, opsum, term
from .schedules import PiecewiseBeta, Schedule, beta_at, lambda_at, lambda_dot_at

DEFAULT_MIN_SEPARATION = 100.0


class PropagationError(RuntimeError):
    """Propagation failed; carries a diagnostics payload."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StepBudgetError(PropagationError):
    """Step-count budget exhausted before reaching the final time."""


@dataclass(frozen=True)
class PropagatorConfig:
    """Propagation controls.

    The default oscillation sampling of 80 steps per fast period keeps the
    norm drift of even strongly driven trajectories below 1e-9 at the default
    tolerances; cost evaluations inside optimization loops typically relax
    this to the floor of 20 together with looser tolerances.
    """

    method: str = "adaptive-embedded-RK"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    min_steps_per_oscillation: int = 80
    max_steps: int = 50_000_000
    fixed_step_count: Optional[int] = None
    norm_drift_abort: float = 1e-6

    def __post_init__(self):
        if self.method not in ("adaptive-embedded-RK", "fixed-step-expm"):
            raise ValueError(f"unknown propagation method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.min_steps_per_oscillation < 20:
            raise ValueError("min_steps_per_oscillation must be at least 20")


@dataclass(frozen=True)
class FloquetDriveSpec:
    """Fast-oscillation drive: frequency, reference frequency and coefficient table."""

    omega: float
    omega0: float
    n_harmonics: int
    beta: PiecewiseBeta
    enforce_separation: bool = True
    min_separation: float = DEFAULT_MIN_SEPARATION

    def __post_init__(self):
        if self.omega <= 0 or self.omega0 <= 0:
            raise ValueError("omega and omega0 must be positive")
        if self.beta.n_harmonics != self.n_harmonics:
            raise ValueError(
                f"beta table has {self.beta.n_harmonics} harmonics, "
                f"spec says {self.n_harmonics}"
            )
        cycles = self.omega * self.beta.tau / (2.0 * np.pi)
        if self.enforce_separation and cycles < self.min_separation:
            raise ValueError(
                f"omega*tau/(2 pi) = {cycles:.1f} below the fast-oscillation "
                f"separation requirement of {self.min_separation}"
            )


@dataclass(frozen=True)
class PropagationPlan:
    """Packed structured Hamiltonian: H(t) = sum_m coeff_m(t) * mats[m].

    ``mats`` is what the compiled kernel consumes (a compressed layout for
    structured anneal models); ``dense_mats`` always holds the full matrices
    and backs direct assembly and the fixed-step integrator.
    """

    pars: np.ndarray
    mats: np.ndarray
    dense_mats: np.ndarray
    label: str
    omega: float = 0.0

    @property
    def dim(self) -> int:
        return self.dense_mats.shape[1]

    def dense_pars(self) -> np.ndarray:
        if int(self.pars[K.P_MODEL]) == 2:
            p = self.pars.copy()
            p[K.P_MODEL] = 1
            return p
        return self.pars

    def matrix_at(self, t: float) -> np.ndarray:
        c = K.coefficients_at(t, self.dense_pars())
        return (c[0] * self.dense_mats[0] + c[1] * self.dense_mats[1]
                + c[2] * self.dense_mats[2])


def _pack(model, schedule: Schedule, arm: int, table: Sequence[float] = (),
          omega: float = 0.0, omega0: float = 0.0, nk: int = 1, ntau: int = 1,
          structured: bool = False) -> np.ndarray:
    p = np.zeros(K.P_TABLE + max(len(table), 1))
    p[K.P_TAU] = schedule.tau
    p[K.P_SCHEDULE] = 0.0 if schedule.kind == "smooth" else 1.0
    p[K.P_MODEL] = 2 if structured else model.model_code
    p[K.P_ARM] = arm
    if isinstance(model, TwoQubitModel):
        p[K.P_J] = model.params.J
        p[K.P_HZ] = model.params.h_z
    p[K.P_OMEGA] = omega
    p[K.P_RATIO] = omega / omega0 if omega0 > 0 else 0.0
    p[K.P_OMEGA0] = omega0
    p[K.P_NK] = nk
    p[K.P_NTAU] = ntau
    if len(table):
        p[K.P_TABLE:K.P_TABLE + len(table)] = table
    return p


def _make_plan(model, pars: np.ndarray, label: str, omega: float = 0.0,
               dense_override: Optional[np.ndarray] = None) -> PropagationPlan:
    dense = dense_override if dense_override is not None else model.kernel_matrices()
    structured = model.structured_kernel()
    if int(pars[K.P_MODEL]) == 2 and structured is not None:
        return PropagationPlan(pars, structured, dense, label, omega)
    return PropagationPlan(pars, dense, dense, label, omega)


def _is_structured(model) -> bool:
    return model.structured_kernel() is not None


def plan_bare(model, schedule: Schedule) -> PropagationPlan:
    pars = _pack(model, schedule, K.ARM_BARE, structured=_is_structured(model))
    return _make_plan(model, pars, "bare")


def plan_floquet(model, schedule: Schedule, drive: FloquetDriveSpec) -> PropagationPlan:
    flat = drive.beta.as_array().ravel()
    pars = _pack(model, schedule, K.ARM_FLOQUET, table=flat, omega=drive.omega,
                 omega0=drive.omega0, nk=drive.beta.n_harmonics,
                 ntau=drive.beta.n_segments, structured=_is_structured(model))
    return _make_plan(model, pars, "floquet", drive.omega)


def plan_floquet_analytic(model: TwoQubitModel, schedule: Schedule,
                          omega: float, omega0: float) -> PropagationPlan:
    if not isinstance(model, TwoQubitModel):
        raise TypeError("the analytic drive coefficient exists only for the two-qubit model")
    p = model.params
    z_max = 2.0 * np.sqrt(p.J**2 + 4.0 * p.h_z**2) / omega0
    if z_max > 1.2:
        raise ValueError(
            f"largest gap-to-reference ratio {z_max:.2f} exceeds the accurate "
            "range of the harmonic-matching series; raise omega0"
        )
    pars = _pack(model, schedule, K.ARM_FLOQUET_ANALYTIC, omega=omega, omega0=omega0)
    return _make_plan(model, pars, "floquet-analytic", omega)


def plan_controlled(model: TwoQubitModel, schedule: Schedule,
                    ctrl: ControlTermSpec) -> PropagationPlan:
    if not isinstance(model, TwoQubitModel):
        raise TypeError("the sine-series control term is defined for the two-qubit model")
    pars = _pack(model, schedule, K.ARM_CONTROLLED, table=ctrl.gammas,
                 omega0=ctrl.omega0, nk=len(ctrl.gammas))
    return _make_plan(model, pars, "controlled")


def plan_cd_two_qubit(model: TwoQubitModel, schedule: Schedule) -> PropagationPlan:
    if not isinstance(model, TwoQubitModel):
        raise TypeError("the closed-form gauge potential exists only for the two-qubit model")
    pars = _pack(model, schedule, K.ARM_CD)
    mats = model.kernel_matrices().copy()
    mats[2] = materialize(opsum(
        term(1.0, [(0, "X"), (1, "Y")], 2), term(1.0, [(0, "Y"), (1, "X")], 2)
    ))
    return _make_plan(model, pars, "exact-cd", dense_override=mats)


# ---------------------------------------------------------------------------
# Hamiltonian assembly (direct, used by the generic path and as an oracle for
# the kernel coefficients)
# ---------------------------------------------------------------------------

def assemble_cd_hamiltonian(model, schedule: Schedule, t: float,
                            agp: str = "analytic") -> np.ndarray:
    """H(lambda(t)) + lambda_dot(t) * A(lambda(t)).

    ``agp`` selects the closed-form two-qubit potential or the spectral
    construction (any model, degeneracies permitting).
    """
    lam = lambda_at(schedule, t)
    ldot = lambda_dot_at(schedule, t)
    h = model.hamiltonian(lam)
    if agp == "analytic":
        if not isinstance(model, TwoQubitModel):
            raise TypeError("analytic gauge potential requires the two-qubit model")
        a = analytical_two_qubit_agp(model.params, lam).matrix
    elif agp == "exact":
        a = exact_agp(h, model.d_lambda_h()).matrix
    else:
        raise ValueError(f"unknown agp source {agp!r}")
    return h + ldot * a


def assemble_floquet_hamiltonian(model, schedule: Schedule, drive: FloquetDriveSpec,
                                 t: float) -> np.ndarray:
    """(1 + (omega/omega0) cos(omega t)) H(lambda) + lambda_dot * drive(t) * dH."""
    lam = lambda_at(schedule, t)
    ldot = lambda_dot_at(schedule, t)
    mod = 1.0 + (drive.omega / drive.omega0) * np.cos(drive.omega * t)
    b = 0.0
    for k in range(1, drive.beta.n_harmonics + 1):
        b += beta_at(drive.beta, k, t) * drive.omega0 * np.sin((2 * k - 1) * drive.omega * t)
    return mod * model.hamiltonian(lam) + ldot * b * model.d_lambda_h()


def assemble_controlled_hamiltonian(model: TwoQubitModel, schedule: Schedule,
                                    ctrl: ControlTermSpec, t: float) -> np.ndarray:
    lam = lambda_at(schedule, t)
    amp = 0.0
    for k, g in enumerate(ctrl.gammas, start=1):
        amp += g * ctrl.omega0 * np.sin(2.0 * np.pi * k * t / ctrl.tau)
    return model.hamiltonian(lam) + amp * model.field_matrix


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray          # (n_samples, d)
    lambdas: np.ndarray
    energies: np.ndarray
    norm_drifts: np.ndarray

    def max_norm_drift(self) -> float:
        return float(self.norm_drifts.max())


def _max_step_for(plan_omega: float, span: float, cfg: PropagatorConfig) -> float:
    if plan_omega > 0:
        return (2.0 * np.pi / plan_omega) / cfg.min_steps_per_oscillation
    return span / 20.0


def _default_fixed_steps(plan_omega: float, span: float, cfg: PropagatorConfig) -> int:
    if cfg.fixed_step_count is not None:
        return cfg.fixed_step_count
    if plan_omega > 0:
        cycles = plan_omega * span / (2.0 * np.pi)
        return int(math.ceil(cycles * 8 * cfg.min_steps_per_oscillation))
    return 4096


def _check_norm(psi: np.ndarray, cfg: PropagatorConfig, context: dict) -> float:
    drift = abs(float(np.linalg.norm(psi)) - 1.0)
    if drift > cfg.norm_drift_abort:
        raise PropagationError(
            f"norm drift {drift:.3e} beyond abort threshold {cfg.norm_drift_abort:.1e}",
            diagnostics={**context, "norm_drift": drift},
        )
    return drift


def _propagate_plan(plan: PropagationPlan, psi0: np.ndarray, t0: float, t1: float,
                    cfg: PropagatorConfig) -> np.ndarray:
    span = t1 - t0
    if cfg.method == "adaptive-embedded-RK":
        max_step = _max_step_for(plan.omega, span, cfg)
        y, status, n_att, n_acc = K.adaptive_rk(
            plan.pars, plan.mats, np.ascontiguousarray(psi0, dtype=np.complex128),
            float(t0), float(t1), cfg.rel_tol, cfg.abs_tol, max_step, cfg.max_steps,
        )
        if status == K.STATUS_STEP_BUDGET:
            raise StepBudgetError(
                f"step budget {cfg.max_steps} exhausted in [{t0}, {t1}]",
                diagnostics={"label": plan.label, "attempted": n_att, "accepted": n_acc},
            )
    else:
        n_steps = _default_fixed_steps(plan.omega, span, cfg)
        y = K.fixed_step_expm(
            plan.dense_pars(), plan.dense_mats,
            np.ascontiguousarray(psi0, dtype=np.complex128),
            float(t0), float(t1), n_steps,
        )
    _check_norm(y, cfg, {"label": plan.label, "t0": t0, "t1": t1})
    return y


def _propagate_callable(h_of_t: Callable[[float], np.ndarray], psi0: np.ndarray,
                        t0: float, t1: float, cfg: PropagatorConfig,
                        max_step: Optional[float] = None) -> np.ndarray:
    if cfg.method == "fixed-step-expm":
        n_steps = _default_fixed_steps(0.0, t1 - t0, cfg)
        h = (t1 - t0) / n_steps
        a1, a2 = K._CF_A1, K._CF_A2
        node = K._CF_NODE
        y = psi0.astype(np.complex128)
        for s in range(n_steps):
            t = t0 + s * h
            h1 = h_of_t(t + (0.5 - node) * h)
            h2 = h_of_t(t + (0.5 + node) * h)
            for g in (a1 * h1 + a2 * h2, a2 * h1 + a1 * h2):
                w, v = np.linalg.eigh(g)
                y = v @ (np.exp(-1j * h * w) * (v.conj().T @ y))
        _check_norm(y, cfg, {"label": "callable", "t0": t0, "t1": t1})
        return y
    sol = solve_ivp(
        lambda t, y: -1j * (h_of_t(t) @ y), (t0, t1), psi0.astype(complex),
        method="DOP853", rtol=cfg.rel_tol, atol=cfg.abs_tol,
        max_step=max_step if max_step is not None else (t1 - t0) / 20.0,
    )
    if not sol.success:
        raise PropagationError(f"generic propagation failed: {sol.message}",
                               diagnostics={"t0": t0, "t1": t1})
    y = sol.y[:, -1]
    _check_norm(y, cfg, {"label": "callable", "t0": t0, "t1": t1})
    return y


def propagate(h: "PropagationPlan | Callable[[float], np.ndarray]", psi0: np.ndarray,
              t_span: tuple[float, float], cfg: Optional[PropagatorConfig] = None,
              self_check: bool = False) -> np.ndarray:
    """Propagate i d psi/dt = H(t) psi over t_span; returns the final state.

    ``h`` is either a PropagationPlan (compiled fast path) or a callable
    t -> Hermitian matrix (generic path).  With ``self_check`` the run is
    repeated at halved tolerances and the two results must agree to 1e-10
    in fidelity.
    """
    cfg = cfg or PropagatorConfig()
    t0, t1 = t_span
    if t1 <= t0:
        raise ValueError("t_span must have t_f > t_s")
    if abs(np.linalg.norm(psi0) - 1.0) > max(1e-9, cfg.norm_drift_abort):
        raise ValueError("initial state must be unit norm")
    if isinstance(h, PropagationPlan):
        y = _propagate_plan(h, psi0, t0, t1, cfg)
    else:
        y = _propagate_callable(h, psi0, t0, t1, cfg)
    if self_check:
        tighter = replace(cfg, rel_tol=cfg.rel_tol / 2.0, abs_tol=cfg.abs_tol / 2.0)
        if isinstance(h, PropagationPlan):
            y2 = _propagate_plan(h, psi0, t0, t1, tighter)
        else:
            y2 = _propagate_callable(h, psi0, t0, t1, tighter)
        mismatch = abs(1.0 - abs(np.vdot(y2, y)) ** 2)
        if mismatch > 1e-10:
            raise PropagationError(
                f"self-check failed: halved tolerances moved fidelity by {mismatch:.3e}",
                diagnostics={"mismatch": mismatch},
            )
    return y


def propagate_recorded(h: "PropagationPlan | Callable[[float], np.ndarray]",
                       psi0: np.ndarray, schedule: Schedule, model,
                       cfg: Optional[PropagatorConfig] = None,
                       n_samples: int = 201) -> tuple[np.ndarray, TrajectoryRecord]:
    """Propagate over the full protocol, sampling the state at uniform times."""
    cfg = cfg or PropagatorConfig()
    times = np.linspace(0.0, schedule.tau, n_samples)
    d = len(psi0)
    states = np.empty((n_samples, d), dtype=complex)
    states[0] = psi0
    psi = np.asarray(psi0, dtype=complex)
    for i in range(1, n_samples):
        psi = propagate(h, psi, (times[i - 1], times[i]), cfg)
        states[i] = psi
    lambdas = np.array([lambda_at(schedule, t) for t in times])
    energies = np.empty(n_samples)
    drifts = np.empty(n_samples)
    for i, t in enumerate(times):
        hmat = model.hamiltonian(lambdas[i])
        energies[i] = float(np.real(states[i].conj() @ (hmat @ states[i])))
        drifts[i] = abs(float(np.linalg.norm(states[i])) - 1.0)
    return psi, TrajectoryRecord(times, states, lambdas, energies, drifts)


def instantaneous_fidelity_series(record: TrajectoryRecord, model,
                                  schedule: Schedule, level: int = 0,
                                  ambiguity_tol: float = 1e-3
                                  ) -> tuple[np.ndarray, list[int]]:
    """Overlap with the tracked instantaneous eigenstate at each sample time.

    The eigenstate is followed across time by maximal-overlap continuation,
    not by energy ordering, so level crossings do not swap the branch.
    Returns (fidelities, indices of samples where tracking was ambiguous).
    """
    n = len(record.times)
    fidelities = np.empty(n)
    flags: list[int] = []
    tracked = None
    for i in range(n):
        hmat = model.hamiltonian(record.lambdas[i])
        energies, vectors = np.linalg.eigh(hmat)
        if tracked is None:
            tracked = vectors[:, level]
        else:
            overlaps = np.abs(vectors.conj().T @ tracked)
            order = np.argsort(overlaps)[::-1]
            if len(order) > 1 and overlaps[order[0]] - overlaps[order[1]] < ambiguity_tol:
                flags.append(i)
            tracked = vectors[:, order[0]]
        fidelities[i] = abs(np.vdot(tracked, record.states[i])) ** 2
    return fidelities, flags

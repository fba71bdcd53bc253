"""floqcd: Floquet-engineered counterdiabatic driving with numerically optimized
coefficients, for quantum state preparation, spin-chain annealing and learning
the adiabatic gauge potential."""

__version__ = "0.1.0"

from .agp import (
    AGPResult,
    AnsatzCoefficients,
    BetaAlphaCalibration,
    DegenerateSpectrumError,
    UnsupportedHarmonicError,
    analytic_floquet_beta1,
    analytical_two_qubit_agp,
    betas_to_alphas,
    commutator_ansatz_agp,
    exact_agp,
    fit_ansatz_coefficients,
    two_qubit_calibration,
)
from .dynamics import (
    FloquetDriveSpec,
    PropagationError,
    PropagatorConfig,
    TrajectoryRecord,
    assemble_cd_hamiltonian,
    assemble_controlled_hamiltonian,
    assemble_floquet_hamiltonian,
    instantaneous_fidelity_series,
    propagate,
    propagate_recorded,
)
from .models import (
    AnnealModel,
    AnnealSpec,
    ControlTermSpec,
    IsingParams,
    TwoQubitParams,
    ising_model,
    two_qubit_model,
    uniform_ising,
)
from .operators import (
    OperatorSum,
    PauliTerm,
    commutator,
    eigendecompose,
    ground_state,
    materialize,
)
from .optimize import (
    Bounds,
    CostSpec,
    DualAnnealingConfig,
    OptimizationResult,
    dual_anneal,
    landscape_scan,
    make_cost,
)
from .protocols import (
    ExperimentConfig,
    reference_exact_cd,
    run_agp_learning,
    run_ising_anneal,
    run_state_prep,
)
from .schedules import PiecewiseBeta, Schedule, beta_at, lambda_at, lambda_dot_at

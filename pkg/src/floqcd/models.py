"""Hamiltonian families: annealing interpolation, two-qubit entangler, 1D Ising chain.

Two families are used throughout.  The generic annealing family interpolates
(1-lambda) H_m + lambda H_p.  The two-qubit entangling model carries its
lambda dependence only on the local field term, so it is kept as its own
family rather than forced into mixer/problem form; this keeps its derivative
term exact and simple.

Energies are measured in units of the coupling J, times in 1/J, hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .operators import (
    DimensionMismatchError,
    OperatorSum,
    PauliTerm,
    materialize,
    opsum,
    term,
)

# model codes used by the compiled propagation kernel
MODEL_TWO_QUBIT = 0
MODEL_ANNEAL = 1
MODEL_ANNEAL_STRUCTURED = 2


@dataclass(frozen=True)
class TwoQubitParams:
    """Couplings of the two-qubit entangling Hamiltonian
    H(lambda) = -J (X1 X2 + Z1 Z2) + h_z (lambda - 1)(Z1 + Z2)."""

    J: float = 1.0
    h_z: float = 5.0

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError("J must be positive")


class TwoQubitModel:
    """Two-qubit family: H(lambda) and its lambda-independent derivative."""

    n_sites = 2
    model_code = MODEL_TWO_QUBIT

    def __init__(self, params: TwoQubitParams):
        self.params = params
        J = params.J
        coupling = opsum(
            term(-J, [(0, "X"), (1, "X")], 2), term(-J, [(0, "Z"), (1, "Z")], 2)
        )
        zsum = opsum(term(1.0, [(0, "Z")], 2), term(1.0, [(1, "Z")], 2))
        self.coupling_matrix = materialize(coupling)
        self.field_matrix = materialize(zsum)
        self._kmats: Optional[np.ndarray] = None

    def hamiltonian(self, lam: float) -> np.ndarray:
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda={lam} outside protocol domain [0, 1]")
        return self.coupling_matrix + self.params.h_z * (lam - 1.0) * self.field_matrix

    def d_lambda_h(self) -> np.ndarray:
        return self.params.h_z * self.field_matrix

    def kernel_matrices(self) -> np.ndarray:
        if self._kmats is None:
            mats = np.zeros((3, 4, 4), dtype=np.complex128)
            mats[0] = self.coupling_matrix
            mats[1] = self.field_matrix
            self._kmats = mats
        return self._kmats

    def structured_kernel(self) -> Optional[np.ndarray]:
        return None


def two_qubit_model(p: TwoQubitParams) -> TwoQubitModel:
    return TwoQubitModel(p)


@dataclass(frozen=True)
class AnnealSpec:
    """Mixer/problem pair for H(lambda) = (1-lambda) H_m + lambda H_p."""

    h_m: OperatorSum
    h_p: OperatorSum

    def __post_init__(self):
        if self.h_m.n_sites != self.h_p.n_sites:
            raise DimensionMismatchError("h_m and h_p disagree on system size")

    @property
    def n_sites(self) -> int:
        return self.h_m.n_sites


class AnnealModel:
    """Materialized annealing family built from an AnnealSpec.

    When the mixer is exactly -sum_i X_i and the problem Hamiltonian is
    diagonal in the computational basis (every Ising instance), propagation
    uses a structured kernel that applies the mixer through bit flips instead
    of a dense matrix-vector product.
    """

    model_code = MODEL_ANNEAL

    def __init__(self, spec: AnnealSpec, max_sites: int = 12):
        self.spec = spec
        self.n_sites = spec.n_sites
        self.mixer_matrix = materialize(spec.h_m, max_sites=max_sites)
        self.problem_matrix = materialize(spec.h_p, max_sites=max_sites)
        self._kmats: Optional[np.ndarray] = None
        self._smats: Optional[np.ndarray] = None
        uniform_mixer = materialize(
            OperatorSum(tuple(term(-1.0, [(i, "X")], self.n_sites)
                              for i in range(self.n_sites))),
            max_sites=max_sites,
        )
        self.is_structured = bool(
            np.array_equal(self.mixer_matrix, uniform_mixer)
            and np.array_equal(self.problem_matrix,
                               np.diag(np.diag(self.problem_matrix)))
        )

    def hamiltonian(self, lam: float) -> np.ndarray:
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda={lam} outside protocol domain [0, 1]")
        return (1.0 - lam) * self.mixer_matrix + lam * self.problem_matrix

    def d_lambda_h(self) -> np.ndarray:
        return self.problem_matrix - self.mixer_matrix

    def kernel_matrices(self) -> np.ndarray:
        if self._kmats is None:
            d = 2**self.n_sites
            mats = np.zeros((3, d, d), dtype=np.complex128)
            mats[0] = self.mixer_matrix
            mats[1] = self.problem_matrix
            self._kmats = mats
        return self._kmats

    def structured_kernel(self) -> Optional[np.ndarray]:
        if not self.is_structured:
            return None
        if self._smats is None:
            d = 2**self.n_sites
            mats = np.zeros((3, 1, d), dtype=np.complex128)
            mats[1, 0, :] = np.diag(self.problem_matrix)
            self._smats = mats
        return self._smats


def hamiltonian_at(model: "TwoQubitModel | AnnealModel", lam: float) -> np.ndarray:
    return model.hamiltonian(lam)


@dataclass(frozen=True)
class IsingParams:
    """1D Ising chain: H_m = -sum_i X_i, H_p = -sum J_i Z_i Z_{i+1} + sum h_i Z_i.

    The chain is nearest-neighbour only.  Boundary conditions are not pinned
    by the physics here, so both are available; open is the default.
    """

    n_sites: int
    couplings: tuple[float, ...]
    fields: tuple[float, ...]
    boundary: str = "open"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        n_bonds = self.n_sites - 1 if self.boundary == "open" else self.n_sites
        if len(self.couplings) != n_bonds:
            raise ValueError(
                f"expected {n_bonds} couplings for {self.boundary} chain of "
                f"{self.n_sites} sites, got {len(self.couplings)}"
            )
        if len(self.fields) != self.n_sites:
            raise ValueError(
                f"expected {self.n_sites} fields, got {len(self.fields)}"
            )
        object.__setattr__(self, "couplings", tuple(float(c) for c in self.couplings))
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))


def uniform_ising(n_sites: int, J: float = 1.0, h: float = 0.0,
                  boundary: str = "open") -> IsingParams:
    n_bonds = n_sites - 1 if boundary == "open" else n_sites
    return IsingParams(n_sites, (J,) * n_bonds, (h,) * n_sites, boundary)


def ising_model(p: IsingParams) -> AnnealSpec:
    n = p.n_sites
    mixer_terms = [term(-1.0, [(i, "X")], n) for i in range(n)]
    problem_terms = []
    for bond, J in enumerate(p.couplings):
        i, j = bond, (bond + 1) % n
        problem_terms.append(term(-J, [(i, "Z"), (j, "Z")], n))
    for i, h in enumerate(p.fields):
        if h != 0.0:
            problem_terms.append(term(h, [(i, "Z")], n))
    if not problem_terms:
        problem_terms.append(term(0.0, [(0, "Z")], n))
    return AnnealSpec(OperatorSum(tuple(mixer_terms)), OperatorSum(tuple(problem_terms)))


@dataclass(frozen=True)
class ControlTermSpec:
    """Sine-series local-field control H_c(t) = sum_k gamma_k sin(2 pi k t/tau)(Z1+Z2).

    Amplitudes are given in units of the reference frequency omega0; the term
    vanishes at t=0 and t=tau.
    """

    gammas: tuple[float, ...]
    tau: float
    omega0: float

    def __post_init__(self):
        if self.tau <= 0 or self.omega0 <= 0:
            raise ValueError("tau and omega0 must be positive")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))


def control_term_at(spec: ControlTermSpec, t: float, field_matrix: np.ndarray) -> np.ndarray:
    """Evaluate the control term at time t, given the materialized Z1+Z2."""
    if not 0.0 <= t <= spec.tau * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {spec.tau}]")
    amp = 0.0
    for k, g in enumerate(spec.gammas, start=1):
        amp += g * spec.omega0 * np.sin(2.0 * np.pi * k * t / spec.tau)
    return amp * field_matrix

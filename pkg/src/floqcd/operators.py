"""Dense many-body spin operators: Pauli strings, sums, commutators, diagonalization.

Operators act on N qubits and are materialized as dense complex matrices of
dimension 2^N.  Dense storage is deliberate: everything in this package runs
at N <= ~10, where dense linear algebra is both simpler and fast enough.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PAULI_LABELS = ("I", "X", "Y", "Z")

DEFAULT_SITE_CAP = 12

HERMITICITY_TOL = 1e-12


class SizeLimitError(ValueError):
    """System size exceeds the configured cap (guards accidental memory blowup)."""


class DimensionMismatchError(ValueError):
    """Operands live in different Hilbert spaces."""


class NonHermitianError(ValueError):
    """Matrix expected to be Hermitian is not, beyond tolerance."""


@dataclass(frozen=True)
class PauliTerm:
    """A single Pauli string ``coeff * prod_i sigma^{label_i}_i`` on N sites.

    Sites not listed carry the identity.  Site indices must be distinct and
    in ``[0, n_sites)``.
    """

    coeff: complex
    labels: tuple[tuple[int, str], ...]
    n_sites: int

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be positive, got {self.n_sites}")
        seen = set()
        for site, label in self.labels:
            if label not in PAULI_LABELS:
                raise ValueError(f"unknown Pauli label {label!r}")
            if not 0 <= site < self.n_sites:
                raise ValueError(f"site {site} outside [0, {self.n_sites})")
            if site in seen:
                raise ValueError(f"duplicate site index {site}")
            seen.add(site)
        object.__setattr__(self, "labels", tuple(sorted(self.labels)))
        object.__setattr__(self, "coeff", complex(self.coeff))


def term(coeff: complex, labels: Iterable[tuple[int, str]], n_sites: int) -> PauliTerm:
    return PauliTerm(coeff, tuple(labels), n_sites)


@dataclass(frozen=True)
class OperatorSum:
    """Linear combination of Pauli terms sharing one system size."""

    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("OperatorSum needs at least one term")
        n = self.terms[0].n_sites
        for t in self.terms:
            if t.n_sites != n:
                raise DimensionMismatchError(
                    f"terms mix system sizes {n} and {t.n_sites}"
                )

    @property
    def n_sites(self) -> int:
        return self.terms[0].n_sites

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if other.n_sites != self.n_sites:
            raise DimensionMismatchError("cannot add operators of different size")
        return OperatorSum(self.terms + other.terms)

    def __rmul__(self, scalar: complex) -> "OperatorSum":
        return OperatorSum(
            tuple(PauliTerm(scalar * t.coeff, t.labels, t.n_sites) for t in self.terms)
        )


def opsum(*terms: PauliTerm) -> OperatorSum:
    return OperatorSum(tuple(terms))


def _materialize_term(t: PauliTerm) -> np.ndarray:
    by_site = dict(t.labels)
    out = np.array([[t.coeff]], dtype=complex)
    for site in range(t.n_sites):
        out = np.kron(out, PAULI_MATRICES[by_site.get(site, "I")])
    return out


def materialize(op: OperatorSum | PauliTerm, max_sites: int = DEFAULT_SITE_CAP) -> np.ndarray:
    """Realize an operator expression as a dense 2^N x 2^N complex matrix.

    ``max_sites`` guards against accidental exponential blowup; pass a larger
    value explicitly to override.
    """
    if isinstance(op, PauliTerm):
        op = OperatorSum((op,))
    n = op.n_sites
    if n > max_sites:
        raise SizeLimitError(
            f"materializing {n} sites exceeds the cap of {max_sites}; "
            "pass max_sites explicitly to override"
        )
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    for t in op.terms:
        out += _materialize_term(t)
    return out


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[a, b] = ab - ba."""
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def hermiticity_defect(h: np.ndarray) -> float:
    """Largest entrywise deviation from Hermiticity, relative to the matrix scale."""
    scale = max(1.0, float(np.abs(h).max()))
    return float(np.abs(h - h.conj().T).max()) / scale


def require_hermitian(h: np.ndarray, tol: float = 1e-10) -> None:
    defect = hermiticity_defect(h)
    if defect > tol:
        raise NonHermitianError(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")


def eigendecompose(h: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix with a deterministic phase fix.

    Returns ascending energies and orthonormal eigenvector columns.  Each
    eigenvector is rotated so its largest-magnitude component is real and
    positive, which makes downstream gauge-dependent quantities reproducible.
    """
    require_hermitian(h, tol)
    energies, vectors = np.linalg.eigh(h)
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        i = int(np.argmax(np.abs(vectors[:, j])))
        pivot = vectors[i, j]
        if abs(pivot) > 0:
            vectors[:, j] *= abs(pivot) / pivot
    return energies, vectors


def ground_state(h: np.ndarray, degeneracy_tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Ground energy and state; rejects a degenerate ground space."""
    energies, vectors = eigendecompose(h)
    if len(energies) > 1 and energies[1] - energies[0] < degeneracy_tol * max(
        1.0, float(np.abs(energies).max())
    ):
        raise ValueError(
            f"ground space degenerate: E0={energies[0]:.12g}, E1={energies[1]:.12g}"
        )
    return float(energies[0]), vectors[:, 0]

"""Adiabatic gauge potential: exact spectral form, commutator ansatz, analytic two-qubit results.

The AGP of a family H(lambda) is the operator whose off-diagonal elements in
the instantaneous eigenbasis are <m|A|n> = -i <m|dH|n> / (E_m - E_n).  Adding
lambda_dot * A to H enforces adiabatic following at any protocol speed.  The
diagonal is gauge freedom and is fixed to zero here.

For the two-qubit entangling model the AGP is known in closed form,
    A(lambda) = J h_z / (2 (J^2 + 4 (lambda-1)^2 h_z^2)) * (X1 Y2 + Y1 X2),
which this module cross-checks against the spectral construction.  The same
model yields the closed-form coefficient of the oscillating drive that
emulates A through fast modulation (see `analytic_floquet_beta1`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import j0, j1

from .models import TwoQubitParams, two_qubit_model
from .operators import commutator, materialize, opsum, require_hermitian, term
from .schedules import PiecewiseBeta


class DegenerateSpectrumError(ValueError):
    """Degenerate levels coupled by dH make the AGP divergent."""


class UnsupportedHarmonicError(ValueError):
    """No calibrated conversion constant exists for this harmonic index."""


@dataclass(frozen=True)
class AGPResult:
    matrix: np.ndarray
    lam: Optional[float] = None
    gauge: str = "zero-diagonal"


@dataclass(frozen=True)
class AnsatzCoefficients:
    """Coefficients of the nested-commutator expansion A = i sum_k a_k C_{2k-1}."""

    alphas: tuple[float, ...]
    residual: Optional[float] = None
    rank_deficient: bool = False
    calibration: Optional[dict] = None


def exact_agp(h: np.ndarray, dh: np.ndarray, degeneracy_tol: float = 1e-10) -> AGPResult:
    """Spectral AGP of (h, dh) in the computational basis, zero-diagonal gauge.

    A degenerate pair coupled by dh raises DegenerateSpectrumError; an
    uncoupled degenerate pair contributes zero.
    """
    require_hermitian(h)
    energies, vectors = np.linalg.eigh(h)
    dh_eig = vectors.conj().T @ dh @ vectors
    scale = max(float(np.abs(energies).max()), 1e-300)
    coupling_scale = max(float(np.abs(dh_eig).max()), 1e-300)
    d = len(energies)
    a = np.zeros((d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            if m == n:
                continue
            gap = energies[m] - energies[n]
            if abs(gap) < degeneracy_tol * scale:
                if abs(dh_eig[m, n]) > 1e-10 * coupling_scale:
                    raise DegenerateSpectrumError(
                        f"levels {n} and {m} degenerate (gap {gap:.3e}) but coupled "
                        f"by dH ({abs(dh_eig[m, n]):.3e}): AGP divergent"
                    )
                continue
            a[m, n] = -1j * dh_eig[m, n] / gap
    return AGPResult(vectors @ a @ vectors.conj().T)


def two_qubit_agp_prefactor(p: TwoQubitParams, lam: float) -> float:
    return p.J * p.h_z / (2.0 * (p.J**2 + 4.0 * (lam - 1.0) ** 2 * p.h_z**2))


_XY_PLUS_YX = None


def _two_qubit_agp_operator() -> np.ndarray:
    global _XY_PLUS_YX
    if _XY_PLUS_YX is None:
        _XY_PLUS_YX = materialize(
            opsum(term(1.0, [(0, "X"), (1, "Y")], 2), term(1.0, [(0, "Y"), (1, "X")], 2))
        )
    return _XY_PLUS_YX


def analytical_two_qubit_agp(p: TwoQubitParams, lam: float) -> AGPResult:
    """Closed-form AGP of the two-qubit model: prefactor(lambda) * (X1 Y2 + Y1 X2)."""
    return AGPResult(
        two_qubit_agp_prefactor(p, lam) * _two_qubit_agp_operator(), lam=lam
    )


def nested_commutators(h: np.ndarray, dh: np.ndarray, cutoff: int) -> list[np.ndarray]:
    """C_{2k-1} = [H, [H, ... [H, dH]]] with 2k-1 nestings, for k = 1..cutoff."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    out = []
    current = dh
    for depth in range(1, 2 * cutoff):
        current = commutator(h, current)
        if depth % 2 == 1:
            out.append(current)
    return out


def commutator_ansatz_agp(h: np.ndarray, dh: np.ndarray,
                          alphas: AnsatzCoefficients | tuple[float, ...]) -> np.ndarray:
    """Truncated ansatz A = i sum_k alpha_k C_{2k-1}; Hermitian by construction."""
    coeffs = alphas.alphas if isinstance(alphas, AnsatzCoefficients) else tuple(alphas)
    if not coeffs:
        raise ValueError("need at least one coefficient")
    d = h.shape[0]
    out = np.zeros((d, d), dtype=complex)
    if all(c == 0 for c in coeffs):
        return out
    for alpha, c_op in zip(coeffs, nested_commutators(h, dh, len(coeffs))):
        out += 1j * alpha * c_op
    return out


def fit_ansatz_coefficients(h: np.ndarray, dh: np.ndarray, cutoff: int) -> AnsatzCoefficients:
    """Least-squares projection of the spectral AGP onto the commutator basis.

    Minimizes the Frobenius norm of (exact AGP - i sum_k alpha_k C_{2k-1})
    over real alpha, flattening complex matrix elements into their real and
    imaginary parts.  Reports the residual norm; a rank-deficient basis is
    solved in the minimum-norm sense and flagged.
    """
    target = exact_agp(h, dh).matrix
    basis = [1j * c for c in nested_commutators(h, dh, cutoff)]
    design = np.stack(
        [np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in basis], axis=1
    )
    rhs = np.concatenate([target.real.ravel(), target.imag.ravel()])
    solution, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=None)
    residual = float(np.linalg.norm(rhs - design @ solution))
    return AnsatzCoefficients(
        alphas=tuple(float(a) for a in solution),
        residual=residual,
        rank_deficient=rank < len(basis),
    )


def two_qubit_alpha1(p: TwoQubitParams, lam: float) -> float:
    """Closed-form first ansatz coefficient of the two-qubit model."""
    return -1.0 / (4.0 * (p.J**2 + 4.0 * (lam - 1.0) ** 2 * p.h_z**2))


def two_qubit_gap(p: TwoQubitParams, lam: float) -> float:
    """Energy gap of the single level pair coupled by the field derivative."""
    return 2.0 * np.sqrt(p.J**2 + 4.0 * (lam - 1.0) ** 2 * p.h_z**2)


def analytic_floquet_beta1(p: TwoQubitParams, lam: float, omega0: float,
                           exact_harmonics: bool = True) -> float:
    """Drive coefficient (in units of omega0) that makes the oscillating
    protocol emulate exact counterdiabatic driving for the two-qubit model.

    The infinite-frequency form is -omega0 / (2 (J^2 + 4 (lambda-1)^2 h_z^2))
    divided by omega0; with ``exact_harmonics`` the single coupled gap w_mn is
    matched exactly through -J0(w_mn/omega0) / (J1(w_mn/omega0) * w_mn).
    """
    if exact_harmonics:
        gap = two_qubit_gap(p, lam)
        z = gap / omega0
        return float(-j0(z) / (j1(z) * gap) / omega0)
    return float(-1.0 / (2.0 * (p.J**2 + 4.0 * (lam - 1.0) ** 2 * p.h_z**2)))


@dataclass(frozen=True)
class BetaAlphaCalibration:
    """Per-harmonic conversion constants c_k with alpha_k = c_k * beta_k / omega0.

    Beta values are table entries in units of omega0.  Only harmonics present
    in ``constants`` can be converted; others raise UnsupportedHarmonicError
    rather than guessing an uncalibrated proportionality.
    """

    constants: dict[int, float]
    omega0: float
    reference: str = ""


def two_qubit_calibration(p: TwoQubitParams, omega0: float,
                          lam_ref: float = 0.5) -> BetaAlphaCalibration:
    """Calibrate c_1 from the analytically known two-qubit pair.

    The fitted alpha_1 and the infinite-frequency drive coefficient share the
    same lambda dependence, so the ratio is lambda independent; the fit at
    lam_ref makes the construction self-validating.
    """
    model = two_qubit_model(p)
    fit = fit_ansatz_coefficients(model.hamiltonian(lam_ref), model.d_lambda_h(), 1)
    beta_ref = analytic_floquet_beta1(p, lam_ref, omega0, exact_harmonics=False)
    c1 = fit.alphas[0] * omega0 / beta_ref
    return BetaAlphaCalibration(
        constants={1: float(c1)},
        omega0=omega0,
        reference=f"two-qubit pair at lambda={lam_ref}, h_z={p.h_z}, J={p.J}",
    )


def calibration_with_pair(base: BetaAlphaCalibration, k: int, beta_value: float,
                          alpha_value: float) -> BetaAlphaCalibration:
    """Extend a calibration with an externally supplied (beta_k, alpha_k) pair."""
    if beta_value == 0:
        raise ValueError("cannot calibrate against a zero beta value")
    constants = dict(base.constants)
    constants[k] = alpha_value * base.omega0 / beta_value
    return BetaAlphaCalibration(constants, base.omega0,
                                base.reference + f"; harmonic {k} from supplied pair")


def betas_to_alphas(b: PiecewiseBeta, omega0: float, segment: int,
                    calibration: BetaAlphaCalibration) -> AnsatzCoefficients:
    """Convert segment j (1-based) of a drive table to ansatz coefficients."""
    if not 1 <= segment <= b.n_segments:
        raise IndexError(f"segment {segment} outside [1, {b.n_segments}]")
    alphas = []
    for k in range(1, b.n_harmonics + 1):
        beta = b.values[k - 1][segment - 1]
        if beta == 0.0:
            alphas.append(0.0)
            continue
        if k not in calibration.constants:
            raise UnsupportedHarmonicError(
                f"no calibrated conversion for harmonic k={k}; "
                "supply one via calibration_with_pair"
            )
        alphas.append(calibration.constants[k] * beta / omega0)
    return AnsatzCoefficients(
        alphas=tuple(alphas), calibration=dict(calibration.constants)
    )


def alphas_to_betas(alphas: AnsatzCoefficients | tuple[float, ...], omega0: float,
                    calibration: BetaAlphaCalibration) -> tuple[float, ...]:
    """Inverse of betas_to_alphas on a single segment."""
    coeffs = alphas.alphas if isinstance(alphas, AnsatzCoefficients) else tuple(alphas)
    betas = []
    for k, alpha in enumerate(coeffs, start=1):
        if alpha == 0.0:
            betas.append(0.0)
            continue
        if k not in calibration.constants:
            raise UnsupportedHarmonicError(
                f"no calibrated conversion for harmonic k={k}"
            )
        betas.append(alpha * omega0 / calibration.constants[k])
    return tuple(betas)

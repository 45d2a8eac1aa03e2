"""
src/core/security.py

Key-rate and entanglement metrics for the swapped Alice-Bob state:
homodyne mutual information, symplectic spectra, the Holevo bound on Eve
under reverse reconciliation, the secret key rate, and logarithmic negativity
of Schmidt-form states.

All information quantities are in bits.
"""

from typing import Literal, Tuple
import logging
import math

import numpy as np

from src.core.exceptions import DomainError, NumericalError, TruncationError
from src.core.fock_oracle import SchmidtState
from src.core.gaussian_core import SwappedCov
from src.schemas.data_models import SecurityReport

logger = logging.getLogger("cvmdi_qkd")

CLAMP_TOL = 1e-9
LOGNEG_TAIL_TOL = 1e-10
DENSE_MAX_DIM = 30

LogNegMethod = Literal["closed", "dense"]


def _clamp_to_one(x: float, what: str) -> float:
    if x >= 1.0:
        return x
    if x >= 1.0 - CLAMP_TOL:
        return 1.0
    raise NumericalError(f"{what} = {x!r} is below 1 by more than {CLAMP_TOL}")


def mutual_information(cov: SwappedCov) -> float:
    """I_AB = ½ log₂( x2 / (x2 - xp²/x1) ) for homodyne detection at both ends."""
    if cov.x1 <= 0.0:
        raise DomainError(f"x1 = {cov.x1} must be positive")
    conditional = cov.x2 - cov.xp ** 2 / cov.x1
    if conditional <= 0.0:
        raise DomainError(f"conditional variance x2 - xp^2/x1 = {conditional} is not positive")
    return 0.5 * math.log2(cov.x2 / conditional)


def holevo_g(x: float) -> float:
    """
    G(x) = ((x+1)/2) log₂((x+1)/2) - ((x-1)/2) log₂((x-1)/2), with G(1) = 0.

    Values within 1e-9 below 1 are clamped to 1; anything lower raises DomainError.
    """
    if not math.isfinite(x) or x < 1.0 - CLAMP_TOL:
        raise DomainError(f"G(x) needs x >= 1, got {x!r}")
    x = max(x, 1.0)
    plus = (x + 1.0) / 2.0
    minus = (x - 1.0) / 2.0
    value = plus * math.log2(plus)
    if minus > 0.0:
        value -= minus * math.log2(minus)
    return value


def symplectic_spectrum(cov: SwappedCov) -> Tuple[float, float]:
    """
    (v1, v2) with v1 ≥ v2, the roots of v⁴ - Δv² + det = 0 where
    Δ = x1² + x2² - 2xp² and det = (x1 x2 - xp²)².

    Evaluated as v1,2 = (√((x1+x2)² - 4xp²) ± |x1 - x2|) / 2, the factored form
    of √(Δ/2 ± √(Δ² - 4det)/2); it does not cancel near purity.
    """
    radicand = (cov.x1 + cov.x2) ** 2 - 4.0 * cov.xp ** 2
    if radicand < 0.0:
        if radicand < -CLAMP_TOL:
            raise NumericalError(f"negative radicand {radicand!r} in the symplectic spectrum")
        radicand = 0.0
    width = math.sqrt(radicand)
    gap = abs(cov.x1 - cov.x2)
    v1 = _clamp_to_one((width + gap) / 2.0, "v1")
    v2 = _clamp_to_one((width - gap) / 2.0, "v2")
    return v1, v2


def conditional_eigenvalue(cov: SwappedCov) -> float:
    """v̄ = √(x1² - x1 xp²/x2), Alice's mode conditioned on Bob's homodyne outcome."""
    if cov.x2 <= 0.0:
        raise DomainError(f"x2 = {cov.x2} must be positive")
    squared = cov.x1 * (cov.x1 * cov.x2 - cov.xp ** 2) / cov.x2
    if squared < 0.0:
        raise NumericalError(f"conditional eigenvalue squared {squared!r} is negative")
    return _clamp_to_one(math.sqrt(squared), "v_bar")


def holevo_bound(cov: SwappedCov) -> Tuple[float, float, float, float]:
    """(v1, v2, v_bar, χ_BE) with χ_BE = G(v1) + G(v2) - G(v̄)."""
    v1, v2 = symplectic_spectrum(cov)
    v_bar = conditional_eigenvalue(cov)
    chi_be = holevo_g(v1) + holevo_g(v2) - holevo_g(v_bar)
    return v1, v2, v_bar, chi_be


def secret_key_rate(success_prob: float, gamma: float, i_ab: float, chi_be: float) -> float:
    """SKR = 𝒫 (γ I_AB - χ_BE); negative values are returned unchanged."""
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"reconciliation efficiency gamma={gamma} must lie in (0, 1]")
    if not 0.0 < success_prob <= 1.0:
        raise DomainError(f"success probability {success_prob} must lie in (0, 1]")
    return success_prob * (gamma * i_ab - chi_be)


def security_report(cov: SwappedCov, success_prob: float, gamma: float) -> SecurityReport:
    i_ab = mutual_information(cov)
    v1, v2, v_bar, chi_be = holevo_bound(cov)
    return SecurityReport(
        i_ab=i_ab, v1=v1, v2=v2, v_bar=v_bar, chi_be=chi_be,
        skr=secret_key_rate(success_prob, gamma, i_ab, chi_be),
        success_prob=success_prob,
    )


def _first_power_tail_ok(magnitudes: np.ndarray, tol: float = LOGNEG_TAIL_TOL) -> bool:
    total = magnitudes.sum()
    return total == 0.0 or magnitudes[-2:].sum() <= tol * total


def dense_trace_norm(coeffs: np.ndarray) -> float:
    """
    ‖ρ^PT‖₁ of Σ c_n|nn⟩ from the explicitly built partial transpose.

    ρ^PT is real symmetric, so its singular values are the absolute eigenvalues.
    """
    dim = coeffs.size
    psi = np.diag(coeffs).reshape(-1)
    rho = np.outer(psi, psi).reshape(dim, dim, dim, dim)
    # Transpose the second subsystem: (i j, k l) -> (i l, k j).
    rho_pt = rho.transpose(0, 3, 2, 1).reshape(dim * dim, dim * dim)
    return float(np.abs(np.linalg.eigvalsh(rho_pt)).sum())


def _dense_support(coeffs: np.ndarray) -> np.ndarray:
    """Shortest prefix whose discarded first-power tail is below LOGNEG_TAIL_TOL."""
    magnitudes = np.abs(coeffs)
    total = magnitudes.sum()
    tail = total - np.cumsum(magnitudes)
    within = np.flatnonzero(tail <= LOGNEG_TAIL_TOL * total)
    size = int(within[0]) + 1
    if size > DENSE_MAX_DIM:
        raise TruncationError(
            f"dense partial transpose needs {size} levels per mode (limit {DENSE_MAX_DIM})",
            required_cutoff=size - 1)
    prefix = coeffs[:max(size, 2)]
    return prefix / np.linalg.norm(prefix)


def log_negativity(state: SchmidtState, method: LogNegMethod = "closed") -> float:
    """
    E_N = log₂ ‖ρ^PT‖₁ of a pure Schmidt-form state.

    `closed` uses E_N = 2 log₂ Σ|c_n| (the partial transpose has singular values
    |c_i c_j|). `dense` builds the partial transpose on the truncated space and
    sums its singular values; it keeps only the prefix that carries all but
    1e-10 of Σ|c_n| and is meant for cross-checking.

    Raises:
        TruncationError: if the first-power tail Σ|c_n| is not converged.
    """
    magnitudes = np.abs(state.coeffs)
    if not _first_power_tail_ok(magnitudes):
        raise TruncationError(
            f"Σ|c_n| not converged at cutoff {state.cutoff}",
            required_cutoff=2 * state.cutoff)
    if method == "closed":
        return 2.0 * math.log2(float(magnitudes.sum()))
    if method == "dense":
        return math.log2(dense_trace_norm(_dense_support(state.coeffs)))
    raise DomainError(f"unknown log-negativity method '{method}'")

# tests/test_security.py
"""
Unit tests for mutual information, symplectic spectra, the Holevo bound,
the secret key rate and logarithmic negativity.
"""

import math

import numpy as np
import pytest

from src.core.analytic_states import StateKind, coeffs, from_db
from src.core.exceptions import DomainError, NumericalError, TruncationError
from src.core.fock_oracle import SchmidtState, tmsv_state
from src.core.gaussian_core import SwappedCov
from src.core.security import (
    conditional_eigenvalue,
    holevo_bound,
    holevo_g,
    log_negativity,
    mutual_information,
    secret_key_rate,
    security_report,
    symplectic_spectrum,
)
from src.core.validation import squeeze_from_lambda

PURE_SWAP = SwappedCov(x1=17 / 15, x2=17 / 15, xp=8 / 15)

### Test G(x) ###


@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (3.0, 2.0), (1.5, 0.902410)])
def test_holevo_g_values(x, expected):
    assert holevo_g(x) == pytest.approx(expected, abs=1e-6)


def test_holevo_g_clamps_rounding_below_one():
    assert holevo_g(1.0 - 1e-10) == 0.0


@pytest.mark.parametrize("x", [0.5, 1.0 - 1e-6, float("nan")])
def test_holevo_g_rejects_below_one(x):
    with pytest.raises(DomainError):
        holevo_g(x)


def test_holevo_g_increasing():
    values = [holevo_g(x) for x in np.linspace(1.0, 10.0, 50)]
    assert all(b > a for a, b in zip(values, values[1:]))

### Test mutual information ###


def test_mutual_information_symmetric_example():
    """x1 = x2 = 2, xp = 1: I_AB = ½ log₂(4/3)."""
    cov = SwappedCov(x1=2.0, x2=2.0, xp=1.0)
    assert mutual_information(cov) == pytest.approx(0.5 * math.log2(4 / 3), abs=1e-12)
    assert mutual_information(cov) == pytest.approx(0.20752, abs=1e-5)


def test_mutual_information_pure_swap():
    """The lossless TMSV swap at V = 5/3 gives I_AB = log₂(17/15)."""
    assert mutual_information(PURE_SWAP) == pytest.approx(0.18057, abs=1e-5)


def test_mutual_information_product_state_is_zero():
    assert mutual_information(SwappedCov(x1=3.0, x2=2.0, xp=0.0)) == 0.0

### Test symplectic spectrum and Holevo bound ###


def _numeric_spectrum(cov: SwappedCov):
    omega = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    eigenvalues = np.sort(np.abs(np.linalg.eigvals(1j * omega @ cov.matrix)))
    return eigenvalues[3], eigenvalues[0]


@pytest.mark.parametrize("x1, x2, xp", [(2.0, 3.0, 1.0), (5.0, 1.5, 1.2), (1.2, 1.2, 0.6)])
def test_symplectic_spectrum_matches_numeric(x1, x2, xp):
    """The factored closed form equals the moduli of the eigenvalues of iΩV."""
    cov = SwappedCov(x1=x1, x2=x2, xp=xp)
    v1, v2 = symplectic_spectrum(cov)
    n1, n2 = _numeric_spectrum(cov)
    assert v1 == pytest.approx(n1, rel=1e-10)
    assert v2 == pytest.approx(n2, rel=1e-10)
    assert v1 * v2 == pytest.approx(x1 * x2 - xp ** 2, rel=1e-12)


def test_symmetric_holevo_example():
    """x1 = x2 = 2, xp = 1: v1 = v2 = v̄ = √3, so χ_BE = G(√3)."""
    v1, v2, v_bar, chi = holevo_bound(SwappedCov(x1=2.0, x2=2.0, xp=1.0))
    assert v1 == pytest.approx(math.sqrt(3))
    assert v2 == pytest.approx(math.sqrt(3))
    assert v_bar == pytest.approx(math.sqrt(3))
    assert chi == pytest.approx(holevo_g(math.sqrt(3)), abs=1e-12)
    assert chi == pytest.approx(1.1454, rel=1e-3)


def test_product_state_holevo():
    """xp = 0: spectrum (x1, x2), v̄ = x1, χ_BE = G(x2)."""
    v1, v2, v_bar, chi = holevo_bound(SwappedCov(x1=3.0, x2=2.0, xp=0.0))
    assert (v1, v2) == pytest.approx((3.0, 2.0))
    assert v_bar == pytest.approx(3.0)
    assert chi == pytest.approx(holevo_g(2.0))


def test_pure_swap_leaks_nothing():
    """A pure swapped state has unit spectrum and χ_BE = 0."""
    v1, v2, v_bar, chi = holevo_bound(PURE_SWAP)
    assert v1 == pytest.approx(1.0, abs=1e-12)
    assert v2 == pytest.approx(1.0, abs=1e-12)
    assert v_bar == pytest.approx(1.0, abs=1e-12)
    assert abs(chi) < 1e-9


def test_conditional_eigenvalue_formula():
    cov = SwappedCov(x1=2.0, x2=3.0, xp=1.0)
    assert conditional_eigenvalue(cov) == pytest.approx(math.sqrt(4 - 2 / 3))


def test_spectrum_below_vacuum_raises():
    """Bypassing construction checks, a sub-vacuum spectrum is reported as numerical error."""
    cov = SwappedCov.__new__(SwappedCov)
    object.__setattr__(cov, "x1", 1.0)
    object.__setattr__(cov, "x2", 1.0)
    object.__setattr__(cov, "xp", 0.3)
    with pytest.raises(NumericalError):
        symplectic_spectrum(cov)

### Test the key rate ###


def test_secret_key_rate_lossless_example():
    """P = 1, γ = 0.95, I_AB = 0.180572, χ = 0: SKR ≈ 0.171543."""
    assert secret_key_rate(1.0, 0.95, 0.180572, 0.0) == pytest.approx(0.171543, abs=1e-6)


def test_secret_key_rate_keeps_negative_values():
    assert secret_key_rate(0.5, 0.95, 0.1, 0.5) == pytest.approx(0.5 * (0.095 - 0.5))


@pytest.mark.parametrize("prob, gamma", [(1.0, 0.0), (1.0, 1.1), (0.0, 0.95), (1.2, 0.95)])
def test_secret_key_rate_domain(prob, gamma):
    with pytest.raises(DomainError):
        secret_key_rate(prob, gamma, 0.2, 0.1)


def test_security_report_scales_with_probability():
    cov = SwappedCov(x1=2.0, x2=2.0, xp=1.0)
    full = security_report(cov, 1.0, 0.95)
    half = security_report(cov, 0.5, 0.95)
    assert half.skr == pytest.approx(0.5 * full.skr)
    assert full.skr == pytest.approx(0.95 * full.i_ab - full.chi_be)

### Test logarithmic negativity ###


def test_tmsv_log_negativity_closed_form():
    """E_N(TMSV, λ = 0.5) = log₂((1+λ)/(1-λ)) = log₂ 3."""
    state = coeffs(StateKind.TMSV, squeeze_from_lambda(0.5))
    assert log_negativity(state) == pytest.approx(math.log2(3), abs=1e-10)


def test_tmsv_log_negativity_one_db():
    """At 1 dB, (1+λ)/(1-λ) = e^{2r} = 10^0.1, so E_N = 0.1 log₂ 10."""
    state = coeffs(StateKind.TMSV, from_db(1.0))
    assert log_negativity(state) == pytest.approx(0.332193, abs=1e-6)


def test_vacuum_log_negativity_is_zero():
    vacuum = coeffs(StateKind.TMSV, from_db(0.0))
    assert log_negativity(vacuum) == 0.0
    assert log_negativity(vacuum, method="dense") == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("kind, T", [
    (StateKind.TMSV, None),
    (StateKind.PAS1, 0.6),
    (StateKind.PAS2, 0.9),
    (StateKind.PR2, 0.3),
])
def test_dense_partial_transpose_agrees(kind, T):
    state = coeffs(kind, squeeze_from_lambda(0.3), T)
    assert log_negativity(state, method="dense") == pytest.approx(log_negativity(state), abs=1e-8)


def test_log_negativity_sign_invariant():
    """Only |c_n| matters."""
    state = coeffs(StateKind.PAS1, squeeze_from_lambda(0.2), 0.7)
    signs = (-1.0) ** np.arange(state.coeffs.size)
    flipped = SchmidtState(coeffs=state.coeffs * signs, success_prob=state.success_prob)
    assert log_negativity(flipped) == pytest.approx(log_negativity(state), abs=1e-14)


def test_log_negativity_detects_unconverged_tail():
    """A TMSV cut at 30 levels has converged moments but not a converged Σ|c_n|."""
    with pytest.raises(TruncationError):
        log_negativity(tmsv_state(0.5))


def test_dense_log_negativity_refuses_large_support():
    state = coeffs(StateKind.TMSV, squeeze_from_lambda(0.8))
    assert log_negativity(state) == pytest.approx(math.log2(9.0), abs=1e-10)
    with pytest.raises(TruncationError):
        log_negativity(state, method="dense")


def test_log_negativity_unknown_method():
    with pytest.raises(DomainError):
        log_negativity(coeffs(StateKind.TMSV, from_db(1.0)), method="svd")

# tests/test_analytic_states.py
"""
Unit tests for the closed-form Schmidt coefficients, squeezing conversion,
heralding probabilities and their agreement with the Fock-space oracle.
"""

import math

import numpy as np
import pytest

from src.core.analytic_states import (
    StateKind,
    coeffs,
    from_db,
    herald_specs,
    oracle_state,
    printed_probability,
    series_probability,
)
from src.core.exceptions import DomainError, TruncationError
from src.core.validation import squeeze_from_lambda

### Test squeezing conversion and kind parsing ###


def test_from_db_one_decibel():
    """1 dB squeezing is r = ln10/20 and λ = tanh r ≈ 0.114623."""
    sq = from_db(1.0)
    assert sq.r == pytest.approx(math.log(10) / 20, rel=1e-12)
    assert sq.lam == pytest.approx(0.114623, abs=1e-6)
    assert sq.variance == pytest.approx(math.cosh(2 * sq.r))


def test_from_db_zero_is_vacuum():
    sq = from_db(0.0)
    assert sq.r == 0.0 and sq.lam == 0.0 and sq.variance == 1.0


@pytest.mark.parametrize("r_db", [-0.5, float("inf"), float("nan")])
def test_from_db_rejects_invalid(r_db):
    with pytest.raises(DomainError):
        from_db(r_db)


@pytest.mark.parametrize("text, kind", [
    ("TMSV", StateKind.TMSV),
    ("1pas", StateKind.PAS1),
    ("2PAS", StateKind.PAS2),
    ("PAS2", StateKind.PAS2),
    (" 2pr ", StateKind.PR2),
])
def test_state_kind_parse(text, kind):
    """Printed labels and member names both parse."""
    assert StateKind.parse(text) is kind


def test_state_kind_parse_unknown():
    with pytest.raises(DomainError):
        StateKind.parse("3PAS")


def test_state_kind_labels():
    assert [k.label for k in StateKind] == ["TMSV", "1PAS", "2PAS", "2PR"]
    assert not StateKind.TMSV.heralded and StateKind.PR2.heralded

### Test coefficient series ###


def test_tmsv_coeffs_ignore_T():
    """T has no meaning for TMSV and the success probability is exactly 1."""
    sq = from_db(2.0)
    state = coeffs(StateKind.TMSV, sq)
    assert state.success_prob == 1.0
    assert np.allclose(coeffs(StateKind.TMSV, sq, 0.3).coeffs, state.coeffs)
    assert state.coeffs[1] / state.coeffs[0] == pytest.approx(sq.lam, rel=1e-12)


def test_pas1_coefficient_ratios():
    """1PAS: c_{n+1}/c_n = λT² (n+2)/(n+1)."""
    lam, T = 0.2, 0.7
    state = coeffs(StateKind.PAS1, squeeze_from_lambda(lam), T)
    ratio = state.coeffs[1:4] / state.coeffs[0:3]
    n = np.arange(3)
    assert np.allclose(ratio, lam * T ** 2 * (n + 2) / (n + 1), rtol=1e-12)


def test_pr2_zero_coefficient():
    """2PR vanishes where T² = n(1-T²); T² = 1/2 kills n = 1."""
    state = coeffs(StateKind.PR2, squeeze_from_lambda(0.3), math.sqrt(0.5))
    assert abs(state.coeffs[1]) < 1e-15
    assert np.all(state.coeffs >= 0.0)


@pytest.mark.parametrize("kind", [StateKind.PAS1, StateKind.PAS2, StateKind.PR2])
def test_heralded_kinds_require_T(kind):
    with pytest.raises(DomainError):
        coeffs(kind, from_db(1.0))
    with pytest.raises(DomainError):
        coeffs(kind, from_db(1.0), 1.0)


@pytest.mark.parametrize("kind", list(StateKind))
def test_coeffs_normalized_and_long_enough(kind):
    """Series hold at least cutoff + 1 entries and are normalized."""
    state = coeffs(kind, from_db(3.0), 0.8, cutoff=40)
    assert state.coeffs.size >= 41
    assert state.coeffs @ state.coeffs == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < state.success_prob <= 1.0

### Test heralding probabilities ###


@pytest.mark.parametrize("T", [0.3, 0.6, 0.9])
def test_vacuum_limits(T):
    """λ = 0: P₁ = (1-T²)², P₂ = (1-T²)⁴, P_2PR = T⁴."""
    vacuum = from_db(0.0)
    assert series_probability(StateKind.PAS1, vacuum, T) == pytest.approx((1 - T ** 2) ** 2, rel=1e-12)
    assert series_probability(StateKind.PAS2, vacuum, T) == pytest.approx((1 - T ** 2) ** 4, rel=1e-12)
    assert series_probability(StateKind.PR2, vacuum, T) == pytest.approx(T ** 4, rel=1e-12)


@pytest.mark.parametrize("lam", [0.05, 0.2, 0.33228])
@pytest.mark.parametrize("T", [0.3, 0.9])
def test_printed_p1_matches_series(lam, T):
    """The printed 1PAS probability agrees with the converged series."""
    sq = squeeze_from_lambda(lam)
    assert printed_probability(StateKind.PAS1, sq, T) == pytest.approx(
        series_probability(StateKind.PAS1, sq, T), rel=1e-10)


def test_printed_p2_differs_from_series():
    """The printed 2PAS probability is audited, never used: it disagrees with the series."""
    sq = squeeze_from_lambda(0.2)
    printed = printed_probability(StateKind.PAS2, sq, 0.9)
    series = series_probability(StateKind.PAS2, sq, 0.9)
    assert abs(printed - series) / series > 1e-6


def test_pas2_series_closed_form():
    """Σ (n+1)⁴ ζⁿ = (1 + 11ζ + 11ζ² + ζ³)/(1-ζ)⁵ with ζ = λ²T⁸."""
    lam, T = 0.2, 0.9
    z = lam ** 2 * T ** 8
    expected = (1 - lam ** 2) * (1 - T ** 2) ** 4 * (1 + 11 * z + 11 * z ** 2 + z ** 3) / (1 - z) ** 5
    assert series_probability(StateKind.PAS2, squeeze_from_lambda(lam), T) == pytest.approx(expected, rel=1e-12)


def test_tmsv_printed_probability_is_one():
    assert printed_probability(StateKind.TMSV, from_db(1.0), 0.5) == 1.0

### Test agreement with the Fock-space oracle ###


def test_herald_specs():
    assert herald_specs(StateKind.TMSV, 0.5) == []
    assert len(herald_specs(StateKind.PAS2, 0.5)) == 2
    (pr,) = herald_specs(StateKind.PR2, 0.5)
    assert (pr.m1, pr.n1, pr.m2, pr.n2) == (1, 1, 1, 1)


@pytest.mark.parametrize("kind", [StateKind.PAS1, StateKind.PAS2, StateKind.PR2])
@pytest.mark.parametrize("lam, T", [(0.114623, 0.6), (0.33228, 0.9), (0.05, 0.3)])
def test_analytic_matches_oracle(kind, lam, T):
    """Closed-form coefficients and probabilities reproduce the brute-force heralding."""
    sq = squeeze_from_lambda(lam)
    analytic = coeffs(kind, sq, T)
    brute = oracle_state(kind, sq, T)
    size = max(analytic.coeffs.size, brute.coeffs.size) - 1
    assert np.max(np.abs(analytic.padded(size) - brute.padded(size))) <= 1e-10
    assert analytic.success_prob == pytest.approx(brute.success_prob, rel=1e-10)


def test_intensity_convention_disagrees_with_series():
    """Reading T as power transmissivity does not reproduce the closed-form 1PAS state."""
    sq = squeeze_from_lambda(0.2)
    analytic = coeffs(StateKind.PAS1, sq, 0.6)
    brute = oracle_state(StateKind.PAS1, sq, 0.6, convention="intensity")
    assert analytic.success_prob != pytest.approx(brute.success_prob, rel=1e-3)


def test_oracle_state_honours_max_cutoff():
    """The brute-force path stops growing at max_cutoff instead of the module ceiling."""
    sq = squeeze_from_lambda(0.9)
    with pytest.raises(TruncationError):
        oracle_state(StateKind.PAS1, sq, 0.5, cutoff=30, max_cutoff=30)
    assert oracle_state(StateKind.PAS1, sq, 0.5, cutoff=30).cutoff > 30

"""
src/core/validation.py

The verify battery: analytic states against the Fock-space oracle, printed
closed-form probabilities against the converged series, log-negativity
against the dense partial transpose, and the zero-loss purity chain.

Every row is a ValidationCheck; only gating rows decide the exit status.
"""

from typing import Callable, Dict, List, Optional
import logging
import math

import numpy as np

from src.core.analytic_states import (
    StateKind,
    SqueezeParam,
    coeffs,
    from_db,
    oracle_state,
    printed_probability,
)
from src.core.exceptions import SimulationError
from src.core.experiments import skr_point
from src.core.fock_oracle import MAX_CUTOFF, Convention, block_unitarity_error, mixing_angle
from src.core.gaussian_core import (
    apply_channel,
    channel_params,
    covariance_from_state,
    prepared_cov,
    quadrature_moments_dense,
    swap,
)
from src.core.security import log_negativity
from src.schemas.data_models import ValidationCheck, ValidationReport

logger = logging.getLogger("cvmdi_qkd")

ORACLE_LAMBDAS = (0.05, 0.114623, 0.2, 0.33228)
ORACLE_TS = (0.3, 0.6, 0.9)
LIMIT_TS = (0.3, 0.6, 0.9)
PURITY_R_DB = (1.0, 2.0, 3.0)
HERALDED = (StateKind.PAS1, StateKind.PAS2, StateKind.PR2)

COEFF_TOL = 1e-10
PROB_TOL = 1e-10
LOGNEG_TOL = 1e-8
TMSV_LOGNEG_TOL = 1e-10
PURITY_TOL = 1e-9
LIMIT_TOL = 1e-12
UNITARITY_TOL = 1e-12
MOMENT_TOL = 1e-10


def squeeze_from_lambda(lam: float) -> SqueezeParam:
    r = math.atanh(lam)
    return SqueezeParam(r=r, r_db=20.0 * r / math.log(10.0), lam=lam)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _check(name: str, group: str, compute: Callable[[], float], tolerance: float, *,
           kind: Optional[StateKind] = None, params: Optional[Dict[str, float]] = None,
           note: Optional[str] = None) -> ValidationCheck:
    """Gating row: PASS when compute() ≤ tolerance, FAIL otherwise, ERROR if it raises."""
    row = dict(name=name, group=group, kind=kind.value if kind else None,
               params=params or {}, tolerance=tolerance, note=note)
    try:
        value = float(compute())
    except SimulationError as e:
        logger.warning(f"Validation check '{name}' raised: {e}")
        return ValidationCheck(**{**row, "note": f"{type(e).__name__}: {e}"}, status="ERROR")
    status = "PASS" if value <= tolerance else "FAIL"
    return ValidationCheck(**row, value=value, status=status)


def _audit(name: str, kind: StateKind, params: Dict[str, float], printed: float,
           series: float, expected_match: bool, note: str) -> ValidationCheck:
    """Printed-formula row. Only a formula expected to match gates the run."""
    error = _rel(printed, series)
    matches = error <= PROB_TOL
    if matches:
        status = "MATCH"
    elif expected_match:
        status = "FAIL"
    else:
        status = "MISMATCH (expected)"
    return ValidationCheck(name=name, group="printed", kind=kind.value, params=params,
                           value=error, tolerance=PROB_TOL, status=status,
                           gating=expected_match, note=note)


def oracle_checks(convention: Convention = "amplitude", cutoff: Optional[int] = None,
                  max_cutoff: int = MAX_CUTOFF) -> List[ValidationCheck]:
    checks = []
    for kind in HERALDED:
        for lam in ORACLE_LAMBDAS:
            for T in ORACLE_TS:
                sq = squeeze_from_lambda(lam)
                params = {"lambda": lam, "T": T}
                try:
                    analytic = coeffs(kind, sq, T, cutoff)
                    brute = oracle_state(kind, sq, T, cutoff, convention, max_cutoff)
                except SimulationError as e:
                    checks.append(ValidationCheck(
                        name=f"{kind.label} oracle", group="oracle", kind=kind.value,
                        params=params, status="ERROR", note=f"{type(e).__name__}: {e}"))
                    continue
                size = max(analytic.coeffs.size, brute.coeffs.size) - 1
                checks.append(_check(
                    f"{kind.label} coefficients vs oracle", "oracle",
                    lambda: np.max(np.abs(analytic.padded(size) - brute.padded(size))),
                    COEFF_TOL, kind=kind, params=params))
                checks.append(_check(
                    f"{kind.label} success probability vs oracle", "probability",
                    lambda: _rel(analytic.success_prob, brute.success_prob),
                    PROB_TOL, kind=kind, params=params))
    return checks


def printed_formula_checks() -> List[ValidationCheck]:
    checks = []
    for lam in ORACLE_LAMBDAS:
        for T in ORACLE_TS:
            sq = squeeze_from_lambda(lam)
            params = {"lambda": lam, "T": T}
            p1 = coeffs(StateKind.PAS1, sq, T).success_prob
            p2 = coeffs(StateKind.PAS2, sq, T).success_prob
            p_pr = coeffs(StateKind.PR2, sq, T).success_prob
            checks.append(_audit(
                "P1 printed vs series", StateKind.PAS1, params,
                printed_probability(StateKind.PAS1, sq, T), p1, True,
                "zeta1 = lambda^2 T^4"))
            printed_p2 = printed_probability(StateKind.PAS2, sq, T)
            checks.append(_audit(
                "P2 printed vs series (joint)", StateKind.PAS2, params, printed_p2, p2, False,
                "series numerator is 1 + 11 zeta + 11 zeta^2 + zeta^3"))
            checks.append(_audit(
                "P2 printed vs series (second round only)", StateKind.PAS2, params,
                printed_p2, p2 / p1, False,
                "probability of the second round given the first succeeded"))
            checks.append(_audit(
                "P_2PR printed vs series", StateKind.PR2, params,
                printed_probability(StateKind.PR2, sq, T), p_pr, False,
                "printed expression is not the series norm"))
    return checks


def vacuum_limit_checks() -> List[ValidationCheck]:
    """λ = 0 rows: P₁ = (1-T²)², P₂ = (1-T²)⁴, P_2PR = T⁴ from the series."""
    vacuum = from_db(0.0)
    checks = []
    for T in LIMIT_TS:
        expected = {
            StateKind.PAS1: (1 - T ** 2) ** 2,
            StateKind.PAS2: (1 - T ** 2) ** 4,
            StateKind.PR2: T ** 4,
        }
        for kind, value in expected.items():
            checks.append(_check(
                f"{kind.label} vacuum-limit probability", "limit",
                lambda kind=kind, value=value: _rel(coeffs(kind, vacuum, T).success_prob, value),
                LIMIT_TOL, kind=kind, params={"lambda": 0.0, "T": T}))
        printed = printed_probability(StateKind.PR2, vacuum, T)
        checks.append(ValidationCheck(
            name="P_2PR printed vacuum limit", group="limit", kind=StateKind.PR2.value,
            params={"lambda": 0.0, "T": T}, value=printed / T ** 4, status=(
                "MATCH" if abs(printed - T ** 4) <= LIMIT_TOL else "MISMATCH (expected)"),
            gating=False, note="ratio printed / T^4; the series gives exactly 1"))
    return checks


def logneg_checks() -> List[ValidationCheck]:
    checks = []
    for lam in ORACLE_LAMBDAS:
        sq = squeeze_from_lambda(lam)
        tmsv = coeffs(StateKind.TMSV, sq)
        checks.append(_check(
            "TMSV log-negativity closed form", "logneg",
            lambda: abs(log_negativity(tmsv) - math.log2((1 + lam) / (1 - lam))),
            TMSV_LOGNEG_TOL, kind=StateKind.TMSV, params={"lambda": lam}))
        checks.append(_check(
            "TMSV log-negativity vs dense partial transpose", "logneg",
            lambda: abs(log_negativity(tmsv) - log_negativity(tmsv, method="dense")),
            LOGNEG_TOL, kind=StateKind.TMSV, params={"lambda": lam}))
        for kind in HERALDED:
            for T in ORACLE_TS:
                state = coeffs(kind, sq, T)
                checks.append(_check(
                    f"{kind.label} log-negativity vs dense partial transpose", "logneg",
                    lambda: abs(log_negativity(state) - log_negativity(state, method="dense")),
                    LOGNEG_TOL, kind=kind, params={"lambda": lam, "T": T}))
    return checks


def purity_checks(gamma: float = 0.95) -> List[ValidationCheck]:
    """Zero loss, zero noise, V_A = V_B: the TMSV chain stays pure and leaks nothing."""
    checks = []
    for r_db in PURITY_R_DB:
        params = {"r_dB": r_db}
        sq = from_db(r_db)
        tmsv = coeffs(StateKind.TMSV, sq)

        def purity_error() -> float:
            prep = prepared_cov(tmsv, sq.variance)
            cov = swap(apply_channel(prep, channel_params(0.0, 0.0)))
            return abs(cov.x1 * cov.x2 - cov.xp ** 2 - 1.0)

        checks.append(_check("TMSV swapped purity", "purity", purity_error,
                             PURITY_TOL, kind=StateKind.TMSV, params=params))
        report = skr_point(StateKind.TMSV, r_db, None, 0.0, 0.0, gamma)
        checks.append(_check(
            "TMSV Holevo bound at zero loss", "purity",
            lambda: max(report.chi_be, 0.0), PURITY_TOL, kind=StateKind.TMSV, params=params))
        checks.append(_check(
            "TMSV key rate equals gamma * I_AB", "purity",
            lambda: abs(report.skr - gamma * report.i_ab), PURITY_TOL,
            kind=StateKind.TMSV, params=params))
    return checks


def moment_checks() -> List[ValidationCheck]:
    sq = squeeze_from_lambda(0.114623)
    state = coeffs(StateKind.PAS1, sq, 0.8)

    def moment_error() -> float:
        a, c = covariance_from_state(state)
        variance, cross = quadrature_moments_dense(state)
        return max(abs(a - variance), abs(c - cross))

    return [_check("1PAS moments vs dense quadratures", "moments", moment_error,
                   MOMENT_TOL, kind=StateKind.PAS1, params={"lambda": 0.114623, "T": 0.8})]


def unitarity_checks(convention: Convention = "amplitude") -> List[ValidationCheck]:
    checks = []
    for T in (0.3, 0.9):
        theta = mixing_angle(T, convention)
        for total in (1, 10, 40):
            checks.append(_check(
                "beam-splitter block unitarity", "oracle",
                lambda theta=theta, total=total: block_unitarity_error(theta, total),
                UNITARITY_TOL, params={"T": T, "photons": float(total)}))
    return checks


def run_validation(convention: Convention = "amplitude", cutoff: Optional[int] = None,
                   gamma: float = 0.95, max_cutoff: int = MAX_CUTOFF) -> ValidationReport:
    """Run the whole battery. Never raises for a failing check; inspect `report.passed`."""
    report = ValidationReport(convention=convention)
    sections = {
        "unitarity": lambda: unitarity_checks(convention),
        "oracle": lambda: oracle_checks(convention, cutoff, max_cutoff),
        "printed": printed_formula_checks,
        "limit": vacuum_limit_checks,
        "logneg": logneg_checks,
        "moments": moment_checks,
        "purity": lambda: purity_checks(gamma),
    }
    for group, section in sections.items():
        try:
            report.checks.extend(section())
        except SimulationError as e:
            logger.error(f"Validation section '{group}' aborted: {e}", exc_info=True)
            report.checks.append(ValidationCheck(
                name=f"{group} section", group=group, status="ERROR",
                note=f"{type(e).__name__}: {e}"))
    logger.info(f"Validation finished: {report.summary()}", extra={'passed': report.passed})
    return report

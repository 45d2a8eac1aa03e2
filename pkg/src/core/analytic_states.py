"""
src/core/analytic_states.py

Closed-form Schmidt coefficients of the TMSV, 1PAS, 2PAS and 2PR states,
their heralding success probabilities, and squeezing-unit conversion.

Success probabilities always come from the converged coefficient series.
The printed closed forms are kept only so the validation battery can audit them.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional
import logging
import math

import numpy as np

from src.core.exceptions import DomainError, TruncationError
from src.core.fock_oracle import (
    DEFAULT_CUTOFF,
    MAX_CUTOFF,
    MIN_CUTOFF,
    Convention,
    HeraldSpec,
    SchmidtState,
    apply_heralds,
    tmsv_state,
)

logger = logging.getLogger("cvmdi_qkd")

SERIES_REL_TOL = 1e-16
SERIES_QUIET_TERMS = 10
SERIES_MAX_TERMS = 100_000


class StateKind(str, Enum):
    """Resource state Alice sends: the Gaussian baseline or one of the heralded states."""
    TMSV = "TMSV"
    PAS1 = "PAS1"
    PAS2 = "PAS2"
    PR2 = "PR2"

    @property
    def heralded(self) -> bool:
        return self is not StateKind.TMSV

    @property
    def label(self) -> str:
        return {"TMSV": "TMSV", "PAS1": "1PAS", "PAS2": "2PAS", "PR2": "2PR"}[self.value]

    @classmethod
    def parse(cls, value: "str | StateKind") -> "StateKind":
        """Accept enum values, member names and the printed labels (1PAS, 2PAS, 2PR)."""
        if isinstance(value, StateKind):
            return value
        text = str(value).strip().upper()
        aliases = {"1PAS": "PAS1", "2PAS": "PAS2", "2PR": "PR2"}
        try:
            return cls(aliases.get(text, text))
        except ValueError:
            raise DomainError(f"unknown state kind '{value}'") from None


@dataclass(frozen=True)
class SqueezeParam:
    """Squeezing r, its decibel value, and λ = tanh r."""
    r: float
    r_db: float
    lam: float

    def __post_init__(self):
        if abs(self.r_db - 20.0 * self.r / math.log(10.0)) > 1e-12 * max(1.0, self.r_db):
            raise DomainError(f"r={self.r} and r_dB={self.r_db} are inconsistent")
        if abs(self.lam - math.tanh(self.r)) > 1e-12:
            raise DomainError(f"lambda={self.lam} is not tanh(r={self.r})")

    @property
    def variance(self) -> float:
        """Quadrature variance cosh 2r of the TMSV prepared at this squeezing (SNU)."""
        return math.cosh(2.0 * self.r)


def from_db(r_db: float) -> SqueezeParam:
    """Squeezing parameters from r_dB = 10 log10(e^{2r})."""
    if not np.isfinite(r_db) or r_db < 0.0:
        raise DomainError(f"squeezing must be a nonnegative number of dB, got {r_db}")
    r = r_db * math.log(10.0) / 20.0
    return SqueezeParam(r=r, r_db=float(r_db), lam=math.tanh(r))


def _check_T(kind: StateKind, T: Optional[float]) -> float:
    if not kind.heralded:
        return 1.0 if T is None else float(T)
    if T is None or not 0.0 < T < 1.0:
        raise DomainError(f"{kind.label} needs a transmissivity T in (0, 1), got {T}")
    return float(T)


def _unnormalized(kind: StateKind, lam: float, T: float, n: np.ndarray) -> np.ndarray:
    """Printed coefficient series before normalization, evaluated at photon numbers n."""
    base = math.sqrt(1.0 - lam ** 2) * lam ** n
    if kind is StateKind.TMSV:
        return base
    T2 = T * T
    if kind is StateKind.PAS1:
        return base * T ** (2 * n) * (1.0 - T2) * (n + 1)
    if kind is StateKind.PAS2:
        return base * T ** (4 * n) * (1.0 - T2) ** 2 * (n + 1) ** 2
    # T^{2n-2} at n = 0 is T^{-2}; the squared bracket supplies T^4.
    return base * T ** (2 * n - 2) * (T2 - n * (1.0 - T2)) ** 2


def _series_length(kind: StateKind, lam: float, T: float, start: int) -> int:
    """
    Number of terms after which ten consecutive terms each add less than 1e-16
    of the running sum. Terms are taken to the first power, which also converges
    Σ c_n² and leaves Σ|c_n| (log-negativity) converged.
    """
    length = max(start + 1, 64)
    while length <= SERIES_MAX_TERMS:
        terms = np.abs(_unnormalized(kind, lam, T, np.arange(length)))
        running = np.cumsum(terms)
        quiet = terms < SERIES_REL_TOL * np.maximum(running, np.finfo(float).tiny)
        # First index where SERIES_QUIET_TERMS consecutive quiet terms end.
        window = np.convolve(quiet.astype(int), np.ones(SERIES_QUIET_TERMS, dtype=int), "valid")
        hits = np.flatnonzero(window == SERIES_QUIET_TERMS)
        if hits.size and running[-1] > 0.0:
            return max(start + 1, int(hits[0]) + SERIES_QUIET_TERMS)
        length *= 2
    raise TruncationError(
        f"{kind.label} series did not converge within {SERIES_MAX_TERMS} terms "
        f"(lambda={lam}, T={T})")


def coeffs(kind: "StateKind | str", sq: SqueezeParam, T: Optional[float] = None,
           cutoff: Optional[int] = None) -> SchmidtState:
    """
    Normalized Schmidt coefficients of `kind` with success_prob = Σ (unnormalized c_n)².

    The vector holds at least cutoff + 1 entries and grows until the series has
    converged. T is ignored for TMSV.
    """
    kind = StateKind.parse(kind)
    T = _check_T(kind, T)
    lam = sq.lam
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"squeezing amplitude lambda={lam} must lie in [0, 1)")
    cutoff = DEFAULT_CUTOFF if cutoff is None else int(cutoff)
    if cutoff < MIN_CUTOFF:
        raise DomainError(f"cutoff must be at least {MIN_CUTOFF}, got {cutoff}")

    length = _series_length(kind, lam, T, cutoff)
    raw = _unnormalized(kind, lam, T, np.arange(length))
    prob = float(raw @ raw)
    if kind is StateKind.TMSV:
        prob = 1.0
    return SchmidtState(coeffs=raw / np.linalg.norm(raw), success_prob=min(prob, 1.0))


def printed_probability(kind: "StateKind | str", sq: SqueezeParam, T: float) -> float:
    """
    Success probability from the printed closed forms (P₁ with ζ₁ = λ²T⁴,
    P₂ with ζ₂ = λ²T⁸, and the printed 2PR expression term by term).
    Used for auditing only.
    """
    kind = StateKind.parse(kind)
    T = _check_T(kind, T)
    lam = sq.lam
    lam2 = lam * lam
    if kind is StateKind.TMSV:
        return 1.0
    if kind is StateKind.PAS1:
        z = lam2 * T ** 4
        return (1 - lam2) * (1 - T ** 2) ** 2 * (z + 1) / (1 - z) ** 3
    if kind is StateKind.PAS2:
        z = lam2 * T ** 8
        numerator = -16 * z ** 4 - z ** 3 - 11 * z ** 2 + 5 * z - 1
        denominator = z ** 5 - 5 * z ** 4 + 10 * z ** 3 - 10 * z ** 2 + 5 * z - 1
        return (1 - lam2) * (1 - T ** 2) ** 4 * numerator / denominator
    # Transcribed as printed, including the repeated T^4 and the eighth power.
    t2 = T * T
    bracket = (
        lam ** 6 * T ** 8 * (T ** 8 - 8 * T ** 6 + 24 * T ** 4 - 32 * t2 + 11)
        + T ** 4 * lam ** 4 * (11 * T ** 8 - 56 * T ** 6 + 96 * T ** 4 - 56 * t2 + 11)
        + T ** 4
        + lam2 * (11 * T ** 8 - 32 * T ** 6 + 24 * T ** 4 - 8 * t2 + 1) ** 8
        + T ** 4
        + lam * T ** 12
    )
    return (1 - lam2) / (1 - lam2 * T ** 4) ** 5 * bracket


def series_probability(kind: "StateKind | str", sq: SqueezeParam, T: Optional[float] = None) -> float:
    """Joint heralding probability from the converged coefficient series."""
    return coeffs(kind, sq, T).success_prob


def herald_specs(kind: "StateKind | str", T: float) -> List[HeraldSpec]:
    """Heralding stages that turn a TMSV into `kind` (empty for TMSV)."""
    kind = StateKind.parse(kind)
    if kind is StateKind.TMSV:
        return []
    if kind is StateKind.PAS1:
        return [HeraldSpec.add_then_subtract(T)]
    if kind is StateKind.PAS2:
        return [HeraldSpec.add_then_subtract(T), HeraldSpec.add_then_subtract(T)]
    return [HeraldSpec.replace_twice(T)]


def oracle_state(kind: "StateKind | str", sq: SqueezeParam, T: Optional[float] = None,
                 cutoff: Optional[int] = None,
                 convention: Convention = "amplitude",
                 max_cutoff: int = MAX_CUTOFF) -> SchmidtState:
    """
    The same state built by brute force: a TMSV pushed through the Fock-space heralds.

    The input TMSV may grow its cutoff up to `max_cutoff` before a TruncationError.
    """
    kind = StateKind.parse(kind)
    T = _check_T(kind, T)
    state = tmsv_state(sq.lam, cutoff, max_cutoff=max_cutoff)
    return apply_heralds(state, herald_specs(kind, T), convention)

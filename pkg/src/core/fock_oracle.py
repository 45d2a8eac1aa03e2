"""
src/core/fock_oracle.py

Brute-force truncated Fock-space engine: two-mode squeezed vacuum states and the
two-beam-splitter photon injection / detection operation acting on them.

Everything here is computed from the beam-splitter unitary itself rather than
from closed-form coefficient series, so it serves as the reference against
which the analytic states are checked.

Beam-splitter blocks conserve total photon number, so each block
{|k, N-k⟩ : k = 0..N} is exponentiated on its own and is exact up to
floating point; no guard band is needed inside a block.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Literal, Optional
import logging

import numpy as np
from scipy.linalg import expm

from src.core.exceptions import (
    DomainError,
    HeraldShapeError,
    TruncationError,
    ZeroProbabilityError,
)

logger = logging.getLogger("cvmdi_qkd")

Convention = Literal["amplitude", "intensity"]

MIN_CUTOFF = 8
DEFAULT_CUTOFF = 30
MAX_CUTOFF = 200
ADEQUACY_TOL = 1e-12
NORM_TOL = 1e-12
SCHMIDT_TOL = 1e-12
ZERO_NORM = 1e-300


@dataclass(frozen=True)
class SchmidtState:
    """
    Two-mode pure state Σ c_n |nn⟩ truncated at photon number `cutoff`.

    `success_prob` is the probability of the whole heralding sequence that
    produced the state from an un-heralded input (1 for TMSV).
    """
    coeffs: np.ndarray
    success_prob: float = 1.0
    normalized: bool = True

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise DomainError("Schmidt coefficients must form a non-empty vector")
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("Schmidt coefficients must be finite")
        if not 0.0 <= self.success_prob <= 1.0 + 1e-12:
            raise DomainError(f"success_prob {self.success_prob} outside [0, 1]")
        if self.normalized and abs(float(coeffs @ coeffs) - 1.0) > NORM_TOL:
            raise DomainError(
                f"state flagged normalized but Σc² = {float(coeffs @ coeffs)!r}")

    @property
    def cutoff(self) -> int:
        return self.coeffs.size - 1

    def padded(self, cutoff: int) -> np.ndarray:
        """Coefficients zero-padded (or cut) to length cutoff + 1."""
        out = np.zeros(cutoff + 1)
        n = min(cutoff + 1, self.coeffs.size)
        out[:n] = self.coeffs[:n]
        return out


@dataclass(frozen=True)
class HeraldSpec:
    """Photon numbers injected (m1, m2) and detected (n1, n2) at the two beam splitters."""
    m1: int
    n1: int
    m2: int
    n2: int
    T: float

    def __post_init__(self):
        for name in ("m1", "n1", "m2", "n2"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise DomainError(f"{name} must be a nonnegative photon count, got {value!r}")
        if not 0.0 < self.T < 1.0:
            raise DomainError(f"beam-splitter transmissivity T={self.T} must lie in (0, 1)")

    @classmethod
    def add_then_subtract(cls, T: float) -> "HeraldSpec":
        """Inject one photon at the first splitter, detect one at the second."""
        return cls(m1=1, n1=0, m2=0, n2=1, T=T)

    @classmethod
    def replace_twice(cls, T: float) -> "HeraldSpec":
        """Inject and detect one photon at both splitters."""
        return cls(m1=1, n1=1, m2=1, n2=1, T=T)

    @property
    def photon_shift(self) -> int:
        return self.m1 + self.m2 - self.n1 - self.n2


def _check_lambda(lam: float) -> None:
    if not (0.0 <= lam < 1.0) or not np.isfinite(lam):
        raise DomainError(f"squeezing amplitude lambda={lam} must lie in [0, 1)")


def truncation_adequate(coeffs: np.ndarray, tol: float = ADEQUACY_TOL) -> bool:
    """
    True when the last two indices carry at most `tol` of Σ (2n+1) c_n²,
    i.e. second moments are converged at this cutoff.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    weights = (2 * np.arange(coeffs.size) + 1) * coeffs ** 2
    total = weights.sum()
    if total == 0.0:
        return True
    return weights[-2:].sum() <= tol * total


def grow_cutoff(build: Callable[[int], np.ndarray], cutoff: int,
                max_cutoff: int = MAX_CUTOFF, what: str = "state") -> np.ndarray:
    """
    Evaluate `build(cutoff)` and double the cutoff until the adequacy rule holds.

    Raises:
        TruncationError: when `max_cutoff` is reached without convergence.
    """
    while True:
        coeffs = build(cutoff)
        if truncation_adequate(coeffs):
            return coeffs
        if cutoff >= max_cutoff:
            raise TruncationError(
                f"{what} not converged at cutoff {cutoff} (maximum {max_cutoff})",
                required_cutoff=required_cutoff(build, max_cutoff * 4))
        logger.debug(f"Growing Fock cutoff for {what}: {cutoff} -> {min(2 * cutoff, max_cutoff)}")
        cutoff = min(2 * cutoff, max_cutoff)


def required_cutoff(build: Callable[[int], np.ndarray], limit: int) -> Optional[int]:
    """Smallest cutoff at which `build` passes the adequacy rule, searched up to `limit`."""
    coeffs = build(limit)
    for cutoff in range(MIN_CUTOFF, limit + 1):
        if truncation_adequate(coeffs[:cutoff + 1]):
            return cutoff
    return None


def _tmsv_coeffs(lam: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    return np.sqrt(1.0 - lam ** 2) * lam ** n


def tmsv_state(lam: float, cutoff: Optional[int] = None, *,
               auto_grow: bool = True, max_cutoff: int = MAX_CUTOFF) -> SchmidtState:
    """
    Two-mode squeezed vacuum Σ √(1-λ²) λⁿ |nn⟩.

    With `auto_grow` (default) the cutoff starts at `cutoff` (30 when omitted)
    and doubles until the truncation rule holds. With `auto_grow=False` an
    inadequate cutoff raises TruncationError naming the cutoff required.
    """
    _check_lambda(lam)
    cutoff = DEFAULT_CUTOFF if cutoff is None else int(cutoff)
    if cutoff < MIN_CUTOFF:
        raise DomainError(f"cutoff must be at least {MIN_CUTOFF}, got {cutoff}")

    def build(n_max: int) -> np.ndarray:
        return _tmsv_coeffs(lam, n_max)

    if auto_grow:
        coeffs = grow_cutoff(build, cutoff, max(max_cutoff, cutoff), what=f"TMSV(lambda={lam})")
    else:
        coeffs = build(cutoff)
        if not truncation_adequate(coeffs):
            raise TruncationError(
                f"cutoff {cutoff} too small for TMSV(lambda={lam})",
                required_cutoff=required_cutoff(build, max(4 * max_cutoff, cutoff)))
    # Renormalize the truncated vector so Σc² = 1 holds to rounding.
    return SchmidtState(coeffs=coeffs / np.linalg.norm(coeffs), success_prob=1.0)


def mixing_angle(T: float, convention: Convention = "amplitude") -> float:
    """
    Beam-splitter angle θ of Û(T) = exp[θ(a†c - ac†)].

    `amplitude` reads T as the amplitude transmissivity (θ = arccos T), which is
    the reading under which the closed-form PAS/PR series hold; `intensity`
    reads T as the power transmissivity (θ = arccos √T).
    """
    if not 0.0 < T < 1.0:
        raise DomainError(f"beam-splitter transmissivity T={T} must lie in (0, 1)")
    if convention == "amplitude":
        return float(np.arccos(T))
    if convention == "intensity":
        return float(np.arccos(np.sqrt(T)))
    raise DomainError(f"unknown transmissivity convention '{convention}'")


@lru_cache(maxsize=4096)
def bs_block(theta: float, total: int) -> np.ndarray:
    """
    Beam-splitter unitary on the fixed-photon-number block {|k, N-k⟩}, k = 0..N,
    where k counts photons in the signal mode. Returned read-only (cached).
    """
    k = np.arange(total)
    # a†c raises k by one; -ac† lowers it.
    raise_amp = np.sqrt((k + 1) * (total - k))
    generator = np.diag(raise_amp, -1) - np.diag(raise_amp, 1)
    unitary = expm(theta * generator)
    unitary.setflags(write=False)
    return unitary


def block_unitarity_error(theta: float, total: int) -> float:
    """max |U Uᵀ - I| over one photon-number block."""
    unitary = bs_block(theta, total)
    return float(np.max(np.abs(unitary @ unitary.T - np.eye(total + 1))))


def bs_kraus(T: float, m: int, n: int, cutoff: int,
             convention: Convention = "amplitude") -> np.ndarray:
    """
    Heralded single-mode Kraus operator K[j', j] = ⟨j', n| Û(T) |j, m⟩.

    The ancilla enters in |m⟩ and is projected on |n⟩; K vanishes unless
    j' + n = j + m. Rows beyond `cutoff` are dropped.
    """
    if int(m) != m or int(n) != n or m < 0 or n < 0:
        raise DomainError(f"photon counts must be nonnegative integers, got m={m}, n={n}")
    theta = mixing_angle(T, convention)
    kraus = np.zeros((cutoff + 1, cutoff + 1))
    for j in range(cutoff + 1):
        total = j + m
        j_out = total - n
        if 0 <= j_out <= cutoff:
            kraus[j_out, j] = bs_block(theta, total)[j_out, j]
    return kraus


def apply_herald(state: SchmidtState, spec: HeraldSpec,
                 convention: Convention = "amplitude") -> SchmidtState:
    """
    Apply K₂ · K₁ to the second mode of Σ c_n|nn⟩ and renormalize.

    The returned success_prob multiplies this stage's heralding probability
    into the input's, so chaining yields the joint probability.

    Raises:
        ZeroProbabilityError: if the heralded branch has vanishing norm.
        HeraldShapeError: if the output is not of the form Σ c'_n|nn⟩.
    """
    size = state.coeffs.size
    # Headroom for photons injected before they are detected again.
    work_cutoff = size - 1 + spec.m1 + spec.m2 + 2
    first = bs_kraus(spec.T, spec.m1, spec.n1, work_cutoff, convention)
    second = bs_kraus(spec.T, spec.m2, spec.n2, work_cutoff, convention)
    kraus = second @ first

    # amplitudes[j', n]: amplitude of |n⟩_a |j'⟩_b after heralding.
    amplitudes = kraus[:, :size] * state.coeffs[np.newaxis, :]
    norm_sq = float(np.sum(amplitudes ** 2))
    if norm_sq < ZERO_NORM:
        raise ZeroProbabilityError(
            f"heralding {spec} has zero success probability on this input")

    diagonal = np.diagonal(amplitudes).copy()
    off_schmidt = amplitudes.copy()
    off_schmidt[np.diag_indices(min(off_schmidt.shape))] = 0.0
    residual = float(np.linalg.norm(off_schmidt)) / np.sqrt(norm_sq)
    if residual > SCHMIDT_TOL:
        raise HeraldShapeError(
            f"heralded output leaves Schmidt form (residual {residual:.3e}); "
            f"photon shift {spec.photon_shift} of {spec} is not supported")

    prob = float(diagonal @ diagonal)
    coeffs = diagonal / np.sqrt(prob)
    if coeffs.sum() < 0.0:
        coeffs = -coeffs
    if not truncation_adequate(coeffs):
        raise TruncationError(
            f"heralded state not converged at cutoff {size - 1}",
            required_cutoff=2 * (size - 1))
    return SchmidtState(coeffs=coeffs, success_prob=min(prob * state.success_prob, 1.0))


def apply_heralds(state: SchmidtState, specs: Iterable[HeraldSpec],
                  convention: Convention = "amplitude") -> SchmidtState:
    """Apply a sequence of heralding stages in order."""
    for spec in specs:
        state = apply_herald(state, spec, convention)
    return state

"""
src/core/gaussian_core.py

Covariance data of the extreme-asymmetric CV-MDI link: moments of Alice's
Schmidt-form state, the thermal-loss channels, and Charlie's optimal Gaussian
entanglement swap.

Conventions: variances in shot-noise units (vacuum = 1), q = a + a†,
every covariance matrix in standard form [[x I, y Z], [y Z, z I]].
"""

from dataclasses import dataclass
import math

import numpy as np

from src.core.exceptions import DomainError, NumericalError, TruncationError
from src.core.fock_oracle import SchmidtState, truncation_adequate
from src.schemas.data_models import ChannelParams

PHYSICALITY_TOL = 1e-10
HEISENBERG_TOL = 1e-8


@dataclass(frozen=True)
class PreparedCov:
    """Alice's (a1, c) and Bob's (b1, d) two-mode states before transmission."""
    a1: float
    c: float
    b1: float
    d: float

    def __post_init__(self):
        for name, var, cov in (("Alice", self.a1, self.c), ("Bob", self.b1, self.d)):
            if var < 1.0 - PHYSICALITY_TOL:
                raise DomainError(f"{name} variance {var} is below the vacuum level")
            if var * var - cov * cov < 1.0 - PHYSICALITY_TOL:
                raise DomainError(
                    f"{name} covariance violates the uncertainty bound: "
                    f"a^2 - c^2 = {var * var - cov * cov}")


@dataclass(frozen=True)
class LossyCov:
    """Covariances after both links: Alice keeps (a1, √τ_A c, a2), Bob keeps (b2, d, b1)."""
    a1: float
    c_lossy: float
    a2: float
    b2: float
    d: float
    b1: float
    tau_a: float
    c: float


@dataclass(frozen=True)
class SwappedCov:
    """Final Alice-Bob covariance matrix [[x1 I, xp Z], [xp Z, x2 I]]."""
    x1: float
    x2: float
    xp: float

    def __post_init__(self):
        if self.x1 < 1.0 - PHYSICALITY_TOL or self.x2 < 1.0 - PHYSICALITY_TOL:
            raise NumericalError(f"swapped variances ({self.x1}, {self.x2}) below vacuum")
        if self.x1 * self.x2 - self.xp ** 2 < 1.0 - HEISENBERG_TOL:
            raise NumericalError(
                f"swapped covariance violates the Heisenberg bound: "
                f"x1*x2 - xp^2 = {self.x1 * self.x2 - self.xp ** 2}")

    @property
    def matrix(self) -> np.ndarray:
        """The 4x4 covariance matrix in (q_A, p_A, q_B, p_B) ordering."""
        identity = np.eye(2)
        z = np.diag([1.0, -1.0])
        return np.block([[self.x1 * identity, self.xp * z],
                         [self.xp * z, self.x2 * identity]])


def covariance_from_state(state: SchmidtState) -> tuple[float, float]:
    """
    (a, c) of Σ c_n|nn⟩: a = Σ (2n+1) c_n², c = 2 Σ (n+1) c_n c_{n+1}.
    """
    coeffs = state.coeffs
    if not truncation_adequate(coeffs):
        raise TruncationError(
            f"state not converged at cutoff {state.cutoff}; moments would be truncated",
            required_cutoff=2 * state.cutoff)
    n = np.arange(coeffs.size)
    a = float(np.sum((2 * n + 1) * coeffs ** 2))
    c = float(2.0 * np.sum((n[:-1] + 1) * coeffs[:-1] * coeffs[1:]))
    return a, c


def quadrature_moments_dense(state: SchmidtState) -> tuple[float, float]:
    """
    (⟨q_a²⟩, ⟨q_a q_b⟩) from dense quadrature operators on the truncated
    two-mode Fock space, one level of headroom above the state's cutoff.
    """
    dim = state.coeffs.size + 1
    annihilation = np.diag(np.sqrt(np.arange(1, dim)), 1)
    q = annihilation + annihilation.T
    identity = np.eye(dim)
    psi = np.zeros((dim, dim))
    psi[np.arange(dim - 1), np.arange(dim - 1)] = state.coeffs
    vec = psi.reshape(-1)
    q_a = np.kron(q, identity)
    q_b = np.kron(identity, q)
    variance = float(vec @ (q_a @ (q_a @ vec)))
    cross = float(vec @ (q_a @ (q_b @ vec)))
    return variance, cross


def tmsv_covariance(variance: float) -> tuple[float, float]:
    """(V, √(V²-1)) of a TMSV with quadrature variance V."""
    if variance < 1.0:
        raise DomainError(f"TMSV variance {variance} below vacuum level")
    return variance, math.sqrt(variance * variance - 1.0)


def prepared_cov(alice: SchmidtState, bob_variance: float) -> PreparedCov:
    """Alice's moments from her Schmidt state; Bob prepares a TMSV of variance V_B."""
    a1, c = covariance_from_state(alice)
    b1, d = tmsv_covariance(bob_variance)
    return PreparedCov(a1=a1, c=c, b1=b1, d=d)


def channel_params(distance_km: float, xi_total: float, alpha_db_per_km: float = 0.2) -> ChannelParams:
    """τ_A = 10^(-αL/10); ξ_A = ξ_B = ξ/2; τ_B = 1."""
    if distance_km < 0.0 or xi_total < 0.0 or alpha_db_per_km < 0.0:
        raise DomainError(
            f"distance ({distance_km}), noise ({xi_total}) and attenuation ({alpha_db_per_km}) "
            "must be nonnegative")
    return ChannelParams(
        L=distance_km,
        alpha=alpha_db_per_km,
        tau_A=10.0 ** (-alpha_db_per_km * distance_km / 10.0),
        xi_A=xi_total / 2.0,
        xi_B=xi_total / 2.0,
    )


def apply_channel(prep: PreparedCov, ch: ChannelParams) -> LossyCov:
    """a2 = τ_A(a1 - 1) + 1 + ξ_A; b2 = b1 + ξ_B; Alice's cross covariance scaled by √τ_A."""
    return LossyCov(
        a1=prep.a1,
        c_lossy=math.sqrt(ch.tau_A) * prep.c,
        a2=ch.tau_A * (prep.a1 - 1.0) + 1.0 + ch.xi_A,
        b2=prep.b1 + ch.xi_B,
        d=prep.d,
        b1=prep.b1,
        tau_a=ch.tau_A,
        c=prep.c,
    )


def swap(lossy: LossyCov) -> SwappedCov:
    """
    Optimal Gaussian entanglement swap at Charlie:
    x1 = a1 - τ_A c²/(a2+b2), x2 = b1 - d²/(a2+b2), xp = c d √τ_A/(a2+b2).
    """
    denominator = lossy.a2 + lossy.b2
    if denominator <= 0.0:
        raise DomainError(f"a2 + b2 = {denominator} must be positive")
    x1 = lossy.a1 - lossy.tau_a * lossy.c ** 2 / denominator
    x2 = lossy.b1 - lossy.d ** 2 / denominator
    xp = lossy.c * lossy.d * math.sqrt(lossy.tau_a) / denominator
    # Rounding near purity can dip just under the bounds.
    if 1.0 - PHYSICALITY_TOL <= x1 < 1.0:
        x1 = 1.0
    if 1.0 - PHYSICALITY_TOL <= x2 < 1.0:
        x2 = 1.0
    return SwappedCov(x1=x1, x2=x2, xp=xp)

"""
src/core/exceptions.py

Error hierarchy shared by the simulation modules.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulation library."""


class DomainError(SimulationError, ValueError):
    """A parameter lies outside the physical or mathematical domain of an operation."""


class TruncationError(SimulationError):
    """The Fock-space cutoff is too small for the requested accuracy."""

    def __init__(self, message: str, required_cutoff: Optional[int] = None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class ZeroProbabilityError(SimulationError):
    """A heralding sequence has (numerically) zero success probability."""


class HeraldShapeError(SimulationError):
    """A heralded output left the Schmidt form Σ c_n|nn⟩."""


class NumericalError(SimulationError):
    """A floating-point quantity left its physical bound by more than the clamp tolerance."""

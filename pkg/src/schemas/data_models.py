# src/schemas/data_models.py
"""
src/schemas/data_models.py

Defines Pydantic models for the records that cross module boundaries:
channel parameters, security reports, optimizer and sweep results,
validation reports and run manifests.
"""

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# --- Channel and security ---


class ChannelParams(BaseModel):
    """Thermal-loss channel between Alice and Charlie; Bob sits at Charlie."""
    model_config = ConfigDict(frozen=True)

    L: float = Field(..., ge=0.0, description="Alice-Charlie distance (km).")
    alpha: float = Field(0.2, ge=0.0, description="Fiber attenuation (dB/km).")
    tau_A: float = Field(..., gt=0.0, le=1.0,
                         description="Alice-Charlie transmissivity 10^(-alpha*L/10).")
    xi_A: float = Field(0.0, ge=0.0, description="Excess noise on Alice's link (SNU).")
    xi_B: float = Field(0.0, ge=0.0, description="Excess noise on Bob's link (SNU).")
    tau_B: float = Field(1.0, description="Bob-Charlie transmissivity (fixed at 1).")

    @model_validator(mode="after")
    def check_asymmetric_placement(self) -> "ChannelParams":
        if self.tau_B != 1.0:
            raise ValueError("tau_B is fixed at 1 (Bob co-located with Charlie)")
        expected = 10.0 ** (-self.alpha * self.L / 10.0)
        if abs(self.tau_A - expected) > 1e-12 * max(expected, 1e-300):
            raise ValueError(f"tau_A={self.tau_A} inconsistent with alpha*L (expected {expected})")
        return self

    @property
    def xi_total(self) -> float:
        return self.xi_A + self.xi_B


class SecurityReport(BaseModel):
    """Key-rate breakdown for one operating point."""
    i_ab: float = Field(..., description="Alice-Bob mutual information (bits/pulse).")
    v1: float = Field(..., description="Larger symplectic eigenvalue (SNU).")
    v2: float = Field(..., description="Smaller symplectic eigenvalue (SNU).")
    v_bar: float = Field(..., description="Conditional symplectic eigenvalue (SNU).")
    chi_be: float = Field(..., description="Holevo bound on Eve's information (bits/pulse).")
    skr: float = Field(..., description="Secret key rate (bits/pulse); may be negative.")
    success_prob: float = Field(..., ge=0.0, le=1.0, description="Heralding probability used.")


class OptimizationResult(BaseModel):
    """Outcome of the transmissivity search at one operating point."""
    T_star: float = Field(..., description="Maximizing beam-splitter transmissivity.")
    report: SecurityReport
    feasible: bool = Field(True, description="False when every scanned SKR was negative.")
    evaluations: int = Field(0, description="Number of pipeline evaluations spent.")

# --- Sweeps ---


class SweepConfig(BaseModel):
    """Grid definition for a key-rate sweep."""
    kinds: List[str] = Field(..., min_length=1, description="State kinds (TMSV, PAS1, PAS2, PR2).")
    r_db_grid: List[float] = Field(..., min_length=1, description="Squeezing values (dB).")
    L_grid: List[float] = Field(..., min_length=1, description="Distances (km).")
    xi_grid: List[float] = Field(..., min_length=1, description="Total excess noise values (SNU).")
    gamma: float = Field(0.95, gt=0.0, le=1.0, description="Reconciliation efficiency.")
    alpha: float = Field(0.2, ge=0.0, description="Attenuation (dB/km).")
    t_min: float = Field(0.01, gt=0.0, lt=1.0, description="Lower end of the T search domain.")
    t_max: float = Field(0.999, gt=0.0, lt=1.0, description="Upper end of the T search domain.")
    t_scan_points: int = Field(60, ge=50, description="Coarse-scan grid size.")
    t_tolerance: float = Field(1e-4, gt=0.0, description="Golden-section stopping width.")
    bob_r_db: Optional[float] = Field(None, ge=0.0,
                                      description="Bob's squeezing (dB); None ties it to Alice's.")
    threads: int = Field(1, ge=1, description="Worker threads for independent cells.")

    @model_validator(mode="after")
    def check_grids(self) -> "SweepConfig":
        for name in ("r_db_grid", "L_grid", "xi_grid"):
            grid = getattr(self, name)
            if any(b < a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be sorted ascending")
            if any(v < 0 for v in grid):
                raise ValueError(f"{name} must be nonnegative")
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be smaller than t_max")
        return self


class SweepCell(BaseModel):
    """One (kind, r_dB, L, xi) cell of a sweep. `error` is set instead of raising."""
    kind: str
    r_db: float
    L: float
    xi: float
    skr: Optional[float] = None
    T_star: Optional[float] = Field(None, description="Optimal T; None for TMSV or failed cells.")
    success_prob: Optional[float] = None
    i_ab: Optional[float] = None
    chi_be: Optional[float] = None
    v_min: Optional[float] = Field(None, description="Smallest symplectic eigenvalue seen.")
    feasible: Optional[bool] = None
    error: Optional[str] = Field(None, description="Failure message when the cell could not be computed.")


class SweepResult(BaseModel):
    """All cells of a sweep, in kind-major grid order."""
    config: SweepConfig
    cells: List[SweepCell] = Field(default_factory=list)
    failed: int = Field(0, description="Cells with a recorded error.")

    def cell(self, kind: str, r_db: float, L: float, xi: float) -> SweepCell:
        for c in self.cells:
            if c.kind == kind and c.r_db == r_db and c.L == L and c.xi == xi:
                return c
        raise KeyError((kind, r_db, L, xi))


class LogNegPoint(BaseModel):
    """Log-negativity and heralding probability of one state at one T."""
    kind: str
    T: float
    E_N: float = Field(..., description="Logarithmic negativity (ebits).")
    success_prob: float


class FrontierPoint(BaseModel):
    """Maximum distance (km) or maximum total excess noise (SNU) at one squeezing."""
    kind: str
    r_db: float
    mode: str = Field(..., description="'distance' or 'noise'.")
    value: float = Field(..., description="Frontier value: km for distance, SNU for noise.")
    fixed: float = Field(..., description="The held parameter: xi for distance, L for noise.")

# --- Validation and run bookkeeping ---


class ValidationCheck(BaseModel):
    """One row of the verify battery."""
    name: str
    group: str = Field(..., description="oracle | probability | printed | logneg | purity | limit")
    kind: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    value: Optional[float] = Field(None, description="Observed error or quantity.")
    tolerance: Optional[float] = None
    status: str = Field(..., description="PASS, FAIL, MATCH, MISMATCH (expected) or ERROR.")
    gating: bool = Field(True, description="Whether a failure here fails the run.")
    note: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.gating and self.status in ("FAIL", "ERROR")


class ValidationReport(BaseModel):
    """Full verify output."""
    checks: List[ValidationCheck] = Field(default_factory=list)
    convention: str = "amplitude"

    @property
    def passed(self) -> bool:
        return not any(check.failed for check in self.checks)

    def summary(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for check in self.checks:
            counts[check.status] = counts.get(check.status, 0) + 1
        return counts


class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI run."""
    command: str
    version: str
    timestamp: datetime = Field(default_factory=datetime.now)
    config: Dict[str, Any] = Field(default_factory=dict, description="Fully resolved settings.")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Command arguments.")
    outputs: List[str] = Field(default_factory=list)
    extras: Dict[str, Any] = Field(default_factory=dict)

# src/schemas/data_models.py

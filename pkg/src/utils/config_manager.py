# src/utils/config_manager.py
"""
utils/config_manager.py

Handles loading simulation settings from a YAML configuration file
using Pydantic for validation and type-hinting.

Precedence for a CLI run: command-line flags > --config FILE > settings.yaml
> the defaults declared on the models below. The CVMDI_THREADS environment
variable overrides sweep.threads.
"""

from typing import Optional, Dict, Any, List, Literal
from pydantic import BaseModel, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
import yaml
import os
import sys


class GeneralSettings(BaseModel):
    """General application settings."""
    log_level: str = Field(
        "INFO", description="INFO for normal runs, DEBUG to trace cutoff growth and optimizer steps.")


class SimulationSettings(BaseModel):
    """Physical and numerical parameters of a single key-rate evaluation."""
    gamma: float = Field(
        0.95, gt=0.0, le=1.0, description="Reverse-reconciliation efficiency.")
    alpha_db_per_km: float = Field(
        0.2, ge=0.0, description="Fibre attenuation in dB/km.")
    xi_total: float = Field(
        0.004, ge=0.0, description="Total excess noise (SNU), split equally between both links.")
    distance_km: float = Field(
        25.0, ge=0.0, description="Alice-Charlie distance used when excess noise is swept.")
    bob_r_db: Optional[float] = Field(
        None, ge=0.0, description="Bob's TMSV squeezing in dB; None ties it to Alice's.")
    skr_floor: float = Field(
        1e-10, gt=0.0, description="Key rate (bits/pulse) below which no key is counted.")
    t_min: float = Field(0.01, gt=0.0, lt=1.0,
                         description="Lower end of the transmissivity search.")
    t_max: float = Field(0.999, gt=0.0, lt=1.0,
                         description="Upper end of the transmissivity search.")
    t_scan_points: int = Field(
        60, ge=50, description="Coarse scan points before golden-section refinement.")
    t_tolerance: float = Field(
        1e-4, gt=0.0, description="Golden-section bracket width at which refinement stops.")
    distance_resolution_km: float = Field(
        0.1, gt=0.0, description="Bisection resolution of the maximum distance.")
    max_distance_km: float = Field(
        400.0, gt=0.0, description="Upper bound of the maximum-distance search.")
    noise_resolution: float = Field(
        1e-5, gt=0.0, description="Bisection resolution of the maximum tolerable noise.")
    max_noise: float = Field(
        1.0, gt=0.0, description="Upper bound of the maximum-noise search.")
    initial_cutoff: int = Field(
        30, ge=8, description="First Fock cutoff tried by the adaptive truncation.")
    max_cutoff: int = Field(
        200, ge=8, description="Largest Fock cutoff before a truncation error is raised.")
    transmissivity_convention: Literal["amplitude", "intensity"] = Field(
        "amplitude", description="amplitude: theta = arccos(T); intensity: theta = arccos(sqrt(T)).")

    @model_validator(mode="after")
    def _check_ranges(self) -> "SimulationSettings":
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be smaller than t_max")
        if self.initial_cutoff > self.max_cutoff:
            raise ValueError("initial_cutoff must not exceed max_cutoff")
        return self


class SweepSettings(BaseModel):
    """Default grids for the figure-replica sweeps."""
    threads: int = Field(
        1, ge=1, description="Worker threads for grid sweeps (CVMDI_THREADS overrides).")
    r_db_min: float = Field(0.0, ge=0.0, description="Smallest squeezing (dB).")
    r_db_max: float = Field(3.0, ge=0.0, description="Largest squeezing (dB).")
    r_db_points: int = Field(61, ge=1, description="Squeezing grid points.")
    l_max_km: float = Field(80.0, ge=0.0, description="Largest distance on the heatmap axis.")
    l_points: int = Field(81, ge=1, description="Distance grid points.")
    xi_max: float = Field(0.05, ge=0.0, description="Largest excess noise on the heatmap axis.")
    xi_points: int = Field(51, ge=1, description="Excess-noise grid points.")
    logneg_t_min: float = Field(0.01, gt=0.0, lt=1.0, description="Smallest T of the E_N scan.")
    logneg_t_max: float = Field(0.999, gt=0.0, lt=1.0, description="Largest T of the E_N scan.")
    logneg_points: int = Field(200, ge=1, description="T points of the E_N scan.")


class OutputSettings(BaseModel):
    """Where artifacts go and how plots are rendered."""
    directory: str = Field("./results", description="Default output directory.")
    plot_formats: List[str] = Field(
        ["png", "svg"], description="Image formats written next to every CSV.")


class FormatterConfig(BaseModel):
    """Logging formatter configuration."""
    class_: str = Field(..., alias="class",
                        description="The class path for the formatter.")
    format: str = Field(..., description="The log format string.")

    model_config = SettingsConfigDict(
        extra='allow',
        populate_by_name=True,
        protected_namespaces=()
    )


class HandlerConfig(BaseModel):
    """Logging handler configuration."""
    class_: str = Field(..., alias="class",
                        description="The class path for the handler.")
    formatter: Optional[str] = Field(
        None, description="The formatter name to use for this handler.")
    stream: Optional[str] = Field(
        None, description="The stream for StreamHandler.")
    filename: Optional[str] = Field(
        None, description="The log file path for file-based handlers.")
    maxBytes: Optional[int] = Field(
        None, description="Maximum file size for RotatingFileHandler.")
    backupCount: Optional[int] = Field(
        None, description="Number of backup files for RotatingFileHandler.")

    model_config = SettingsConfigDict(
        extra='allow',
        populate_by_name=True,
        protected_namespaces=()
    )


class LoggingConfig(BaseModel):
    """Logging configuration."""
    version: int
    disable_existing_loggers: bool
    formatters: Dict[str, FormatterConfig]
    handlers: Dict[str, HandlerConfig]
    root: Dict[str, Any]
    loggers: Dict[str, Dict[str, Any]]


class Settings(BaseSettings):
    """Main settings model, loaded from a YAML file."""
    general: GeneralSettings = Field(default_factory=GeneralSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    logging: Optional[LoggingConfig] = None

    model_config = SettingsConfigDict(
        protected_namespaces=()
    )


class RuntimeEnvironment(BaseSettings):
    """Process-level overrides read from CVMDI_* environment variables."""
    threads: Optional[int] = Field(
        None, ge=1, description="Worker threads for sweeps (CVMDI_THREADS).")

    model_config = SettingsConfigDict(env_prefix="CVMDI_")


# Sections that accept flat `key: value` overrides; logging is file-only.
_OVERRIDABLE_SECTIONS = ("general", "simulation", "sweep", "output")


def _deep_merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _nest_flat_keys(overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Place flat keys (e.g. `gamma`) under the section declaring them.

    Raises:
        KeyError: if a key belongs to no section.
    """
    nested: Dict[str, Any] = {}
    for key, value in overrides.items():
        if key in _OVERRIDABLE_SECTIONS and isinstance(value, dict):
            model = Settings.model_fields[key].annotation
            unknown = sorted(set(value) - set(model.model_fields))
            if unknown:
                raise KeyError(f"Unknown setting(s) in '{key}': {', '.join(unknown)}")
            nested[key] = _deep_merge(nested.get(key, {}), value)
            continue
        section = key.split(".", 1)[0] if "." in key else None
        field = key.split(".", 1)[1] if section else key
        if section is None:
            for candidate in _OVERRIDABLE_SECTIONS:
                model = Settings.model_fields[candidate].annotation
                if field in model.model_fields:
                    section = candidate
                    break
        if section not in _OVERRIDABLE_SECTIONS:
            raise KeyError(f"Unknown setting '{key}'")
        model = Settings.model_fields[section].annotation
        if field not in model.model_fields:
            raise KeyError(f"Unknown setting '{key}'")
        nested.setdefault(section, {})[field] = value
    return nested


def load_override_file(path: str) -> Dict[str, Any]:
    """
    Read a --config file: a YAML mapping, or plain `key=value` lines.

    Values of `key=value` lines are parsed as YAML scalars so numbers,
    booleans and `null` keep their types.
    """
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()

    data = yaml.safe_load(text) if text.strip() else {}
    if isinstance(data, dict):
        return _nest_flat_keys(data)

    overrides: Dict[str, Any] = {}
    for line_number, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(
                f"{path}:{line_number}: expected 'key=value', got '{line}'")
        key, raw_value = line.split("=", 1)
        overrides[key.strip()] = yaml.safe_load(raw_value.strip())
    return _nest_flat_keys(overrides)


class ConfigManager:
    """
    Singleton class to manage and load simulation settings.
    """
    _settings: Optional[Settings] = None

    @staticmethod
    def settings_path() -> str:
        return os.path.join(os.path.dirname(__file__), '../../config/settings.yaml')

    @staticmethod
    def get_settings() -> Settings:
        """
        Loads and returns the settings. This is a singleton method that
        ensures the config is loaded only once.
        """
        if ConfigManager._settings is None:
            config_path = ConfigManager.settings_path()
            if not os.path.exists(config_path):
                raise FileNotFoundError(
                    f"Configuration file not found at {config_path}")

            with open(config_path, 'r') as f:
                config_data = yaml.safe_load(f) or {}

            try:
                settings = Settings.model_validate(config_data)
            except Exception as e:
                print(f"CRITICAL ERROR: Failed to validate settings from {config_path}. "
                      f"Please check your settings.yaml file against the schema. Error: {e}", file=sys.stderr)
                raise RuntimeError(
                    "Failed to load and validate application settings.") from e

            env = RuntimeEnvironment()
            if env.threads is not None:
                settings.sweep.threads = env.threads
            ConfigManager._settings = settings

        return ConfigManager._settings

    @staticmethod
    def with_overrides(settings: Settings, overrides: Dict[str, Any]) -> Settings:
        """
        Return a re-validated copy of `settings` with nested overrides applied.
        `overrides` may use flat keys; the singleton is left untouched.
        """
        if not overrides:
            return settings
        merged = _deep_merge(settings.model_dump(by_alias=True),
                             _nest_flat_keys(overrides))
        return Settings.model_validate(merged)

    @staticmethod
    def reset() -> None:
        """Forget the cached settings (tests, or after editing settings.yaml)."""
        ConfigManager._settings = None


if __name__ == '__main__':
    try:
        settings = ConfigManager.get_settings()
        print("--- Loaded Settings ---")
        print(f"Log Level: {settings.general.log_level}")
        print(f"Reconciliation efficiency: {settings.simulation.gamma}")
        print(f"Excess noise: {settings.simulation.xi_total}")
        print(f"Sweep threads: {settings.sweep.threads}")
    except Exception as e:
        print(f"Test failed: {e}", file=sys.stderr)


# src/utils/config_manager.py

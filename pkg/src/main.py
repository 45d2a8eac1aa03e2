"""
main.py

Run functions behind the CLI subcommands. Each one resolves its grids from
the settings, drives src/core/experiments.py or src/core/validation.py,
writes CSV + plots through the artifact backends, and returns the RunManifest
listing every file it produced.

Failed sweep cells never abort a run: they are collected into RunStats and
written to a `<name>_errors.json` report next to the CSV.
"""

import logging
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.analytic_states import StateKind
from src.core.experiments import (
    ExperimentOptions,
    crossover,
    frontier,
    frontier_from_sweep,
    logneg_scan,
    max_distance,
    sweep,
)
from src.core.validation import run_validation
from src.schemas.data_models import RunManifest, SweepCell, SweepConfig, SweepResult, ValidationReport
from src.storage.backends import ArtifactBackendFactory
from src.utils.config_manager import Settings

logger = logging.getLogger("cvmdi_qkd")

VERSION = "1.0.0"
ALL_KINDS = [k.value for k in StateKind]


@dataclass
class CellError:
    """Container for a failed sweep cell."""
    kind: str
    r_db: float
    L: float
    xi: float
    error_message: str

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "r_db": self.r_db, "L_km": self.L, "xi": self.xi,
                "error_message": self.error_message}


@dataclass
class RunStats:
    """Statistics tracker for a sweep-backed run."""
    total_cells: int = 0
    feasible_cells: int = 0
    errors: List[CellError] = field(default_factory=list)

    def record(self, cells: Sequence[SweepCell]):
        for cell in cells:
            self.total_cells += 1
            if cell.error:
                self.errors.append(CellError(cell.kind, cell.r_db, cell.L, cell.xi, cell.error))
            elif cell.skr is not None and cell.skr > 0.0:
                self.feasible_cells += 1

    def get_summary(self) -> Dict[str, Any]:
        return {
            "total_cells": self.total_cells,
            "cells_with_key": self.feasible_cells,
            "failed_cells": len(self.errors),
            "success_rate": f"{(1 - len(self.errors) / max(1, self.total_cells)) * 100:.1f}%",
        }


def _grid(lo: float, hi: float, points: int) -> List[float]:
    if points < 1:
        raise ValueError(f"grid needs at least one point, got {points}")
    if points > 1 and hi <= lo:
        raise ValueError(f"grid range [{lo}, {hi}] is empty")
    return [float(v) for v in np.linspace(lo, hi, points)] if points > 1 else [float(lo)]


def _csv_header(command: str, settings: Settings, parameters: Dict[str, Any]) -> Dict[str, Any]:
    """`#` header of a CSV: command, version, arguments and simulation settings. No timestamp."""
    return {
        "command": command,
        "version": VERSION,
        "parameters": parameters,
        "simulation": settings.simulation.model_dump(mode="json"),
    }


def _manifest(command: str, settings: Settings, parameters: Dict[str, Any],
              outputs: Sequence[Path], extras: Optional[Dict[str, Any]] = None) -> RunManifest:
    return RunManifest(
        command=command,
        version=VERSION,
        config=settings.model_dump(mode="json", by_alias=True),
        parameters=parameters,
        outputs=[str(p) for p in outputs],
        extras=extras or {},
    )


def _write_outputs(out_dir: str, settings: Settings, command: str, name: str,
                   frame: pd.DataFrame, parameters: Dict[str, Any], plot_kind: Optional[str],
                   extras: Dict[str, Any], stats: Optional[RunStats] = None,
                   **plot_options: Any) -> RunManifest:
    """CSV first, then plots read back from it, then the error report and manifest."""
    csv_backend = ArtifactBackendFactory.get_backend("csv", out_dir)
    outputs = csv_backend.save(name, frame, header=_csv_header(command, settings, parameters))
    if plot_kind and settings.output.plot_formats:
        plotter = ArtifactBackendFactory.get_backend(
            "plot", out_dir, formats=settings.output.plot_formats)
        outputs += plotter.save(name, outputs[0], kind=plot_kind, **plot_options)
    if stats is not None:
        extras = {**extras, "stats": stats.get_summary()}
        if stats.errors:
            error_path = Path(out_dir) / f"{name}_errors.json"
            with open(error_path, 'w', encoding='utf-8') as f:
                json.dump({"summary": stats.get_summary(),
                           "errors": [e.to_dict() for e in stats.errors]}, f, indent=2)
            outputs.append(error_path)
            logger.warning(f"{len(stats.errors)} failed cell(s); details in {error_path}")
    manifest_backend = ArtifactBackendFactory.get_backend("manifest", out_dir)
    manifest = _manifest(command, settings, parameters, outputs, extras)
    manifest_path = Path(out_dir) / f"{name}_manifest.json"
    manifest.outputs.append(str(manifest_path))
    manifest_backend.save(f"{name}_manifest", manifest)
    return manifest


def _cells_frame(result: SweepResult) -> pd.DataFrame:
    return pd.DataFrame([
        {"kind": c.kind, "r_db": c.r_db, "L_km": c.L, "xi": c.xi, "skr": c.skr,
         "T_star": c.T_star, "success_prob": c.success_prob, "i_ab": c.i_ab,
         "chi_be": c.chi_be, "v_min": c.v_min, "error": c.error or ""}
        for c in result.cells
    ])


def run_verify(out_dir: str, settings: Settings) -> Tuple[ValidationReport, RunManifest]:
    """Run the validation battery and write `verify_report.json` plus a manifest."""
    sim = settings.simulation
    report = run_validation(convention=sim.transmissivity_convention,
                            cutoff=sim.initial_cutoff, gamma=sim.gamma,
                            max_cutoff=sim.max_cutoff)
    report_backend = ArtifactBackendFactory.get_backend("report", out_dir)
    outputs = report_backend.save("verify_report", report)
    manifest_path = Path(out_dir) / "verify_manifest.json"
    manifest = _manifest("verify", settings, {"convention": sim.transmissivity_convention,
                                     "max_cutoff": sim.max_cutoff},
                         outputs + [manifest_path],
                         {"passed": report.passed, "summary": report.summary()})
    ArtifactBackendFactory.get_backend("manifest", out_dir).save("verify_manifest", manifest)
    return report, manifest


def run_logneg(out_dir: str, settings: Settings, r_db: float, t_min: float, t_max: float,
               points: int, kinds: Sequence[str] = ALL_KINDS) -> RunManifest:
    """E_N and success probability vs T; a single-point grid writes the CSV without a plot."""
    T_grid = _grid(t_min, t_max, points)
    curves = logneg_scan(kinds, r_db, T_grid, cutoff=settings.simulation.initial_cutoff)
    frame = pd.DataFrame([p.model_dump() for kind in curves for p in curves[kind]],
                         columns=["T", "kind", "E_N", "success_prob"])
    peaks = {}
    for kind, pts in curves.items():
        best = max(pts, key=lambda p: p.E_N)
        peaks[kind] = {"max_E_N": best.E_N, "T_at_max": best.T}
    parameters = {"r_db": r_db, "t_min": t_min, "t_max": t_max, "points": points,
                  "kinds": list(curves)}
    return _write_outputs(out_dir, settings, "logneg", f"logneg_r{r_db:g}dB", frame, parameters,
                          "logneg" if points > 1 else None, {"peaks": peaks})


def run_distance(out_dir: str, settings: Settings, r_db: float, xi: float, gamma: float,
                 l_max: float, l_points: int, kinds: Sequence[str] = ALL_KINDS,
                 threads: Optional[int] = None, show_progress: bool = False) -> RunManifest:
    """SKR vs distance with per-point T optimization, plus the bisected max distance per kind."""
    options = ExperimentOptions.from_settings(settings.simulation)
    config = SweepConfig(
        kinds=list(kinds), r_db_grid=[r_db], L_grid=_grid(0.0, l_max, l_points), xi_grid=[xi],
        gamma=gamma, alpha=options.alpha, t_min=options.t_min, t_max=options.t_max,
        t_scan_points=options.t_scan_points, t_tolerance=options.t_tolerance,
        bob_r_db=options.bob_r_db, threads=threads or settings.sweep.threads)
    result = sweep(config, options=options, show_progress=show_progress)
    stats = RunStats()
    stats.record(result.cells)
    frame = pd.DataFrame([
        {"L_km": c.L, "kind": c.kind, "skr": c.skr, "T_star": c.T_star, "P": c.success_prob}
        for c in result.cells
    ])
    reach = {
        kind: max_distance(kind, r_db, xi, gamma, settings.simulation.skr_floor, options=options)
        for kind in config.kinds
    }
    parameters = {"r_db": r_db, "xi": xi, "gamma": gamma, "l_max": l_max,
                  "l_points": l_points, "kinds": config.kinds}
    return _write_outputs(out_dir, settings, "distance", f"distance_r{r_db:g}dB", frame,
                          parameters, "distance", {"max_distance_km": reach}, stats)


def run_heatmap(out_dir: str, settings: Settings, mode: str, r_db_min: float, r_db_max: float,
                r_db_points: int, axis_max: float, axis_points: int, fixed: float, gamma: float,
                kinds: Sequence[str] = ALL_KINDS, threads: Optional[int] = None,
                show_progress: bool = False) -> RunManifest:
    """
    -log10(SKR) over (squeezing, distance) at fixed ξ, or over (squeezing, ξ)
    at fixed L, per kind.
    """
    if mode not in ("distance", "noise"):
        raise ValueError(f"heatmap mode must be 'distance' or 'noise', got '{mode}'")
    options = ExperimentOptions.from_settings(settings.simulation)
    axis = _grid(0.0, axis_max, axis_points)
    config = SweepConfig(
        kinds=list(kinds), r_db_grid=_grid(r_db_min, r_db_max, r_db_points),
        L_grid=axis if mode == "distance" else [fixed],
        xi_grid=[fixed] if mode == "distance" else axis,
        gamma=gamma, alpha=options.alpha, t_min=options.t_min, t_max=options.t_max,
        t_scan_points=options.t_scan_points, t_tolerance=options.t_tolerance,
        bob_r_db=options.bob_r_db, threads=threads or settings.sweep.threads)
    result = sweep(config, options=options, show_progress=show_progress)
    stats = RunStats()
    stats.record(result.cells)
    floor = settings.simulation.skr_floor
    edge = frontier_from_sweep(result, mode, floor)
    extras = {
        "grid_frontier": [p.model_dump() for p in edge],
        "crossover_PAS2_to_PAS1": crossover(edge, StateKind.PAS2, StateKind.PAS1),
    }
    parameters = {"mode": mode, "r_db_min": r_db_min, "r_db_max": r_db_max,
                  "r_db_points": r_db_points, "axis_max": axis_max, "axis_points": axis_points,
                  "fixed": fixed, "gamma": gamma, "kinds": config.kinds}
    return _write_outputs(out_dir, settings, "heatmap", f"heatmap_{mode}", _cells_frame(result),
                          parameters, "heatmap", extras, stats,
                          axis="L_km" if mode == "distance" else "xi", skr_floor=floor)


def run_frontier(out_dir: str, settings: Settings, mode: str, r_db_min: float, r_db_max: float,
                 r_db_points: int, fixed: float, gamma: float, kinds: Sequence[str] = ALL_KINDS,
                 threads: Optional[int] = None, show_progress: bool = False) -> RunManifest:
    """Bisected max distance or max noise per kind and squeezing, with the 2PAS -> 1PAS crossover."""
    options = ExperimentOptions.from_settings(settings.simulation)
    r_grid = _grid(r_db_min, r_db_max, r_db_points)
    points = frontier(kinds, r_grid, mode, fixed=fixed, gamma=gamma,
                      skr_floor=settings.simulation.skr_floor, options=options,
                      threads=threads or settings.sweep.threads, show_progress=show_progress)
    frame = pd.DataFrame([p.model_dump() for p in points],
                         columns=["kind", "r_db", "mode", "value", "fixed"])
    extras = {"crossover_PAS2_to_PAS1": crossover(points, StateKind.PAS2, StateKind.PAS1)}
    parameters = {"mode": mode, "r_db_min": r_db_min, "r_db_max": r_db_max,
                  "r_db_points": r_db_points, "fixed": fixed, "gamma": gamma,
                  "kinds": [StateKind.parse(k).value for k in kinds]}
    return _write_outputs(out_dir, settings, "frontier", f"frontier_{mode}", frame, parameters,
                          "frontier", extras)

# src/storage/backends.py
"""
src/storage/backends.py

Defines abstract and concrete artifact backends for simulation runs
(CSV tables, rendered plots, run manifests and validation reports),
and a factory to retrieve them by name.

CSV is the primary artifact. Plots are rendered from the CSV file read back
from disk, so they never carry data the CSV does not.
"""

import json
import logging
import os
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from tenacity import (  # noqa: E402
    before_sleep_log,
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from src.schemas.data_models import RunManifest, ValidationReport  # noqa: E402

logger = logging.getLogger("cvmdi_qkd")

# Constants for retry on transient file-system errors
MAX_RETRY_ATTEMPTS = 3
RETRY_MIN_WAIT = 1  # seconds
RETRY_MAX_WAIT = 4  # seconds
CSV_FLOAT_FORMAT = "%.12g"

KIND_STYLES = {
    "TMSV": {"color": "black", "label": "TMSV"},
    "PAS1": {"color": "tab:blue", "label": "1PAS"},
    "PAS2": {"color": "tab:red", "label": "2PAS"},
    "PR2": {"color": "tab:green", "label": "2PR"},
}

_write_retry = retry(
    stop=stop_after_attempt(MAX_RETRY_ATTEMPTS),
    wait=wait_exponential(multiplier=1, min=RETRY_MIN_WAIT, max=RETRY_MAX_WAIT),
    retry=retry_if_exception_type(OSError),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)


class ArtifactBackend(ABC):
    """Abstract Base Class for artifact backends."""

    def __init__(self, directory: str):
        self.output_directory = Path(directory)
        self.written: List[Path] = []

    def initialize(self):
        """
        Ensures the output directory exists and is writable.
        """
        try:
            self.output_directory.mkdir(parents=True, exist_ok=True)
            if not os.access(self.output_directory, os.W_OK):
                raise PermissionError(
                    f"Output directory {self.output_directory} is not writable.")
            logger.debug(f"Artifact directory ensured: {self.output_directory}")
        except Exception as e:
            logger.critical(
                f"Failed to create or verify output directory {self.output_directory}: {e}")
            raise

    @abstractmethod
    def save(self, name: str, data: Any, **kwargs: Any) -> List[Path]:
        """Writes one artifact and returns the files produced."""
        pass


class CsvArtifactBackend(ArtifactBackend):
    """
    Writes pandas DataFrames as CSV: `#` header lines carrying the run
    parameters, then a header row and values at 12 significant digits.
    """

    @_write_retry
    def save(self, name: str, data: pd.DataFrame, header: Optional[Dict[str, Any]] = None,
             **kwargs: Any) -> List[Path]:
        path = self.output_directory / f"{name}.csv"
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                for key in sorted(header or {}):
                    f.write(f"# {key}: {json.dumps(header[key], sort_keys=True, default=str)}\n")
                data.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
            self.written.append(path)
            logger.info(f"Wrote {len(data)} rows to {path}")
            return [path]
        except Exception as e:
            logger.error(f"Failed to write CSV {path}: {e}", exc_info=True)
            raise

    @staticmethod
    def read(path: "str | Path") -> pd.DataFrame:
        """Reads a CSV written by this backend, skipping the `#` header lines."""
        return pd.read_csv(path, comment="#")


class PlotArtifactBackend(ArtifactBackend):
    """
    Renders plots from CSV files written by CsvArtifactBackend.

    Supported plot kinds: `logneg` (E_N solid, success probability dashed),
    `distance` (log-scale SKR vs L), `heatmap` (-log10 SKR per kind) and
    `frontier` (max distance or max noise vs squeezing).
    """

    def __init__(self, directory: str, formats: Sequence[str] = ("png", "svg")):
        super().__init__(directory)
        self.formats = list(formats)

    @_write_retry
    def _savefig(self, fig, stem: str) -> List[Path]:
        paths = []
        for fmt in self.formats:
            path = self.output_directory / f"{stem}.{fmt}"
            metadata = {"Date": None} if fmt == "svg" else None
            fig.savefig(path, bbox_inches="tight", metadata=metadata)
            paths.append(path)
        return paths

    def save(self, name: str, data: "str | Path", kind: str = "distance",
             **kwargs: Any) -> List[Path]:
        frame = CsvArtifactBackend.read(data)
        renderers = {
            "logneg": self._render_logneg,
            "distance": self._render_distance,
            "heatmap": self._render_heatmap,
            "frontier": self._render_frontier,
        }
        if kind not in renderers:
            raise ValueError(f"Unsupported plot kind: '{kind}'.")
        paths: List[Path] = []
        try:
            for stem, fig in renderers[kind](name, frame, **kwargs):
                try:
                    paths.extend(self._savefig(fig, stem))
                finally:
                    plt.close(fig)
        except Exception as e:
            logger.error(f"Failed to render {kind} plot from {data}: {e}", exc_info=True)
            raise
        self.written.extend(paths)
        logger.info(f"Rendered {len(paths)} plot file(s) for {name}")
        return paths

    def _render_logneg(self, name: str, frame: pd.DataFrame, **kwargs: Any):
        fig, ax_en = plt.subplots(figsize=(6, 4))
        ax_p = ax_en.twinx()
        for kind, group in frame.groupby("kind", sort=False):
            style = KIND_STYLES.get(kind, {"color": None, "label": kind})
            if kind == "TMSV":
                ax_en.axhline(group["E_N"].iloc[0], color=style["color"], label=style["label"])
                continue
            ax_en.plot(group["T"], group["E_N"], color=style["color"], label=style["label"])
            ax_p.plot(group["T"], group["success_prob"], color=style["color"], linestyle="--")
        ax_en.set_xlabel("Beam-splitter transmissivity T")
        ax_en.set_ylabel("Logarithmic negativity E_N")
        ax_p.set_ylabel("Success probability (dashed)")
        ax_en.legend(loc="upper left")
        yield name, fig

    def _render_distance(self, name: str, frame: pd.DataFrame, **kwargs: Any):
        fig, ax = plt.subplots(figsize=(6, 4))
        for kind, group in frame.groupby("kind", sort=False):
            style = KIND_STYLES.get(kind, {"color": None, "label": kind})
            positive = group[group["skr"] > 0]
            ax.semilogy(positive["L_km"], positive["skr"], color=style["color"], label=style["label"])
        ax.set_xlabel("Alice-Charlie distance (km)")
        ax.set_ylabel("Secret key rate (bits/pulse)")
        ax.legend()
        yield name, fig

    def _render_heatmap(self, name: str, frame: pd.DataFrame, axis: str = "L_km",
                        skr_floor: float = 1e-10, **kwargs: Any):
        for kind, group in frame.groupby("kind", sort=False):
            table = group.pivot(index=axis, columns="r_db", values="skr").sort_index()
            values = table.to_numpy(dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                image = np.where(values >= skr_floor, -np.log10(values), np.nan)
            finite = image[np.isfinite(image)]
            # A kind with no key anywhere still gets an (all grey) image.
            vmin, vmax = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
            fig, ax = plt.subplots(figsize=(6, 4))
            mesh = ax.pcolormesh(table.columns.to_numpy(), table.index.to_numpy(),
                                 np.ma.masked_invalid(image), shading="nearest", cmap="viridis",
                                 vmin=vmin, vmax=vmax)
            fig.colorbar(mesh, ax=ax, label="-log10(SKR)")
            ax.set_facecolor("lightgrey")
            ax.set_xlabel("Squeezing (dB)")
            ax.set_ylabel("Distance (km)" if axis == "L_km" else "Total excess noise (SNU)")
            ax.set_title(f"{KIND_STYLES.get(kind, {'label': kind})['label']} (grey: no key)")
            yield f"{name}_{kind}", fig

    def _render_frontier(self, name: str, frame: pd.DataFrame, **kwargs: Any):
        fig, ax = plt.subplots(figsize=(6, 4))
        for kind, group in frame.groupby("kind", sort=False):
            style = KIND_STYLES.get(kind, {"color": None, "label": kind})
            ax.plot(group["r_db"], group["value"], color=style["color"], label=style["label"])
        mode = frame["mode"].iloc[0] if len(frame) else "distance"
        ax.set_xlabel("Squeezing (dB)")
        ax.set_ylabel("Maximum distance (km)" if mode == "distance" else "Maximum excess noise (SNU)")
        ax.legend()
        yield name, fig


class ManifestArtifactBackend(ArtifactBackend):
    """Writes the RunManifest of a run as indented JSON."""

    @_write_retry
    def save(self, name: str, data: RunManifest, **kwargs: Any) -> List[Path]:
        path = self.output_directory / f"{name}.json"
        path.write_text(data.model_dump_json(indent=2), encoding="utf-8")
        self.written.append(path)
        logger.info(f"Wrote manifest {path}")
        return [path]


class ReportArtifactBackend(ArtifactBackend):
    """Writes a ValidationReport, including pass/fail summary, as indented JSON."""

    @_write_retry
    def save(self, name: str, data: ValidationReport, **kwargs: Any) -> List[Path]:
        path = self.output_directory / f"{name}.json"
        payload = data.model_dump(mode="json")
        payload["passed"] = data.passed
        payload["summary"] = data.summary()
        path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        self.written.append(path)
        logger.info(f"Wrote validation report {path}")
        return [path]


class ArtifactBackendFactory:
    """
    Factory to create and initialize artifact backends by name.
    """
    _registry = {
        "csv": CsvArtifactBackend,
        "plot": PlotArtifactBackend,
        "manifest": ManifestArtifactBackend,
        "report": ReportArtifactBackend,
    }

    @classmethod
    def get_backend(cls, name: str, directory: str, **config: Any) -> ArtifactBackend:
        """
        Returns an initialized backend writing into `directory`.

        Raises:
            ValueError: If `name` is not a supported backend type.
        """
        backend_cls = cls._registry.get(name.lower())
        if backend_cls is None:
            raise ValueError(f"Unsupported artifact backend type: '{name}'.")
        backend = backend_cls(directory, **config)
        backend.initialize()
        logger.debug(f"Artifact backend '{name}' initialized at {directory}.")
        return backend

# src/storage/backends.py

"""Tidy CSV and manifest output of campaign results."""

from __future__ import annotations

import csv
import json
import logging
import platform
from pathlib import Path

import numpy as np
import scipy

import netflux
from netflux.campaign.spec import ExperimentResult, ExperimentSpec

logger = logging.getLogger(__name__)

COLUMNS = ["campaign", "model", "d", "L", "beta", "statistic", "value"]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_results_csv(results: list[ExperimentResult], path) -> int:
    """Write one row per (campaign, d, L, beta, statistic); returns the row count."""
    count = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(COLUMNS)
        for result in results:
            for row in result.rows():
                writer.writerow([_cell(v) for v in row])
                count += 1
    return count


def build_manifest(results: list[ExperimentResult], spec: ExperimentSpec) -> dict:
    return {
        "spec_hash": spec.spec_hash(),
        "master_seed": spec.master_seed,
        "spec": spec.to_dict(),
        "seeds": {result.key(): list(result.seeds) for result in results},
        "versions": {
            "netflux": netflux.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def emit_plot_data(results: list[ExperimentResult], output_dir, spec: ExperimentSpec) -> tuple[Path, Path]:
    """
    Write results.csv and manifest.json into output_dir.

    Nothing time-dependent is written, so a rerun of the same spec with one
    worker reproduces both files byte for byte.

    Returns:
        (csv path, manifest path)
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    manifest_path = out / "manifest.json"
    count = write_results_csv(results, csv_path)
    with open(manifest_path, "w") as f:
        json.dump(build_manifest(results, spec), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Wrote %d rows to %s", count, csv_path)
    return csv_path, manifest_path

"""Run-directory discovery and metrics.csv parsing.

This package talks to training runs only through their files: metrics.csv
(fixed 12-column header, '.' decimals) and the optional manifest.json with the
harness's own derived metrics. Nothing here ever writes into a run directory.
"""

from __future__ import annotations

import glob
import json
import os
from dataclasses import dataclass, field

import numpy as np

# File contract for metrics.csv produced by the training harness.
EXPECTED_HEADER = (
    "epoch", "episodes_seen", "success_rate", "train_success_rate", "lambda",
    "eta", "mean_F", "mu_pos_norm", "mu_neg_norm", "actor_loss", "critic_loss",
    "encoder_loss",
)


@dataclass
class RunSet:
    """One labeled group of runs (typically the same config across seeds)."""

    label: str
    csv_paths: list[str]
    seeds: list[int | None] = field(default_factory=list)

    def __post_init__(self):
        if not self.csv_paths:
            raise ValueError(f"runset {self.label!r} has no metrics.csv files")
        if not self.seeds:
            self.seeds = [_seed_of(path) for path in self.csv_paths]


def _seed_of(csv_path: str) -> int | None:
    manifest = os.path.join(os.path.dirname(csv_path), "manifest.json")
    if os.path.exists(manifest):
        try:
            with open(manifest) as fh:
                return json.load(fh).get("seed")
        except (OSError, ValueError):
            return None
    return None


def discover_csvs(directory: str) -> list[str]:
    """metrics.csv directly in the directory, or one per seed subdirectory."""
    direct = os.path.join(directory, "metrics.csv")
    if os.path.exists(direct):
        return [direct]
    nested = sorted(glob.glob(os.path.join(directory, "*", "metrics.csv")))
    if not nested:
        raise FileNotFoundError(f"no metrics.csv under {directory}")
    return nested


def runset_from_dir(directory: str, label: str | None = None) -> RunSet:
    return RunSet(label=label if label is not None else os.path.basename(directory.rstrip("/")),
                  csv_paths=discover_csvs(directory))


def read_metrics(csv_path: str) -> dict[str, np.ndarray]:
    """Parse one metrics.csv into column arrays, enforcing the header contract."""
    with open(csv_path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if tuple(header) != EXPECTED_HEADER:
            raise ValueError(f"{csv_path}: unexpected header {header}")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{csv_path}: no data rows")
    if any(len(row) != len(EXPECTED_HEADER) for row in rows):
        raise ValueError(f"{csv_path}: ragged rows")
    data = np.array(rows, dtype=np.float64)
    return {name: data[:, i] for i, name in enumerate(EXPECTED_HEADER)}


def success_curves(runset: RunSet) -> np.ndarray:
    """Stack per-seed success_rate columns into [n_seeds, n_epochs]."""
    curves = [read_metrics(path)["success_rate"] for path in runset.csv_paths]
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise ValueError(f"runset {runset.label!r}: runs disagree on epoch count {sorted(lengths)}")
    return np.stack(curves)


def harness_derived(csv_path: str) -> dict | None:
    """The harness's own TTT/regret record from manifest.json, if present."""
    manifest = os.path.join(os.path.dirname(csv_path), "manifest.json")
    if not os.path.exists(manifest):
        return None
    with open(manifest) as fh:
        return json.load(fh).get("derived")

"""Multi-seed / multi-mode experiment helpers shared by scripts and tests."""

from __future__ import annotations

import os

import numpy as np

from .config import RunConfig, set_key
from .harness import cumulative_regret, run_training, time_to_threshold


def config_with(overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value)
    return cfg


def run_one(mode: str, seed: int, out_root: str,
            overrides: dict[str, str] | None = None) -> str:
    """Train one (mode, seed) run under out_root/<mode>/seed_<seed>; returns the dir."""
    cfg = config_with(overrides)
    set_key(cfg, "mode", mode)
    cfg.seed = seed
    run_dir = os.path.join(out_root, mode.replace("(", "_").replace(")", "").replace(".", "p"),
                           f"seed_{seed}")
    run_training(cfg, out_dir=run_dir)
    return run_dir


def read_success_curve(run_dir: str) -> np.ndarray:
    path = os.path.join(run_dir, "metrics.csv")
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        idx = header.index("success_rate")
        return np.array([float(line.split(",")[idx]) for line in fh if line.strip()])


def median_curve(run_dirs: list[str]) -> np.ndarray:
    """Per-epoch median success rate across seeds."""
    curves = np.stack([read_success_curve(d) for d in run_dirs])
    return np.median(curves, axis=0)


def curve_summary(curve: np.ndarray, theta: float) -> tuple[int | None, float]:
    """(time-to-threshold, cumulative regret) of one success curve."""
    return time_to_threshold(curve.tolist(), theta), cumulative_regret(curve.tolist())

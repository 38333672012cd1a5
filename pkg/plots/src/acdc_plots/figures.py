"""Learning-curve figures: per-epoch median with a 25-75 percentile band."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runs import RunSet, success_curves


def plot_curves(runsets: list[RunSet], out_path: str):
    """Write the figure as both PNG and SVG next to ``out_path``.

    Percentiles use linear interpolation; with one seed the band collapses
    onto the median line. Returns (figure, [written paths]).
    """
    if not runsets:
        raise ValueError("need at least one runset")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for runset in runsets:
        curves = success_curves(runset)
        epochs = np.arange(1, curves.shape[1] + 1)
        median = np.percentile(curves, 50, axis=0, method="linear")
        lo = np.percentile(curves, 25, axis=0, method="linear")
        hi = np.percentile(curves, 75, axis=0, method="linear")
        line, = ax.plot(epochs, median, label=runset.label, linewidth=1.8)
        ax.fill_between(epochs, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("epoch")
    ax.set_ylabel("success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    ax.grid(alpha=0.25)
    fig.tight_layout()

    base, ext = os.path.splitext(out_path)
    if ext.lower() not in (".png", ".svg"):
        base = out_path
    written = []
    for suffix in (".png", ".svg"):
        path = base + suffix
        fig.savefig(path)
        written.append(path)
    return fig, written

"""Sample-efficiency summaries recomputed from raw CSVs.

Time-to-threshold is the 1-based first epoch whose success rate reaches the
threshold ('-' if never), and cumulative regret is the sum of (1 - success)
over epochs. Both are recomputed here from the success_rate column and
cross-checked against the values the harness recorded in manifest.json; any
disagreement beyond 1e-9 is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .runs import RunSet, harness_derived, read_metrics, success_curves

TOLERANCE = 1e-9


def time_to_threshold(curve, theta: float) -> int | None:
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")
    for epoch, value in enumerate(curve, start=1):
        if value >= theta:
            return epoch
    return None


def cumulative_regret(curve) -> float:
    values = list(curve)
    if not values:
        raise ValueError("empty success curve")
    return float(sum(1.0 - v for v in values))


@dataclass
class RunSummary:
    csv_path: str
    seed: int | None
    ttt: dict[float, int | None]
    regret: float
    mismatches: list[str]


def summarize_run(csv_path: str, thresholds, seed=None) -> RunSummary:
    curve = read_metrics(csv_path)["success_rate"]
    ttt = {theta: time_to_threshold(curve, theta) for theta in thresholds}
    regret = cumulative_regret(curve)
    mismatches = crosscheck(csv_path, ttt, regret)
    return RunSummary(csv_path=csv_path, seed=seed, ttt=ttt, regret=regret,
                      mismatches=mismatches)


def crosscheck(csv_path: str, ttt: dict, regret: float) -> list[str]:
    """Compare recomputed values against the harness's manifest record."""
    derived = harness_derived(csv_path)
    if derived is None:
        return []
    problems = []
    recorded_regret = derived.get("cumulative_regret")
    if recorded_regret is not None and abs(recorded_regret - regret) > TOLERANCE:
        problems.append(f"{csv_path}: regret recomputed {regret!r} "
                        f"vs harness {recorded_regret!r}")
    recorded_ttt = derived.get("ttt", {})
    for theta, ours in ttt.items():
        for key, theirs in recorded_ttt.items():
            if abs(float(key) - theta) <= TOLERANCE:
                if ours != theirs:
                    problems.append(f"{csv_path}: ttt({theta:g}) recomputed {ours} "
                                    f"vs harness {theirs}")
    return problems


def _fmt_ttt(value) -> str:
    return "-" if value is None else str(value)


def summary_table(runsets: list[RunSet], thresholds) -> tuple[str, list[str]]:
    """Render the per-runset table; returns (text, flagged mismatches).

    Aggregate values are computed on the per-epoch median curve across seeds,
    matching how learning curves are reported; per-run recomputation still
    cross-checks every run against its manifest.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("need at least one threshold")
    mismatches: list[str] = []
    rows = []
    for runset in runsets:
        curves = success_curves(runset)
        for path, seed in zip(runset.csv_paths, runset.seeds):
            mismatches.extend(summarize_run(path, thresholds, seed).mismatches)
        median = np.median(curves, axis=0)
        cells = [runset.label, str(curves.shape[0])]
        cells += [_fmt_ttt(time_to_threshold(median, theta)) for theta in thresholds]
        cells.append(f"{cumulative_regret(median):.4f}")
        rows.append(cells)

    header = ["runset", "seeds"] + [f"ttt({theta:g})" for theta in thresholds] + ["regret"]
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines), mismatches


def table_csv(runsets: list[RunSet], thresholds) -> str:
    """Same aggregates as summary_table, in CSV form."""
    thresholds = list(thresholds)
    lines = ["runset,seeds," + ",".join(f"ttt_{theta:g}" for theta in thresholds) + ",regret"]
    for runset in runsets:
        median = np.median(success_curves(runset), axis=0)
        cells = [runset.label, str(len(runset.csv_paths))]
        cells += [_fmt_ttt(time_to_threshold(median, theta)) for theta in thresholds]
        cells.append(repr(cumulative_regret(median)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"

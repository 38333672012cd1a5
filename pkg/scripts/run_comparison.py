#!/usr/bin/env python3
"""Desk-scale sample-efficiency comparison across selection modes.

Trains every requested mode over the seed list at the default desk config
(plus any config overrides), writes one run directory per (mode, seed) under
--out, and prints a TTT/regret table computed on the per-epoch median curve
of each mode. Figures and richer tables can then be produced with the
acdc-plots package, e.g.:

    python scripts/run_comparison.py --out runs/ --seeds 0,1,2,3,4
    acdc-plots plot --runs runs/acdc,runs/her_uniform --labels acdc,uniform --out fig.png
    acdc-plots table --runs runs/acdc,runs/her_uniform --thresholds 0.5,0.9
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from acdc.experiments import curve_summary, median_curve, run_one


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", required=True, help="root directory for run outputs")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--modes",
                        default="acdc,her_uniform,ac_only,ac_d_only,ac_q_only,fixed_lambda(0.5)")
    parser.add_argument("--threshold", type=float, default=0.9)
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="config override applied to every run")
    args = parser.parse_args()

    overrides = {}
    for item in args.set:
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    seeds = [int(s) for s in args.seeds.split(",") if s]
    modes = [m for m in args.modes.split(",") if m]

    results = {}
    for mode in modes:
        dirs = []
        for seed in seeds:
            t0 = time.time()
            run_dir = run_one(mode, seed, args.out, overrides)
            dirs.append(run_dir)
            print(f"{mode} seed {seed}: {time.time() - t0:.0f}s -> {run_dir}", flush=True)
        ttt, regret = curve_summary(median_curve(dirs), args.threshold)
        results[mode] = (ttt, regret)

    width = max(len(m) for m in results)
    print(f"\n{'mode':<{width}}  ttt({args.threshold:g})  regret")
    for mode, (ttt, regret) in sorted(results.items(), key=lambda kv: kv[1][1]):
        print(f"{mode:<{width}}  {ttt if ttt is not None else '-':>9}  {regret:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

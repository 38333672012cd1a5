"""Command line entry points: train, eval, metrics."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import RunConfig, load_config, set_key
from .harness import cumulative_regret, evaluate, load_checkpoint_agent, \
    run_training, time_to_threshold


def _read_success_curve(metrics_csv: str) -> list[float]:
    with open(metrics_csv) as fh:
        header = fh.readline().rstrip("\n").split(",")
        idx = header.index("success_rate")
        return [float(line.split(",")[idx]) for line in fh if line.strip()]


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.mode is not None:
        set_key(cfg, "mode", args.mode)
    for override in args.set or []:
        if "=" not in override:
            raise SystemExit(f"--set expects key=value, got {override!r}")
        key, value = override.split("=", 1)
        set_key(cfg, key.strip(), value)
    metrics = run_training(cfg, out_dir=args.out)
    final = metrics.rows[-1]["success_rate"]
    print(f"finished {cfg.epochs} epochs: final success {final:.3f}, "
          f"regret {metrics.cumulative_regret:.3f}")
    for theta, epoch in metrics.ttt.items():
        print(f"  ttt({theta:g}) = {epoch if epoch is not None else '-'}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    agent, env = load_checkpoint_agent(args.checkpoint)
    rate = evaluate(agent, env, args.episodes, args.seed)
    print(f"success rate over {args.episodes} episodes: {rate:.4f}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    import glob
    import os
    rows = []
    for run_dir in args.runs:
        pattern = os.path.join(run_dir, "metrics.csv")
        candidates = [pattern] if os.path.exists(pattern) else \
            sorted(glob.glob(os.path.join(run_dir, "*", "metrics.csv")))
        if not candidates:
            raise SystemExit(f"no metrics.csv under {run_dir}")
        for path in candidates:
            curve = _read_success_curve(path)
            ttt = time_to_threshold(curve, args.threshold)
            rows.append((path, ttt, cumulative_regret(curve)))
    width = max(len(r[0]) for r in rows)
    print(f"{'run':<{width}}  ttt({args.threshold:g})  regret")
    for path, ttt, regret in rows:
        print(f"{path:<{width}}  {ttt if ttt is not None else '-':>10}  {regret:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acdc",
                                     description="curriculum + contrastive experience selection for goal-conditioned RL")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", help="flat key=value config file")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None, help="output run directory")
    p_train.add_argument("--mode", default=None,
                         help="acdc | her_uniform | ac_only | ac_d_only | ac_q_only | fixed_lambda(x)")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override any config key")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True, help="checkpoints/epoch_<k> directory")
    p_eval.add_argument("--episodes", type=int, required=True)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_metrics = sub.add_parser("metrics", help="TTT and regret table for finished runs")
    p_metrics.add_argument("--runs", nargs="+", required=True)
    p_metrics.add_argument("--threshold", type=float, required=True)
    p_metrics.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

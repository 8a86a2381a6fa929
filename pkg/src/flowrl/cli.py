# cli.py -- command-line front end: compose a config from a file plus flag
# overrides, run the experiment, and write the report files.

import argparse
import sys

from flowrl.harness import (
    ExperimentConfig,
    load_config,
    run_experiment,
    write_report,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="flowrl",
        description=(
            "Flow-table management experiments: train a tabular Q-learning "
            "or DQN agent to place forwarding rules, or run the MBF "
            "baseline / exact placement oracle / parameter-significance "
            "comparison. Flags override the config file; unset values use "
            "the documented defaults."
        ),
    )
    parser.add_argument(
        "--mode",
        choices=["ql", "dqn", "mbf", "oracle", "significance"],
        help="experiment mode (default: ql)",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="experiment seed (default: 0)")
    parser.add_argument(
        "--episodes", type=int, help="episode cap per training run (default: 1000)"
    )
    parser.add_argument(
        "--goal", type=float,
        help="target overhead-reduction fraction in (0, 1) (default: 0.4)",
    )
    parser.add_argument(
        "--table-bits", type=int,
        help="switch table capacity in bits (default: 22784 = 64 entries)",
    )
    parser.add_argument(
        "--out", help="report CSV path (default: report.csv); also writes "
        "<out>.summary and <out>.cfg",
    )
    parser.add_argument(
        "--save-policy", help="write the trained policy (Q-table or network) here"
    )
    parser.add_argument(
        "--load-policy",
        help="start from a saved policy instead of fresh/pre-trained init",
    )
    return parser


def compose_config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.mode is not None:
        cfg.mode = args.mode
    if args.seed is not None:
        cfg.seed = args.seed
    if args.episodes is not None:
        cfg.episodes_cap = args.episodes
    if args.goal is not None:
        cfg.goal_mu = args.goal
    if args.table_bits is not None:
        cfg.table_capacity_bits = args.table_bits
    if args.out is not None:
        cfg.output_path = args.out
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = compose_config(args)
        report = run_experiment(
            cfg, save_policy=args.save_policy, load_policy=args.load_policy
        )
        write_report(report, cfg.output_path)
    except Exception as exc:
        module = type(exc).__module__
        name = type(exc).__name__
        print("error [%s.%s]: %s" % (module, name, exc), file=sys.stderr)
        return 1
    for key, value in report.summary.items():
        print("%s=%s" % (key, value))
    return 0


if __name__ == "__main__":
    sys.exit(main())

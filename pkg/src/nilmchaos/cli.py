"""Command-line entry point: ``nilmchaos {simulate,train,eval,disaggregate,run-all}``.

Exit status is 0 on success, 1 for invalid configuration or input, 2 when the
integration or training diverges numerically.
"""

import argparse
import sys
import time
from pathlib import Path

from . import pipeline

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nilmchaos",
        description="Chaotically switched RLC network simulation and kernel-Adaline "
                    "load disaggregation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, help="TOML config file (defaults if omitted)")
        p.add_argument("--seed", type=float,
                       help=f"chaos seed in (0, 1); overrides ${pipeline.SEED_ENV} and the config")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        return p

    add("simulate", "simulate the network and write the dataset CSV")
    add("train", "train the kernel-Adaline model on the training segment")
    add("eval", "evaluate the model on training and validation segments")
    p = add("disaggregate", "decode per-load states from an RMS current CSV")
    p.add_argument("--model", type=Path, help="model file (default: paths.model_file)")
    p.add_argument("--input", type=Path, help="CSV with an i_rms column (default: paths.dataset_csv)")
    p.add_argument("--output", type=Path, help="per-load state CSV (default: paths.states_csv)")
    add("run-all", "simulate, train and evaluate in one go")
    return parser


def run(args):
    cfg = pipeline.load_config(args.config, seed=args.seed)
    if args.command == "simulate":
        pipeline.cmd_simulate(cfg, args.quiet)
    elif args.command == "train":
        pipeline.cmd_train(cfg, quiet=args.quiet)
    elif args.command == "eval":
        pipeline.cmd_eval(cfg, quiet=args.quiet)
    elif args.command == "disaggregate":
        pipeline.cmd_disaggregate(args.model or cfg.paths.model_file,
                                  args.input or cfg.paths.dataset_csv,
                                  args.output or cfg.paths.states_csv, args.quiet)
    elif args.command == "run-all":
        start = time.perf_counter()
        pipeline.run_all(cfg, args.quiet)
        if not args.quiet:
            print(f"run-all finished in {time.perf_counter() - start:.1f} s")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, IndexError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``sprl [run flags]`` or ``sprl verify``."""
from __future__ import annotations

import argparse
import logging
import sys

from .curriculum import ConfigError
from .data import DataFormatError
from .trainer import METHODS


def _hidden(text: str):
    if text.strip() == "":
        return ()
    try:
        sizes = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--hidden expects comma separated ints, got {text!r}")
    if len(sizes) > 2 or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("--hidden takes 0 to 2 positive layer widths")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sprl", description=(
        "Train classifiers on noisy labels with self-paced resistance learning and baselines. "
        "Run 'sprl verify' for the numeric self-check suite."))
    data = p.add_argument_group("data")
    data.add_argument("--dataset", choices=("blobs", "idx", "csv"), default="blobs")
    data.add_argument("--idx-images")
    data.add_argument("--idx-labels")
    data.add_argument("--limit", type=int)
    data.add_argument("--csv-features")
    data.add_argument("--csv-labels")
    data.add_argument("--blobs-n", type=int, default=2000)
    data.add_argument("--blobs-c", type=int, default=4)
    data.add_argument("--blobs-d", type=int, default=20)
    data.add_argument("--separation", type=float, default=4.0,
                      help="norm of each blob centre (default 4.0)")
    noise = p.add_argument_group("label noise")
    noise.add_argument("--noise", choices=("none", "symmetric", "pair", "model"), default="none")
    noise.add_argument("--rate", type=float, help="flip rate for symmetric / pair noise")
    noise.add_argument("--weak-fraction", type=float, default=0.1,
                       help="labelled fraction used to train the weak model for --noise model")
    train = p.add_argument_group("training")
    train.add_argument("--method", default="sprl",
                       help=f"comma separated list from {{{','.join(METHODS)}}}")
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--t1", type=int, default=20, help="warmup epochs")
    train.add_argument("--k", type=int, default=10, help="number of curriculum increments")
    train.add_argument("--gamma-d", type=float, default=300.0)
    train.add_argument("--m", type=int, help="initial curriculum size (default: from warmup)")
    train.add_argument("--epsilon-known", type=float,
                       help="known noise rate; sets m to 0.65(1-eps)n instead of the warmup count")
    train.add_argument("--batch", type=int, default=128)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--hidden", type=_hidden, default=(256, 256),
                       help="hidden layer widths, e.g. 256,256 or '' for none")
    train.add_argument("--augment-sigma", type=float, default=0.0,
                       help="std of Gaussian feature jitter applied per mini-batch")
    train.add_argument("--seed", type=int, default=0)
    out = p.add_argument_group("output")
    out.add_argument("--val-fraction", type=float, default=0.0,
                     help="carve a noisy validation split and report its best epoch")
    out.add_argument("--out", default="runs")
    out.add_argument("--emit-schedules", action="store_true",
                     help="also write schedule_delta.csv and schedule_gamma.csv")
    out.add_argument("-v", "--verbose", action="store_true")
    return p


def build_verify_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sprl verify",
                                description="Run the numeric property checks; exit 1 on any FAIL.")
    p.add_argument("--skip", action="append", default=[], metavar="NAME",
                   help="skip a named check (repeatable)")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "verify":
        from .verify import verify_suite
        vargs = build_verify_parser().parse_args(argv[1:])
        results = verify_suite(skip=tuple(vargs.skip))
        return 0 if all(r.passed for r in results) else 1
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .experiment import run_experiment
    try:
        run_experiment(args)
    except (ConfigError, DataFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0

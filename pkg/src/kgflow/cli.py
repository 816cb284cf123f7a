"""Command-line interface.

Subcommands: spectrum, flow, rf-sgd, augment-check, stepsize, replay.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .basis import BasisError
from .config import ConfigError, load_config
from .data import DataError
from .flow import FlowError
from .kernels import KernelError, build_dot_kernel, resolve_activation, spectrum_table
from .oracle import OracleError
from .rfsgd import SGDDivergence, SGDError

_NUMERICAL_ERRORS = (
    BasisError,
    DataError,
    FlowError,
    KernelError,
    OracleError,
    SGDError,
    SGDDivergence,
    np.linalg.LinAlgError,
)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value configuration file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a single configuration key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgflow",
        description="Kernel gradient-flow learning curves on the sphere",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="print a kernel's per-degree spectrum")
    p.add_argument("--activation", default="relu")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--K", type=int, default=30)
    p.add_argument("--output", help="write the table here instead of stdout")

    p = sub.add_parser("flow", help="gradient-flow learning-curve experiment")
    _add_config_args(p)

    p = sub.add_parser("rf-sgd", help="random-feature SGD experiment (both worlds)")
    _add_config_args(p)

    p = sub.add_parser(
        "augment-check",
        help="verify the invariant-kernel / data-augmentation equivalence",
    )
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--activation", default="relu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--times", type=int, default=10, help="log-spaced time points")

    p = sub.add_parser("stepsize", help="lambda_max report and step-size rule")
    p.add_argument("--activation", default="relu")
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("replay", help="re-run the experiment echoed in a CSV")
    p.add_argument("csv", help="output CSV produced by flow or rf-sgd")
    return parser


def _cmd_spectrum(args) -> int:
    spec = build_dot_kernel(resolve_activation(args.activation), args.d, args.K)
    table = spectrum_table(spec)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return 0


def _cmd_flow(args) -> int:
    from .experiments import run_flow_experiment

    cfg = load_config(args.config, args.set)
    run_flow_experiment(cfg)
    print(f"wrote {cfg.output}.csv, {cfg.output}.svg, {cfg.output}_zoom.svg")
    return 0


def _cmd_rf(args) -> int:
    from .experiments import run_rf_experiment

    cfg = load_config(args.config, args.set)
    run_rf_experiment(cfg)
    print(f"wrote {cfg.output}.csv, {cfg.output}.svg")
    return 0


def _cmd_augment(args) -> int:
    from .experiments import augment_check

    report = augment_check(
        args.d,
        args.n,
        args.activation,
        np.logspace(-1, 3, args.times),
        args.seed,
    )
    print(f"augmentation equivalence check: d={report.d} n={report.n}")
    print(f"{'t':>12} {'max |f_inv - f_aug|':>22}")
    for t, disc in zip(report.times, report.discrepancy):
        print(f"{t:>12.6g} {disc:>22.6e}")
    print(f"max discrepancy: {report.max_discrepancy:.6e}")
    return 0


def _cmd_stepsize(args) -> int:
    from .experiments import stepsize_report

    rep = stepsize_report(args.activation, args.d, args.n, args.seed)
    print(f"step-size report: d={rep.d} n={rep.n}")
    print(f"lambda_max(H_dot/n)    = {rep.lambda_max_dot:.6e}")
    print(f"lambda_max(H_cyc/n)    = {rep.lambda_max_cyclic:.6e}")
    if rep.lambda_max_augmented is not None:
        print(f"lambda_max(H_aug/n)    = {rep.lambda_max_augmented:.6e}")
        print(f"aug/dot ratio          = {rep.aug_ratio:.4f}  (expected ~ d = {rep.d})")
    print(f"recommended eta (dot)    = {rep.eta_dot:.6e}")
    print(f"recommended eta (cyclic) = {rep.eta_cyclic:.6e}")
    return 0


def _cmd_replay(args) -> int:
    from .experiments import replay

    out = replay(args.csv)
    print(f"replayed -> {out}")
    return 0


_COMMANDS = {
    "spectrum": _cmd_spectrum,
    "flow": _cmd_flow,
    "rf-sgd": _cmd_rf,
    "augment-check": _cmd_augment,
    "stepsize": _cmd_stepsize,
    "replay": _cmd_replay,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    nmptf example 1 --mode nudft
    nmptf sweep --example 2 --samples 120 --trials 100 -o sweep.txt
    nmptf decompose signal.csv -o result.txt
    nmptf rip-probe --grid 2048 --n-basis 32 --phase example1

Exit status: 0 on success, 1 on usage or configuration errors, 2 when the
computation itself fails. Errors are reported on one stderr line as
``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import NmpError
from .experiments import ExperimentConfig, run_experiment


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("-o", "--output", help="report path; tables go next to it")
    p.add_argument("--grid", type=int, help="uniform grid size N_f")
    p.add_argument("--seed", type=int)
    p.add_argument("--M0", type=int, help="phase update band limit")
    p.add_argument("--eps0", type=float, help="stop when the phase step 2-norm falls below")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--mode", dest="transform_mode", choices=("nudft", "fft_interp"))
    p.add_argument("--n-basis", type=int, dest="n_basis", help="basis size N_b")
    p.add_argument("--bp-tol", type=float, dest="bp_tol", help="basis pursuit residual bound")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmptf", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="decompose a t,f CSV on a uniform grid")
    p.add_argument("input")
    _common(p)

    p = sub.add_parser("example", help="run benchmark example 1, 2 or 3")
    p.add_argument("example_id", type=int, choices=(1, 2, 3))
    p.add_argument("--samples", type=int)
    _common(p)

    p = sub.add_parser("sweep", help="success rate of the sparse solver over seeded trials")
    p.add_argument("--example", type=int, choices=(2, 3), default=None)
    p.add_argument("--samples", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--threshold", type=float, help="relative phase error counted as success")
    p.add_argument("--workers", type=int, help="parallel trial processes")
    _common(p)

    p = sub.add_parser("rip-probe", help="coherence and restricted isometry estimates")
    p.add_argument("--phase", dest="rip_phase", choices=("linear", "example1", "example2"))
    p.add_argument("--sparsity", type=int)
    p.add_argument("--trials", type=int)
    _common(p)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if args.config else None
    over = {k: v for k, v in vars(args).items()
            if k not in ("command", "config", "verbose", "example_id")}
    if args.command == "decompose":
        over["kind"] = "decompose-file"
    elif args.command == "example":
        over["kind"] = f"example{args.example_id}"
        over["example"] = args.example_id
    elif args.command == "sweep":
        over["kind"] = "success-sweep"
        if over.get("example") is None and (base is None or base.example == 1):
            over["example"] = 2
    else:
        over["kind"] = "rip-probe"
    if base is None:
        return ExperimentConfig(**{k: v for k, v in over.items() if v is not None})
    return base.with_overrides(**over)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config_from_args(args)
        cfg.validate()
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except NmpError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 1
    try:
        report = run_experiment(cfg)
    except NmpError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return 2
    if cfg.output:
        print(f"report written to {cfg.output}")
    else:
        sys.stdout.write(report.text())
    return 0

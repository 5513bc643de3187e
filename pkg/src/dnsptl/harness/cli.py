"""Command line entry point: ``dnsptl <stage> [--config F] [--seed N] [--scale small|paper] [--out DIR]``.

Exit codes: 0 success, 1 usage or config error, 2 missing prerequisite,
3 numerical failure (divergence, failed gradient check, undefined metric).
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, ContainerError, DependencyError, InputError, MetricError, TrainingError
from .experiment import STAGES, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DEPENDENCY, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config (defaults reproduce the full-size setup)")
    common.add_argument("--seed", type=int, help="overrides [training] seed")
    common.add_argument("--scale", choices=("small", "paper"), help="network and problem size preset")
    common.add_argument("--out", default="out", help="results directory (default: %(default)s)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="dnsptl", description="DNSP OFDM channel estimation with a transfer-learned ReCNN")
    sub = parser.add_subparsers(dest="stage", metavar="stage", parser_class=_Parser)
    sub.required = True
    helps = {
        "gen-data": "simulate source, target and evaluation datasets",
        "pretrain": "train the network on source data",
        "finetune": "freeze the conv stack and adapt the dense layers on target data",
        "eval": "NMSE of LS, LMMSE, no-transfer and fine-tuned estimators",
        "baselines": "classical NMSE sweeps over pilot count and pilot power",
        "ber": "bit error rate per estimator and equalizer",
        "grad-check": "finite-difference check of the small network",
        "report": "merge all tables into tables/summary.*",
    }
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=helps[stage])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run_experiment(args.config, [args.stage], out=args.out, scale=args.scale, seed=args.seed)
    except (ConfigError, InputError) as exc:
        print(f"dnsptl: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DependencyError, ContainerError) as exc:
        print(f"dnsptl: missing or unreadable prerequisite: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (TrainingError, MetricError, FloatingPointError) as exc:
        print(f"dnsptl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""``scripsim <mode> --config <path.json> --seed <u64> --out <dir>``.

Exit status: 0 on success, 2 when the config does not validate, 3 when a
numerical self-check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import NumericalError, SpecError
from .experiments import MODES, ExperimentConfig, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("scripsim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scripsim", description="Scrip economy simulation and equilibrium analysis.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, type=Path, help="JSON experiment config")
    p.add_argument("--seed", required=True, type=_u64)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--metric", choices=("l2", "l2_squared"), help="override the config's distance metric")
    p.add_argument("--workers", type=int, help="parallel replica processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        data = json.loads(args.config.read_text())
        if isinstance(data, dict):
            if args.metric:
                data["metric"] = args.metric
            if args.workers:
                data["workers"] = args.workers
        cfg = ExperimentConfig.from_dict(data, mode=args.mode, seed=args.seed, out_dir=args.out)
    except (OSError, json.JSONDecodeError, SpecError) as e:
        print(f"scripsim: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        files = run(cfg)
    except NumericalError as e:
        print(f"scripsim: numerical check failed: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SpecError as e:
        print(f"scripsim: invalid input: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for name in sorted(files):
        print(args.out / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

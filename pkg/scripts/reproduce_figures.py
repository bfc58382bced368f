#!/usr/bin/env python3
"""Regenerate the three convergence experiments into one directory.

    python3 scripts/reproduce_figures.py --out results/ --seed 0
"""

import argparse
import sys
from pathlib import Path

from scripsim.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", choices=("fig2", "fig3", "fig4"))
    args = ap.parse_args()
    for mode in ("fig2", "fig3", "fig4"):
        if args.only and mode != args.only:
            continue
        cfg = ROOT / "configs" / f"{mode}.json"
        code = cli_main([mode, "--config", str(cfg), "--seed", str(args.seed), "--out", str(args.out / mode)])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())

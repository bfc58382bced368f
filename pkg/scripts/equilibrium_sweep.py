#!/usr/bin/env python3
"""Greatest equilibrium threshold of a single-type economy across discount factors and costs.

Prints a CSV: alpha, delta, k_star, classification.
"""

import argparse
import csv
import sys

import numpy as np

from scripsim import AgentType, build_game_spec, greatest_equilibrium


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", default="2")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--deltas", type=float, nargs="+", default=list(np.round(np.linspace(0.05, 0.99, 12), 3)))
    args = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["alpha", "delta", "k_star", "classification"])
    for a in args.alphas:
        for d in args.deltas:
            spec = build_game_spec([AgentType(alpha=a, beta=1.0, gamma=1.0, delta=float(d))], [1], 1, args.m, args.n)
            res = greatest_equilibrium(spec)
            w.writerow([a, d, res.thresholds[0], res.classification])


if __name__ == "__main__":
    main()

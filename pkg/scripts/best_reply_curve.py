#!/usr/bin/env python3
"""Best reply of a single-type economy to every common threshold k = 1..K.

Useful for spotting multiple fixed points.  Prints k, BR(k).
"""

import argparse

from scripsim import AgentType, build_game_spec
from scripsim.equilibrium import best_reply_vector


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.95)
    ap.add_argument("--m", default="2")
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--kmax", type=int, default=40)
    args = ap.parse_args()
    spec = build_game_spec([AgentType(alpha=args.alpha, beta=1.0, gamma=1.0, delta=args.delta)], [1], 1, args.m, args.n)
    print("k,best_reply")
    for k in range(0, args.kmax + 1):
        print(f"{k},{best_reply_vector(spec, (k,))[0][0]}")


if __name__ == "__main__":
    main()

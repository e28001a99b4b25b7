"""Repeats a transition memory needs before a cycle of disjoint SDRs stops bursting.

The A,B and cycle budgets in the tests are twice the largest count printed here.
"""

import argparse

import numpy as np

from dynhtm.sdr import SDR, TMConfig, TransitionMemory


def last_anomalous_repeat(length, seed, repeats):
    perm = np.random.default_rng(seed).permutation(2048)
    seq = [SDR(2048, frozenset(perm[i * 40 : (i + 1) * 40].tolist())) for i in range(length)]
    # seed 0 is the default memory seed
    tm = TransitionMemory(TMConfig(seed=42 + seed))
    last = None
    for rep in range(repeats):
        if max(tm.step(s).anomaly for s in seq) > 0:
            last = rep
    return last


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lengths", type=int, nargs="+", default=[2, 3, 5, 10])
    parser.add_argument("--seeds", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=400)
    args = parser.parse_args()
    for length in args.lengths:
        counts = [last_anomalous_repeat(length, s, args.repeats) for s in range(args.seeds)]
        print(f"cycle length {length:2d}: last anomalous repeat per seed {counts}")


if __name__ == "__main__":
    main()

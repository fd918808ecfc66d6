"""Analytic and simulated SNR of deterministic versus Poissonian sources.

Prints a table for a few detector efficiencies and checks each analytic
value against a quick simulation of single-pixel counts.

    python scripts/snr_curves.py --frames 20000 --csv snr.csv
"""

import argparse
import csv
import math

import numpy as np

from ionscope.source import DetectorSpec, Deterministic, Poissonian, make_rng, sample_counts, snr_curve


def simulated(source, a, frames, seed):
    _, _, det = sample_counts(source, DetectorSpec(a), np.ones(frames), make_rng(*seed))
    sd = det.std(ddof=1)
    return det.mean() / sd if sd > 0 else math.inf


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--efficiencies", type=float, nargs="+", default=[0.5, 0.8, 0.9, 0.96, 0.99])
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 4, 10])
    ap.add_argument("--frames", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the analytic rows here")
    args = ap.parse_args(argv)

    det = snr_curve("deterministic", args.efficiencies, args.n)
    poi = snr_curve("poissonian", args.efficiencies, args.n)
    print(f"{'a':>5} {'n':>4} {'det':>9} {'det(sim)':>9} {'poisson':>9} {'poi(sim)':>9} {'gain':>6}")
    for k, (d, p) in enumerate(zip(det, poi)):
        a, n = d["a"], d["n"]
        ds = simulated(Deterministic(n), a, args.frames, (args.seed, 2 * k))
        ps = simulated(Poissonian(float(n)), a, args.frames, (args.seed, 2 * k + 1))
        print(f"{a:5.2f} {n:4d} {d['snr']:9.4f} {ds:9.4f} {p['snr']:9.4f} {ps:9.4f} {d['snr'] / p['snr']:6.2f}")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(det[0]))
            w.writeheader()
            w.writerows(det + poi)


if __name__ == "__main__":
    main()

"""Adaptive knife-edge profiling versus an evenly spaced scan.

Runs the adaptive loop from a profile-edge config, then spends the same
number of probes on an evenly spaced sweep of the design window and
conditions the same prior on that data.  Prints the posterior for both
and a text histogram of where the adaptive run chose to probe.

    python scripts/edge_demo.py configs/edge_profile.json --seeds 5 --set stop.max_probes=300
"""

import argparse
import json

import numpy as np

from ionscope import config as C
from ionscope.design import run_experiment
from ionscope.estimation import Dataset
from ionscope.grid import condition, summarize


def sweep(cfg, model, n, seed):
    """Evenly spaced designs in a shuffled order, same simulated sample."""
    window = C.build_window(cfg)
    truth = C.build_truth(cfg, model)
    rng = np.random.default_rng(seed)
    xis = rng.permutation(np.linspace(window.lo[0], window.hi[0], n))
    ys = np.array([truth(float(x), rng) for x in xis])
    return Dataset(xis, ys)


def histogram(xs, lo, hi, bins=20, width=50):
    counts, edges = np.histogram(xs, bins=bins, range=(lo, hi))
    for c, a, b in zip(counts, edges, edges[1:]):
        print(f"  [{a:7.1f}, {b:7.1f})  {'#' * int(round(width * c / counts.max()))} {c}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--set", action="append", default=[], metavar="PATH=VALUE")
    args = ap.parse_args(argv)

    raw = json.loads(open(args.config).read())
    cfg = C.resolve(raw, "profile-edge", args.set)
    problems = C.validate(cfg)
    if problems:
        raise SystemExit("\n".join(f"{v.path}: {v.message}" for v in problems))
    model, prior = C.build_model(cfg), C.build_prior(cfg)
    window, stop = C.build_window(cfg), C.build_stop(cfg)

    print(f"truth: x0={cfg['truth']['x0']}  sigma={cfg['truth']['sigma']}  a={cfg['detector']['efficiency']}")
    designs = []
    for seed in range(args.seeds):
        grid, log = run_experiment(prior, model, window, stop, C.build_truth(cfg, model), seed)
        n = len(log.records)
        designs.extend(r["xi"][0] for r in log.records)
        ad = summarize(grid)
        ev = summarize(condition(prior, model, sweep(cfg, model, n, seed + 10_000)))
        print(f"seed {seed}: {n} probes")
        for name in grid.names:
            (m1, s1), (m2, s2) = ad[name], ev[name]
            print(f"  {name:6s} adaptive {m1:9.4f} +- {s1:7.4f}   sweep {m2:9.4f} +- {s2:7.4f}")

    print("adaptive design positions (all seeds):")
    histogram(designs, window.lo[0], window.hi[0])


if __name__ == "__main__":
    main()

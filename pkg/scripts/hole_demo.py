"""Locating a hole with adaptive probes.

Runs locate-hole from a config for a few seeds, each with its own true
centre drawn from the position prior, and prints how the posterior
standard deviations shrink with the number of probes.

    python scripts/hole_demo.py configs/hole_locate.json --seeds 3
"""

import argparse
import json

import numpy as np

from ionscope import config as C
from ionscope.design import run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--every", type=int, default=50, help="print the trajectory every this many probes")
    ap.add_argument("--set", action="append", default=[], metavar="PATH=VALUE")
    args = ap.parse_args(argv)

    raw = json.loads(open(args.config).read())
    base = C.resolve(raw, "locate-hole", args.set)
    for seed in range(args.seeds):
        centre = np.clip(np.random.default_rng([seed, 99]).normal(0.0, 10.0, 2), -25, 25)
        cfg = C.resolve(C.echo(base), "locate-hole", [f"truth.cx={centre[0]}", f"truth.cy={centre[1]}"])
        problems = C.validate(cfg)
        if problems:
            raise SystemExit("\n".join(f"{v.path}: {v.message}" for v in problems))
        model = C.build_model(cfg)
        grid, log = run_experiment(C.build_prior(cfg), model, C.build_window(cfg), C.build_stop(cfg),
                                   C.build_truth(cfg, model), seed)
        print(f"seed {seed}: true centre ({centre[0]:.2f}, {centre[1]:.2f}), radius {cfg['truth']['radius']}")
        print(f"  {'probe':>5} {'cx':>16} {'cy':>16} {'radius':>16}  {'u':>6}")
        for r in log.records:
            if r["i"] % args.every == 0 or r["i"] == len(log.records):
                cols = "".join(f" {m:8.2f} +-{s:5.2f}" for m, s in zip(r["mean"], r["std"]))
                print(f"  {r['i']:5d}{cols}  {r['u']:6.3f}")


if __name__ == "__main__":
    main()

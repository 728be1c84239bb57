"""Fitted decay slope of random p=2 sections against the predicted rate, over a lambda grid.

    python scripts/decay_sweep.py [--m 512] [--trials 30] [--out results]
"""

import argparse
from pathlib import Path

from ellipsec.experiments import ExperimentConfig, Table, run_decay


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", default="2")
    ap.add_argument("--lambdas", default="0.25,0.5,0.75,1,1.5,2")
    ap.add_argument("--n", default="8,16,32,64")
    ap.add_argument("--m", type=int, default=512)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    table = Table("decay_sweep", ("p", "lambda", "slope", "predicted", "constant"))
    for lam in args.lambdas.split(","):
        cfg = ExperimentConfig.from_mapping(
            {"p": args.p, "lambda": lam, "n": args.n, "m": str(args.m), "trials": str(args.trials), "seed": str(args.seed)}
        )
        res = run_decay(cfg, args.threads)
        pred = None if res.predicted_slope is None else -res.predicted_slope
        table.add(p=cfg.p, **{"lambda": cfg.lam}, slope=res.slope, predicted=pred, constant=res.constant)
        print(f"lambda={cfg.lam:<5g} slope={res.slope:+.3f} predicted={'n/a' if pred is None else f'{pred:+.3f}'}")
    print(table.write(Path(args.out)))


if __name__ == "__main__":
    main()

"""Noiseless success-rate sweep over Gaussian and DCT ensembles.

    python3 scripts/noiseless_sweep.py --out runs/noiseless --trials 20
"""

import argparse
from pathlib import Path

from ratiosparse.bench import ExperimentSpec, aggregate, run_sweep, write_tables

FAMILIES = {"gaussian": (0.1, 0.2, 0.3), "oversampled_dct": (1.0, 5.0, 10.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/noiseless")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    for family, params in FAMILIES.items():
        spec = ExperimentSpec(name=f"noiseless_{family}", family=family, params=params,
                              sparsities=tuple(range(2, 31, 2)), trials=args.trials, seed=args.seed)
        records = run_sweep(spec, threads=args.threads)
        write_tables(Path(args.out) / family, spec, records)
        for row in aggregate(records).rates:
            print(f"{family} param={row['param']:g} s={row['sparsity']:2d} "
                  f"{row['method']:<14} success={row['success_rate']:.2f}")


if __name__ == "__main__":
    main()

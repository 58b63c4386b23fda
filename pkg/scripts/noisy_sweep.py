"""Noisy DCT sweep reporting mean ranks and head-to-head wins.

    python3 scripts/noisy_sweep.py --snr 50 --out runs/noisy
"""

import argparse

from ratiosparse.bench import ExperimentSpec, aggregate, run_sweep, write_tables


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/noisy")
    ap.add_argument("--snr", type=float, default=50.0)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    spec = ExperimentSpec(name="noisy_dct", family="oversampled_dct", params=(5.0, 10.0, 15.0),
                          sparsities=(5, 10, 15, 20), noise_db=args.snr, trials=args.trials, seed=args.seed)
    records = run_sweep(spec, threads=args.threads)
    write_tables(args.out, spec, records)
    summary = aggregate(records)
    for row in summary.ranks:
        print(f"F={row['param']:g} s={row['sparsity']:2d} {row['method']:<14} mean rank {row['mean_rank']:.2f}")
    for row in summary.wins:
        label = "total" if row["competitor"] == "half_over_two" else f"vs {row['competitor']}"
        print(f"F={row['param']:g} s={row['sparsity']:2d} {label:<17} {row['proposed_wins']} wins "
              f"over {row['trials']} trials")


if __name__ == "__main__":
    main()

"""Scan the toy solution line and write the three penalty curves to CSV."""

import argparse
import csv

import numpy as np

from ratiosparse.analysis import toy_example_scan, toy_nonzeros


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="toy.csv")
    ap.add_argument("--lo", type=float, default=-15.0)
    ap.add_argument("--hi", type=float, default=25.0)
    ap.add_argument("--step", type=float, default=0.01)
    args = ap.parse_args()

    count = int(round((args.hi - args.lo) / args.step)) + 1
    scan = toy_example_scan(np.round(args.lo + args.step * np.arange(count), 12))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma", "ratio", "l1", "l1_minus_l2"])
        w.writerows(zip(scan.sigma, scan.ratio, scan.l1, scan.l1_minus_l2))
    print(f"best sigma = {scan.best_sigma:g} with {toy_nonzeros(scan.best_sigma)} nonzeros")


if __name__ == "__main__":
    main()

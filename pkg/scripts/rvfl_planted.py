"""Compare ridge and sparse RVFL readouts on planted regression data."""

import argparse

from ratiosparse.rvfl import (
    RvflModel,
    count_active,
    cross_validate,
    default_lambda_grid,
    evaluate_mse,
    planted_dataset,
    train,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--N", type=int, default=200)
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--L", type=int, default=50)
    ap.add_argument("--solvers", default="ridge,l1,half_over_two")
    args = ap.parse_args()

    grid = default_lambda_grid()
    for rep in range(args.reps):
        ds, model, _ = planted_dataset(N=args.N, d=args.d, L=args.L, seed=rep)
        Xtr, Ytr = ds.train()
        Xte, Yte = ds.test()
        for solver in args.solvers.split(","):
            lam, _ = cross_validate(Xtr, Ytr, model, grid, solver, folds=3, seed=rep)
            fitted = train(Xtr, Ytr, RvflModel.create(args.d, args.L, seed=rep), lam, solver)
            print(f"rep={rep} {solver:<14} lambda={lam:.1e} test_mse={evaluate_mse(fitted, Xte, Yte):.4e} "
                  f"active={count_active(fitted.beta)}")


if __name__ == "__main__":
    main()

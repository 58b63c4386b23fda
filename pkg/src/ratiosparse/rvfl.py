"""Random vector functional link (RVFL) regression with sparse output weights.

The hidden layer ``a(X W + b)`` is drawn once and frozen; only the output
weights ``beta`` over ``H = [a(X W + b) | X]`` are trained, by minimising

    ||H beta - y||^2 + lam * R(beta)

per target column. Inputs are standardised and ``H`` and the targets centred
on the training split, so the fitted model carries an explicit intercept.
The penalised problems are handed to solvers written for
``zeta * R + 1/2 ||.||^2``, hence ``zeta = lam / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import BaselineConfig, solve_irls_lp, solve_l1, solve_l1_minus_l2_dca
from .core import ProblemInstance, SolverConfig
from .gen import rng_for
from .solver import admm_solve, sufficient_descent_rho

SOLVERS = ("ridge", "l1", "l1_minus_l2", "irls_lp", "half_over_two")
ACTIVATIONS = ("sigmoid", "relu")
EXPORT_HEADER = "rvfl-model v1"


def default_lambda_grid() -> np.ndarray:
    return np.logspace(-6, 1, 15)


def _activate(Z, activation):
    if activation == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * Z))  # overflow-free logistic
    return np.maximum(Z, 0.0)


@dataclass
class RvflModel:
    """Frozen random hidden layer plus the fitted output layer.

    ``W`` (d x L) and ``b_hidden`` (L,) are drawn from U(-1, 1) by
    :meth:`create`. The remaining fields are filled in by :func:`train`.
    """

    W: np.ndarray
    b_hidden: np.ndarray
    activation: str = "sigmoid"
    seed: int = 0
    x_mean: Optional[np.ndarray] = None
    x_scale: Optional[np.ndarray] = None
    h_mean: Optional[np.ndarray] = None
    y_mean: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None  # (L + d) x m
    lam: Optional[float] = None
    solver: Optional[str] = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.W = np.asarray(self.W, dtype=float).reshape(self.W.shape[0], -1)
        self.b_hidden = np.asarray(self.b_hidden, dtype=float).ravel()
        if self.b_hidden.shape != (self.W.shape[1],):
            raise ValueError("b_hidden must have one entry per hidden node")
        self.W.setflags(write=False)
        self.b_hidden.setflags(write=False)

    @classmethod
    def create(cls, d: int, L: int = 100, activation: str = "sigmoid", seed: int = 0) -> "RvflModel":
        if d < 1 or L < 0:
            raise ValueError("need d >= 1 and L >= 0")
        rng = rng_for(seed, 0x52564)
        W = rng.uniform(-1.0, 1.0, size=(d, L))
        b = rng.uniform(-1.0, 1.0, size=L)
        return cls(W, b, activation, seed)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def L(self) -> int:
        return self.W.shape[1]

    @property
    def fitted(self) -> bool:
        return self.beta is not None

    def standardize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.x_mean is None:
            return X
        return (X - self.x_mean) / self.x_scale

    def predict(self, X) -> np.ndarray:
        if not self.fitted:
            raise RuntimeError("model is not trained")
        H = build_features(self.standardize(X), self) - self.h_mean
        return H @ self.beta + self.y_mean


def build_features(X, model: RvflModel) -> np.ndarray:
    """``[a(X W + b) | X]``, an N x (L + d) matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise ValueError(f"X has {X.shape[1]} columns, the model expects {model.d}")
    hidden = _activate(X @ model.W + model.b_hidden, model.activation)
    return np.hstack([hidden, X])


# ------------------------------------------------------------------ data


@dataclass
class Dataset:
    """Features ``X`` (N x d), targets ``Y`` (N x m) and a train/test split."""

    X: np.ndarray
    Y: np.ndarray
    train_idx: np.ndarray = field(default=None)
    test_idx: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        self.Y = Y.reshape(-1, 1) if Y.ndim == 1 else Y
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        N = self.X.shape[0]
        if self.train_idx is None:
            self.train_idx = np.arange(N)
        if self.test_idx is None:
            self.test_idx = np.zeros(0, dtype=int)
        self.train_idx = np.asarray(self.train_idx, dtype=int)
        self.test_idx = np.asarray(self.test_idx, dtype=int)
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test rows overlap")

    @property
    def N(self) -> int:
        return self.X.shape[0]

    def split(self, test_fraction: float = 0.25, seed: int = 0) -> "Dataset":
        if not 0 < test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        perm = rng_for(seed, 0x5B17).permutation(self.N)
        n_test = max(1, int(round(test_fraction * self.N)))
        return Dataset(self.X, self.Y, np.sort(perm[n_test:]), np.sort(perm[:n_test]))

    def train(self):
        return self.X[self.train_idx], self.Y[self.train_idx]

    def test(self):
        return self.X[self.test_idx], self.Y[self.test_idx]


def kfold_indices(n_rows: int, folds: int, seed: int = 0):
    """``folds`` disjoint (train, validation) index pairs covering ``range(n_rows)``."""
    if n_rows < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold CV, got {n_rows}")
    perm = rng_for(seed, 0xC5).permutation(n_rows)
    parts = np.array_split(perm, folds)
    return [
        (np.sort(np.concatenate([parts[j] for j in range(folds) if j != i])), np.sort(parts[i]))
        for i in range(folds)
    ]


def load_csv_dataset(path, n_targets: int = 1) -> Dataset:
    """CSV with a header row; the last ``n_targets`` columns are targets."""
    path = Path(path)
    if n_targets < 1:
        raise ValueError("n_targets must be positive")
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        width = len(header)
        if width <= n_targets:
            raise ValueError(f"{path}: {width} columns leave no features for {n_targets} target(s)")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite cell")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    return Dataset(data[:, :-n_targets], data[:, -n_targets:])


# ------------------------------------------------------------------ training


def _solve_column(H, y, lam, solver):
    n = H.shape[1]
    if lam == 0:
        return np.linalg.lstsq(H, y, rcond=None)[0]
    if solver == "ridge":
        return np.linalg.solve(H.T @ H + lam * np.eye(n), H.T @ y)
    zeta = lam / 2.0
    inst = ProblemInstance(H, y)
    cfg = BaselineConfig()
    if solver == "l1":
        return solve_l1(inst, zeta, cfg).x
    if solver == "irls_lp":
        return solve_irls_lp(inst, 0.5, cfg, lam=zeta).x
    x_dca = solve_l1_minus_l2_dca(inst, zeta, cfg, x0=solve_l1(inst, zeta, cfg).x).x
    if solver == "l1_minus_l2":
        return x_dca
    # Tall, strongly scaled H: a unit penalty is far below the curvature of the
    # fit term, so sit just above the sufficient-descent threshold instead.
    rho = 1.01 * sufficient_descent_rho(H)
    return admm_solve(inst, SolverConfig(zeta=zeta, rho0=rho, gamma0=rho), x0=x_dca).x


def train(X, Y, model: RvflModel, lam: float, solver: str = "half_over_two") -> RvflModel:
    """Fit the output weights in place and return the model."""
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {list(SOLVERS)}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError("lam must be finite and non-negative")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    Y = Y.reshape(-1, 1) if Y.ndim == 1 else Y
    if X.shape[0] != Y.shape[0] or X.shape[0] == 0:
        raise ValueError("X and Y need the same, nonzero number of rows")
    model.x_mean = X.mean(axis=0)
    sd = X.std(axis=0)
    model.x_scale = np.where(sd > 0, sd, 1.0)
    H = build_features(model.standardize(X), model)
    model.h_mean = H.mean(axis=0)
    model.y_mean = Y.mean(axis=0)
    Hc, Yc = H - model.h_mean, Y - model.y_mean
    beta = np.column_stack([_solve_column(Hc, Yc[:, j], lam, solver) for j in range(Y.shape[1])])
    if not np.all(np.isfinite(beta)):
        raise RuntimeError(f"{solver} produced non-finite output weights")
    model.beta, model.lam, model.solver = beta, float(lam), solver
    return model


def evaluate_mse(model: RvflModel, X_test, Y_test) -> float:
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    Y_test = np.asarray(Y_test, dtype=float)
    Y_test = Y_test.reshape(-1, 1) if Y_test.ndim == 1 else Y_test
    if X_test.shape[0] == 0:
        raise ValueError("empty test set")
    P = model.predict(X_test)
    if P.shape != Y_test.shape:
        raise ValueError(f"prediction shape {P.shape} does not match targets {Y_test.shape}")
    return float(np.mean((P - Y_test) ** 2))


def _clone(model: RvflModel) -> RvflModel:
    return RvflModel(model.W, model.b_hidden, model.activation, model.seed)


def cross_validate(
    X, Y, model: RvflModel, lambda_grid: Sequence[float], solver: str = "half_over_two",
    folds: int = 3, seed: int = 0,
) -> tuple:
    """Pick lam by mean validation MSE over ``folds`` folds.

    Returns ``(best_lam, {lam: mean_mse})``. Duplicate grid entries are
    merged and ties go to the smaller lam.
    """
    grid = sorted({float(v) for v in lambda_grid})
    if not grid:
        raise ValueError("lambda grid is empty")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    splits = kfold_indices(X.shape[0], folds, seed)
    scores = {}
    for lam in grid:
        errs = []
        for tr, va in splits:
            m = train(X[tr], Y[tr], _clone(model), lam, solver)
            errs.append(evaluate_mse(m, X[va], Y[va]))
        scores[lam] = float(np.mean(errs))
    best = min(grid, key=lambda lam: (scores[lam], lam))
    return best, scores


def count_active(beta, tol: float = 1e-6) -> int:
    return int(np.sum(np.abs(np.asarray(beta)) > tol))


# ------------------------------------------------------------------ export


def export_model(model: RvflModel) -> str:
    if not model.fitted:
        raise RuntimeError("model is not trained")
    row = lambda v: " ".join(repr(float(x)) for x in np.ravel(v))
    lines = [
        EXPORT_HEADER,
        f"activation {model.activation}",
        f"seed {model.seed}",
        f"solver {model.solver}",
        f"lambda {model.lam!r}",
        f"shape d={model.d} L={model.L} m={model.beta.shape[1]}",
        "W " + row(model.W),
        "b_hidden " + row(model.b_hidden),
        "x_mean " + row(model.x_mean),
        "x_scale " + row(model.x_scale),
        "h_mean " + row(model.h_mean),
        "y_mean " + row(model.y_mean),
        "beta " + row(model.beta),
    ]
    return "\n".join(lines) + "\n"


def import_model(text: str) -> RvflModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != EXPORT_HEADER:
        raise ValueError(f"not an RVFL model export (expected header {EXPORT_HEADER!r})")
    kv = {}
    for ln in lines[1:]:
        if ln.strip():
            key, _, val = ln.partition(" ")
            kv[key] = val.strip()
    dims = dict(tok.split("=") for tok in kv["shape"].split())
    d, L, m = int(dims["d"]), int(dims["L"]), int(dims["m"])
    vec = lambda key: np.array([float(t) for t in kv[key].split()]) if kv.get(key) else np.zeros(0)
    model = RvflModel(vec("W").reshape(d, L), vec("b_hidden"), kv["activation"], int(kv["seed"]))
    model.x_mean, model.x_scale = vec("x_mean"), vec("x_scale")
    model.h_mean, model.y_mean = vec("h_mean"), vec("y_mean")
    model.beta = vec("beta").reshape(L + d, m)
    model.solver, model.lam = kv["solver"], float(kv["lambda"])
    return model


# ------------------------------------------------------------------ synthetic data


def planted_dataset(
    N: int = 200, d: int = 10, L: int = 50, n_active: int = 6, noise: float = 0.1,
    activation: str = "sigmoid", seed: int = 0, test_fraction: float = 0.25,
):
    """Targets generated by a sparse output layer over a random RVFL feature map.

    Returns ``(dataset, model, beta0)``; ``model`` has the same hidden layer
    as the generator, and ``beta0`` is the planted weight vector over
    ``[hidden | X]`` of standard-normal inputs.
    """
    rng = rng_for(seed, 0x91A)
    model = RvflModel.create(d, L, activation, seed)
    X = rng.standard_normal((N, d))
    H = build_features(X, model)
    beta0 = np.zeros(L + d)
    idx = rng.choice(L + d, size=n_active, replace=False)
    beta0[idx] = rng.choice([-1.0, 1.0], size=n_active) * rng.uniform(1.0, 3.0, size=n_active)
    y = H @ beta0
    y = y + noise * float(np.std(y)) * rng.standard_normal(N)
    return Dataset(X, y).split(test_fraction, seed), model, beta0

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratiosparse.rvfl import (
    Dataset,
    RvflModel,
    build_features,
    count_active,
    cross_validate,
    default_lambda_grid,
    evaluate_mse,
    export_model,
    import_model,
    kfold_indices,
    load_csv_dataset,
    planted_dataset,
    train,
)


def standardised(X):
    return (X - X.mean(axis=0)) / X.std(axis=0)


def planted_exact(N=120, d=5, L=20, seed=0, noise=0.0):
    """Data whose inputs are already standardised, so training sees the planted H."""
    rng = np.random.default_rng(seed)
    X = standardised(rng.standard_normal((N, d)))
    model = RvflModel.create(d, L, seed=seed)
    H = build_features(X, model)
    beta0 = np.zeros(L + d)
    beta0[rng.choice(L + d, 4, replace=False)] = rng.choice([-1, 1], 4) * rng.uniform(1, 3, 4)
    y = H @ beta0 + noise * rng.standard_normal(N)
    return X, y, model, beta0


# ---------------------------------------------------------------- features


def test_zero_hidden_nodes_is_linear():
    X = np.random.default_rng(0).standard_normal((7, 3))
    model = RvflModel.create(3, L=0)
    np.testing.assert_array_equal(build_features(X, model), X)


def test_sigmoid_range_and_determinism():
    X = 50 * np.random.default_rng(1).standard_normal((30, 4))
    a = build_features(X, RvflModel.create(4, 16, seed=3))
    b = build_features(X, RvflModel.create(4, 16, seed=3))
    np.testing.assert_array_equal(a, b)
    hidden = a[:, :16]
    assert np.all((hidden >= 0) & (hidden <= 1))
    relu = build_features(X, RvflModel.create(4, 16, "relu", seed=3))[:, :16]
    assert np.all(relu >= 0)


def test_hidden_layer_is_frozen():
    model = RvflModel.create(2, 3)
    with pytest.raises(ValueError):
        model.W[0, 0] = 1.0
    assert np.all(np.abs(model.W) <= 1) and np.all(np.abs(model.b_hidden) <= 1)


def test_model_validation():
    with pytest.raises(ValueError):
        RvflModel.create(0)
    with pytest.raises(ValueError):
        RvflModel(np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        RvflModel.create(2, activation="tanh")
    with pytest.raises(ValueError):
        build_features(np.ones((2, 5)), RvflModel.create(3, 4))


# ---------------------------------------------------------------- training


def test_lambda_zero_is_least_squares():
    X, y, model, _ = planted_exact(noise=0.3)
    m = train(X, y, model, 0.0, "ridge")
    H = build_features(m.standardize(X), m)
    H1 = np.hstack([H, np.ones((len(y), 1))])
    coef = np.linalg.lstsq(H1, y, rcond=None)[0]
    np.testing.assert_allclose(m.beta[:, 0], coef[:-1], atol=1e-8)


def test_ridge_closed_form():
    X, y, model, _ = planted_exact(noise=0.3)
    m = train(X, y, model, 0.5, "ridge")
    Hc = build_features(X, m) - m.h_mean
    ref = np.linalg.solve(Hc.T @ Hc + 0.5 * np.eye(Hc.shape[1]), Hc.T @ (y - y.mean()))
    np.testing.assert_allclose(m.beta[:, 0], ref, atol=1e-10)


def test_half_over_two_recovers_planted_weights():
    X, y, model, beta0 = planted_exact()
    m = train(X, y, model, 1e-6, "half_over_two")
    err = np.linalg.norm(m.beta[:, 0] - beta0) / np.linalg.norm(beta0)
    assert err <= 1e-2


def test_larger_lambda_is_not_denser():
    ds, model, _ = planted_dataset(N=120, d=5, L=20, n_active=4, seed=2)
    Xtr, Ytr = ds.train()
    small = train(Xtr, Ytr, RvflModel.create(5, 20, seed=2), 1e-4, "half_over_two")
    large = train(Xtr, Ytr, RvflModel.create(5, 20, seed=2), 1.0, "half_over_two")
    assert count_active(large.beta) <= count_active(small.beta)


@pytest.mark.parametrize("seed", range(3))
def test_large_lambda_sparser_than_ridge(seed):
    ds, model, _ = planted_dataset(N=120, d=5, L=20, n_active=4, seed=seed)
    Xtr, Ytr = ds.train()
    sparse = train(Xtr, Ytr, RvflModel.create(5, 20, seed=seed), 1.0, "half_over_two")
    ridge = train(Xtr, Ytr, RvflModel.create(5, 20, seed=seed), 1.0, "ridge")
    assert count_active(sparse.beta) < count_active(ridge.beta)


def test_retraining_is_bitwise_reproducible():
    X, y, model, _ = planted_exact(noise=0.1, seed=4)
    a = train(X, y, RvflModel.create(5, 20, seed=4), 1e-2, "half_over_two")
    b = train(X, y, RvflModel.create(5, 20, seed=4), 1e-2, "half_over_two")
    np.testing.assert_array_equal(a.beta, b.beta)


@pytest.mark.parametrize("solver", ["l1", "l1_minus_l2", "irls_lp"])
def test_other_solvers_fit(solver):
    X, y, model, _ = planted_exact(noise=0.05, seed=5)
    m = train(X, y, model, 1e-3, solver)
    assert evaluate_mse(m, X, y) < 0.1 * np.var(y)


def test_multi_output_columns_independent():
    X, y, model, _ = planted_exact(noise=0.1)
    Y = np.column_stack([y, -2 * y])
    both = train(X, Y, RvflModel.create(5, 20, seed=0), 0.1, "ridge")
    one = train(X, y, RvflModel.create(5, 20, seed=0), 0.1, "ridge")
    np.testing.assert_allclose(both.beta[:, 0], one.beta[:, 0], atol=1e-12)
    np.testing.assert_allclose(both.beta[:, 1], -2 * one.beta[:, 0], atol=1e-10)


def test_train_rejects():
    X, y, model, _ = planted_exact()
    with pytest.raises(ValueError):
        train(X, y, model, 0.1, "lasso")
    with pytest.raises(ValueError):
        train(X, y, model, -1.0)
    with pytest.raises(ValueError):
        train(X, y[:-1], model, 0.1)
    with pytest.raises(RuntimeError):
        RvflModel.create(5, 20).predict(X)


# ---------------------------------------------------------------- evaluation


def test_mse_identities():
    X, y, model, _ = planted_exact(noise=0.0)
    m = train(X, y, model, 0.0, "ridge")
    assert evaluate_mse(m, X, y) == pytest.approx(0.0, abs=1e-18)
    # a zero predictor on centred unit-variance targets has MSE 1
    z = RvflModel.create(5, 20)
    z.x_mean, z.x_scale = np.zeros(5), np.ones(5)
    z.h_mean, z.y_mean, z.beta = np.zeros(25), np.zeros(1), np.zeros((25, 1))
    t = standardised(np.random.default_rng(0).standard_normal((500, 1)))
    assert evaluate_mse(z, X[:1].repeat(500, 0), t) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        evaluate_mse(m, X[:0], y[:0])


def test_cross_validation_grid_handling():
    X, y, model, _ = planted_exact(noise=0.2)
    best, scores = cross_validate(X, y, model, [0.1], "ridge")
    assert best == 0.1 and list(scores) == [0.1]
    a = cross_validate(X, y, model, [1e-3, 0.1, 1.0], "ridge")
    b = cross_validate(X, y, model, [1.0, 1e-3, 0.1, 0.1, 1e-3], "ridge")
    assert a == b
    with pytest.raises(ValueError):
        cross_validate(X, y, model, [], "ridge")


def test_cross_validation_choice_is_near_best_on_test():
    ds, model, _ = planted_dataset(N=160, d=5, L=20, n_active=4, seed=6)
    Xtr, Ytr = ds.train()
    Xte, Yte = ds.test()
    grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
    best, _ = cross_validate(Xtr, Ytr, model, grid, "half_over_two")
    test_mse = {
        lam: evaluate_mse(train(Xtr, Ytr, RvflModel.create(5, 20, seed=6), lam, "half_over_two"), Xte, Yte)
        for lam in grid
    }
    assert test_mse[best] <= 1.05 * min(test_mse.values())


@settings(max_examples=1000)
@given(st.integers(3, 200), st.integers(2, 5), st.integers(0, 10_000))
def test_kfold_partitions_rows(n, folds, seed):
    if n < folds:
        return
    splits = kfold_indices(n, folds, seed)
    assert len(splits) == folds
    val = np.concatenate([v for _, v in splits])
    assert sorted(val.tolist()) == list(range(n))
    for tr, va in splits:
        assert not set(tr.tolist()) & set(va.tolist())
        assert len(tr) + len(va) == n


def test_default_grid():
    g = default_lambda_grid()
    assert len(g) == 15 and g[0] == pytest.approx(1e-6) and g[-1] == pytest.approx(10.0)


# ---------------------------------------------------------------- io


def test_export_roundtrip():
    X, y, model, _ = planted_exact(noise=0.1)
    m = train(X, y, model, 0.01, "ridge")
    back = import_model(export_model(m))
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
    assert back.solver == "ridge" and back.lam == 0.01
    with pytest.raises(ValueError):
        import_model("something else\n")
    with pytest.raises(RuntimeError):
        export_model(RvflModel.create(2, 2))


def test_csv_loading(tmp_path):
    good = tmp_path / "d.csv"
    good.write_text("a,b,y\n1,2,3\n4,5,6\n\n")
    ds = load_csv_dataset(good)
    assert ds.X.shape == (2, 2) and ds.Y.shape == (2, 1)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,y\n1,2,3\n4,x,6\n")
    with pytest.raises(ValueError, match=r"bad.csv:3"):
        load_csv_dataset(bad)
    short = tmp_path / "short.csv"
    short.write_text("a,b,y\n1,2\n")
    with pytest.raises(ValueError, match=r"short.csv:2"):
        load_csv_dataset(short)
    with pytest.raises(ValueError):
        load_csv_dataset(good, n_targets=3)


def test_dataset_split():
    ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0)).split(0.3, seed=1)
    assert len(ds.test_idx) == 3 and len(ds.train_idx) == 7
    assert not set(ds.train_idx) & set(ds.test_idx)
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.ones(4))

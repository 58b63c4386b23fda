import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from ratiosparse.gen import (
    GeneratorSpec,
    add_noise,
    dct_matrix,
    derive_seed,
    gaussian_matrix,
    gen_dct,
    gen_gaussian,
    gen_signal,
    generate,
    mutual_coherence,
    rng_for,
    sample_support,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(kind="bernoulli")
    with pytest.raises(ValueError, match="infeasible"):
        GeneratorSpec(n=20, sparsity=5, min_separation=5)
    with pytest.raises(ValueError):
        GeneratorSpec(amplitudes="uniform")
    assert GeneratorSpec().with_seed(9).seed == 9


def test_gaussian_rejects_bad_r():
    with pytest.raises(ValueError):
        gaussian_matrix(3, 3, 1.0, rng_for(0))
    with pytest.raises(ValueError):
        gen_dct(GeneratorSpec(kind="gaussian"))
    with pytest.raises(ValueError):
        gen_gaussian(GeneratorSpec(kind="oversampled_dct", param=5))


def test_gaussian_identity_covariance_at_r_zero():
    A = gaussian_matrix(20_000, 4, 0.0, rng_for(1))
    C = np.corrcoef(A, rowvar=False)
    off = C[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 0.03


def test_gaussian_correlation_r_point_eight():
    A = gaussian_matrix(10_000, 6, 0.8, rng_for(2))
    C = np.corrcoef(A, rowvar=False)
    off = C[~np.eye(6, dtype=bool)]
    assert np.all(np.abs(off - 0.8) <= 0.02)
    assert np.allclose(A.var(axis=0), 1.0, atol=0.05)


@pytest.mark.parametrize("kind, param", [("gaussian", 0.3), ("oversampled_dct", 7.0)])
def test_generators_are_deterministic(kind, param):
    spec = GeneratorSpec(kind, param, m=16, n=64, sparsity=3, min_separation=4, noise_db=30.0, seed=123)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.b, b.b)
    np.testing.assert_array_equal(a.ground_truth, b.ground_truth)
    c = generate(spec.with_seed(124))
    assert not np.array_equal(a.A, c.A)


def test_dct_entry_bound():
    A = dct_matrix(32, 200, 10.0, rng_for(3))
    assert np.all(np.abs(A) <= 1 / math.sqrt(32) + 1e-15)


def test_dct_coherence_grows_with_F():
    wins = 0
    for seed in range(10):
        lo = mutual_coherence(dct_matrix(64, 512, 5.0, rng_for(seed)))
        hi = mutual_coherence(dct_matrix(64, 512, 20.0, rng_for(seed)))
        wins += hi > lo
    assert wins >= 9


def test_mutual_coherence_identity_and_duplicate():
    assert mutual_coherence(np.eye(3)) == 0.0
    assert mutual_coherence(np.array([[1.0, 2.0], [1.0, 2.0]])) == pytest.approx(1.0)


# ---------------------------------------------------------------- supports


def test_single_nonzero():
    x = gen_signal(50, 1, 1, 7)
    assert np.count_nonzero(x) == 1


@settings(max_examples=2000)
@given(st.integers(0, 2**32 - 1))
def test_separation_always_respected(seed):
    idx = sample_support(512, 2, 15, rng_for(seed))
    assert abs(int(idx[1]) - int(idx[0])) >= 15
    assert 0 <= idx.min() and idx.max() < 512


@settings(max_examples=1000)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 10_000))
def test_support_sorted_and_separated(s, L, seed):
    n = 60
    if s * L > n:
        with pytest.raises(ValueError):
            sample_support(n, s, L, rng_for(seed))
        return
    idx = sample_support(n, s, L, rng_for(seed))
    assert len(set(idx.tolist())) == s
    assert np.all(np.diff(idx) >= L)


def test_support_uniform_over_feasible_sets():
    n, s, L = 20, 2, 5
    feasible = [c for c in itertools.combinations(range(n), s) if c[1] - c[0] >= L]
    index = {c: i for i, c in enumerate(feasible)}
    counts = np.zeros(len(feasible))
    rng = rng_for(2024)
    for _ in range(10_000):
        counts[index[tuple(sample_support(n, s, L, rng).tolist())]] += 1
    assert counts.min() > 0
    assert chisquare(counts).pvalue > 1e-3


def test_hdr_amplitudes_range():
    x = gen_signal(200, 10, 5, 3, amplitudes="hdr")
    mags = np.abs(x[x != 0])
    assert mags.size == 10
    assert np.all((mags >= 1) & (mags <= 1e3))


# ---------------------------------------------------------------- noise


def test_noise_sentinels_and_levels():
    b = np.array([3.0, 4.0, 0.0])
    np.testing.assert_array_equal(add_noise(b, None, 0), b)
    np.testing.assert_array_equal(add_noise(b, math.inf, 0), b)
    e0 = add_noise(b, 0.0, 1) - b
    assert np.linalg.norm(e0) == pytest.approx(np.linalg.norm(b), rel=1e-12)
    e45 = add_noise(b, 45.0, 1) - b
    assert np.linalg.norm(e45) / np.linalg.norm(b) == pytest.approx(10 ** (-45 / 20), rel=1e-12)
    assert 10 ** (-45 / 20) == pytest.approx(5.62e-3, abs=1e-5)
    with pytest.raises(ValueError):
        add_noise(np.zeros(3), 10.0, 0)


@settings(max_examples=1000)
@given(st.floats(-20, 80), st.integers(0, 10_000))
def test_noise_hits_requested_snr(snr, seed):
    b = rng_for(seed).standard_normal(16)
    e = add_noise(b, snr, seed) - b
    measured = 20 * math.log10(np.linalg.norm(b) / np.linalg.norm(e))
    assert measured == pytest.approx(snr, abs=1e-9)


def test_instance_fields():
    spec = GeneratorSpec("oversampled_dct", 10.0, m=16, n=64, sparsity=2, min_separation=3, noise_db=40.0, seed=5)
    inst = generate(spec)
    assert inst.A.shape == (16, 64)
    assert inst.noise_db == 40.0 and inst.seed == 5
    assert np.count_nonzero(inst.ground_truth) == 2


def test_derived_seeds_distinct_and_stable():
    seeds = {derive_seed(0, c, t) for c in range(5) for t in range(20)}
    assert len(seeds) == 100
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert all(0 <= s < 2**63 for s in seeds)

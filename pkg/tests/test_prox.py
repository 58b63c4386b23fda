import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bisect_quintic, half_threshold_objective, half_threshold_oracle
from ratiosparse.prox import (
    HalfThresholdParams,
    half_threshold_level,
    half_threshold_scalar,
    half_threshold_vector,
    quintic_root,
    solve_u_subproblem,
)

deltas = st.floats(1e-3, 10.0)
ms = st.floats(-10.0, 10.0)


def test_threshold_level_at_one():
    assert half_threshold_level(1.0) == pytest.approx(54 ** (1 / 3) / 4, rel=1e-15)
    assert HalfThresholdParams(1.0).threshold == pytest.approx(0.94494, abs=1e-5)


def test_below_threshold_is_zero():
    assert half_threshold_scalar(0.9, 1.0) == 0.0
    assert half_threshold_scalar(-0.94, 1.0) == 0.0


def test_known_value_delta_one_m_two():
    x = half_threshold_scalar(2.0, HalfThresholdParams(1.0))
    assert x == pytest.approx(1.814402, abs=1e-6)
    # stationarity of (x - m)^2 + delta sqrt(x) on the positive branch
    assert 2 * (x - 2.0) + 0.5 / math.sqrt(x) == pytest.approx(0.0, abs=1e-9)


def test_odd_symmetry_and_zero_delta():
    m = np.linspace(-5, 5, 41)
    np.testing.assert_array_equal(half_threshold_vector(-m, 0.7), -half_threshold_vector(m, 0.7))
    np.testing.assert_array_equal(half_threshold_vector(m, 0.0), m)


@pytest.mark.parametrize("bad", [math.inf, math.nan])
def test_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        half_threshold_scalar(bad, 1.0)
    with pytest.raises(ValueError):
        HalfThresholdParams(bad)
    with pytest.raises(ValueError):
        half_threshold_vector([1.0], -1.0)


def test_oracle_agreement_batch():
    rng = np.random.default_rng(11)
    delta = rng.uniform(1e-3, 10, 2000)
    m = rng.uniform(-10, 10, 2000)
    x = np.array([half_threshold_scalar(mi, di) for mi, di in zip(m, delta)])
    got = half_threshold_objective(x, m, delta)
    ref = half_threshold_oracle(m, delta)
    assert np.max(got - ref) <= 1e-9


@settings(max_examples=3000)
@given(ms, deltas)
def test_output_shape_properties(m, delta):
    x = half_threshold_scalar(m, delta)
    assert abs(x) <= abs(m)
    assert x == 0.0 or np.sign(x) == np.sign(m)
    if x != 0.0:
        assert abs(x) >= (2.0 / 3.0) * abs(m) - 1e-12
    # no worse than either trivial candidate
    assert half_threshold_objective(x, m, delta) <= half_threshold_objective(0.0, m, delta) + 1e-12
    assert half_threshold_objective(x, m, delta) <= half_threshold_objective(m, m, delta) + 1e-12


@settings(max_examples=2000)
@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), deltas)
def test_monotone_in_m(a, b, delta):
    lo, hi = sorted((a, b))
    assert half_threshold_scalar(lo, delta) <= half_threshold_scalar(hi, delta) + 1e-12


# ---------------------------------------------------------------- quintic


@pytest.mark.parametrize("kappa, expected", [(24.0, 2.0), (216.0, 3.0), (960.0, 4.0)])
def test_quintic_integer_roots(kappa, expected):
    assert quintic_root(kappa) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("kappa", [0.0, -1.0, math.inf, math.nan])
def test_quintic_rejects(kappa):
    with pytest.raises(ValueError):
        quintic_root(kappa)


@settings(max_examples=5000)
@given(st.floats(1e-8, 1e6))
def test_quintic_residual_and_bracket(kappa):
    t = quintic_root(kappa)
    assert t > 1.0
    assert abs(t**5 - t**3 - kappa) <= 1e-10 * max(1.0, kappa)


def test_quintic_matches_bisection():
    for kappa in np.logspace(-8, 6, 57):
        assert quintic_root(kappa) == pytest.approx(bisect_quintic(kappa), rel=1e-11)


# ---------------------------------------------------------------- u-subproblem


def u_objective(u, d, c, zeta, w):
    return zeta * c / math.sqrt(np.linalg.norm(u)) + 0.5 * w * float(np.sum((u - d) ** 2))


def test_u_subproblem_kappa_24_gives_four_d():
    # kappa = zeta c / (2 w ||d||^2.5) = 24 with ||d|| = 1
    d = np.array([0.6, 0.0, -0.8])
    u = solve_u_subproblem(d, c=48.0, zeta=1.0, weight=1.0)
    np.testing.assert_allclose(u, 4.0 * d, rtol=1e-12)


def test_u_subproblem_edge_cases():
    d = np.array([1.0, -2.0])
    np.testing.assert_array_equal(solve_u_subproblem(d, 0.0, 1.0, 1.0), d)
    u = solve_u_subproblem(np.zeros(3), 2.0, 1.0, 1.0)
    assert np.linalg.norm(u) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        solve_u_subproblem(d, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        solve_u_subproblem(d, 1.0, 0.0, 1.0)


@settings(max_examples=1500)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=8),
    st.floats(1e-3, 10),
    st.floats(1e-3, 10),
    st.floats(1e-2, 10),
)
def test_u_subproblem_stationary_and_optimal_along_ray(d, c, zeta, w):
    d = np.array(d)
    eta = np.linalg.norm(d)
    if eta < 1e-3:
        return
    u = solve_u_subproblem(d, c, zeta, w)
    nu = np.linalg.norm(u)
    # gradient: -zeta c u / (2 ||u||^{5/2}) + w (u - d) = 0
    grad = -zeta * c * u / (2 * nu**2.5) + w * (u - d)
    assert np.linalg.norm(grad) <= 1e-7 * (1 + w * eta)
    f = u_objective(u, d, c, zeta, w)
    for scale in (0.9, 0.99, 1.01, 1.1):
        assert f <= u_objective(scale * u, d, c, zeta, w) + 1e-12

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from threshold_ou.asymptotics import (
    LongRunCovariance,
    case1_functionals,
    confidence_intervals,
    delta_method,
    estimator_covariance,
    hac_covariance,
    longrun_covariance,
    numerical_jacobian,
    resolve_bandwidth,
)
from threshold_ou.estimators import case1_alphas, case1_gradient
from threshold_ou.model import TwoRegimeParams, analytic_conditional_moments
from threshold_ou.simulate import derive_seed, sample_stationary, simulate_path


def test_bernoulli_iid_variance():
    p = TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0)
    x = sample_stationary(p, 100_000, seed=3)
    R0 = analytic_conditional_moments(p, 0).right
    lrc = longrun_covariance(x, [lambda t: (t > 0.3).astype(float)], "auto")
    assert lrc.matrix[0, 0] == pytest.approx(R0 * (1 - R0), rel=0.10)


def test_constant_functional_is_zero():
    x = sample_stationary(TwoRegimeParams(1, 1), 1000, seed=0)
    lrc = longrun_covariance(x, [lambda t: 1.0], 10)
    assert lrc.matrix[0, 0] == 0.0


@pytest.mark.parametrize("bandwidth", ["auto", "andrews"])
def test_ar1_long_run_variance(bandwidth):
    a, h = 0.5, 0.5
    x = simulate_path(TwoRegimeParams(a, a), h=h, N=100_000, M=10, seed=derive_seed(12, 0)).values
    phi = math.exp(-a * h)
    target = 1 / (2 * a) * (1 + phi) / (1 - phi)
    lrc = longrun_covariance(x, [lambda t: t], bandwidth)
    assert lrc.matrix[0, 0] == pytest.approx(target, rel=0.15)


def test_short_series_rejected():
    with pytest.raises(ValueError):
        hac_covariance(np.zeros(50))
    with pytest.raises(ValueError):
        resolve_bandwidth(np.zeros((200, 1)), 500)


def test_auto_bandwidth_rule():
    assert resolve_bandwidth(np.zeros((100_000, 1)), "auto") == 46


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40))
def test_symmetric_psd(seed, b):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((500, 3)).cumsum(axis=0) * rng.uniform(0.1, 10, 3)
    S, _ = hac_covariance(y, b)
    assert np.array_equal(S, S.T)
    w = np.linalg.eigvalsh(S)
    assert w.min() >= -1e-10 * np.trace(S)


def test_projection_perturbation_small():
    x = simulate_path(TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0), N=50_000, seed=1).values
    y = np.column_stack([f(x) for f in case1_functionals(2)] + [x])
    yc = y - y.mean(axis=0)
    b = resolve_bandwidth(yc, "auto")
    raw = yc.T @ yc / len(x)
    for lag in range(1, b + 1):
        g = yc[lag:].T @ yc[:-lag] / len(x)
        raw += (1 - lag / (b + 1)) * (g + g.T)
    S, _ = hac_covariance(y, "auto")
    assert np.max(np.abs(S - raw)) <= 1e-8 * np.trace(raw)


def _adjacent_ratios(x, bs):
    vals = [hac_covariance(x, b)[0][0, 0] for b in bs]
    return np.array(vals[1:]) / np.array(vals[:-1])


def test_bandwidth_continuity_persistent():
    # The first lags of a persistent chain carry most of the long-run
    # variance, so b = 0 -> 1 jumps by design; check the working range
    # around the automatic bandwidth (46 here).
    x = simulate_path(TwoRegimeParams(0.5, 1.0), N=100_000, seed=derive_seed(2, 0)).values
    assert np.all(np.abs(_adjacent_ratios(x, range(11, 185)) - 1) <= 0.20)


def test_bandwidth_continuity_weakly_dependent():
    x = sample_stationary(TwoRegimeParams(0.5, 1.0), 100_000, seed=2)
    assert np.all(np.abs(_adjacent_ratios(x, range(0, 61)) - 1) <= 0.20)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 2), elements=st.floats(-1e3, 1e3)), st.integers(0, 2**32 - 1))
def test_delta_method_diagonal_nonnegative(J, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 2))
    res = delta_method(LongRunCovariance(A @ A.T, 0, N=100), J)
    assert np.all(np.diag(res.covariance) >= 0)
    assert np.all(res.stderr >= 0)


def test_delta_method_rejects_non_finite():
    with pytest.raises(ArithmeticError):
        delta_method(LongRunCovariance(np.eye(2), 0, N=100), np.array([[np.inf, 0.0], [0.0, 1.0]]))


def test_case1_analytic_vs_numerical_gradient():
    m = analytic_conditional_moments(TwoRegimeParams(0.02, 0.05), 2, signed_left=True)
    G = case1_gradient(m.left, m.right, 1.0, 2)
    num = numerical_jacobian(lambda v: np.array(case1_alphas(v[0], v[1], 1.0, 2)), np.array([m.left, m.right]))
    assert np.max(np.abs(G / num - 1)) <= 1e-6


def test_stderr_root_n_scaling():
    x = simulate_path(TwoRegimeParams(0.1, 0.2, theta=0.1, sigma=0.6), N=400_000, seed=derive_seed(9, 0)).values
    a = estimator_covariance(x[:100_000], "II", 0.1, 0.6)
    b = estimator_covariance(x, "II", 0.1, 0.6)
    assert np.all(np.abs(a.stderr / b.stderr - 2) <= 0.5)


def test_case3_covariance_shape(full_drift_params):
    x = simulate_path(full_drift_params, N=50_000, seed=derive_seed(6, 0)).values
    d = estimator_covariance(x, "III", 0.3, 1.0, level=0.9)
    assert d.covariance.shape == (4, 4)
    assert d.names == ("alpha1", "alpha2", "beta1", "beta2")
    assert np.all(d.intervals[:, 0] < d.intervals[:, 1])


def test_confidence_interval_edge_levels():
    est, se = np.array([1.0, 2.0]), np.array([0.1, 0.2])
    assert np.all(np.isinf(confidence_intervals(est, se, 1.0)))
    np.testing.assert_array_equal(confidence_intervals(est, se, 0.0), np.column_stack([est, est]))
    ci = confidence_intervals(est, se, 0.95)
    np.testing.assert_allclose(ci[:, 1] - est, 1.959963984540054 * se, rtol=1e-12)
    with pytest.raises(ValueError):
        confidence_intervals(est, se, 1.5)

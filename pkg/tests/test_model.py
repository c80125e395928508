import math

import numpy as np
import pytest
from scipy import integrate, stats

from threshold_ou.model import (
    ThresholdOUParams,
    TwoRegimeParams,
    analytic_conditional_moments,
    drift,
    invariant_density,
    stationarity_check,
    two_regime_coefficients,
)

from conftest import random_params


def test_drift_examples():
    p = TwoRegimeParams(1.0, 2.0, 0.0, 0.0, 0.0, 1.0)
    assert drift(0.0, p) == 0.0
    assert drift(1.0, p) == -2.0
    q = TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0)
    assert drift(-0.5, q) == pytest.approx(0.25)
    # the threshold itself belongs to the left regime
    assert drift(0.3, q) == pytest.approx(0.2 - 0.1 * 0.3)


def test_params_validation():
    with pytest.raises(ValueError):
        ThresholdOUParams((0.0, -1.0), (1, 1, 1), (0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        ThresholdOUParams((0.0,), (1, 0), (0, 0), 1.0)
    with pytest.raises(ValueError):
        ThresholdOUParams((0.0,), (1, 1, 1), (0, 0), 1.0)
    with pytest.raises(ValueError):
        TwoRegimeParams(1.0, 1.0, sigma=0.0)
    p = TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0)
    assert p.to_general().to_two_regime() == p


def test_stationarity_check():
    assert stationarity_check([1, 1], [0, 0])
    assert not stationarity_check([0, 1], [-1, 0])
    assert stationarity_check([0, 1], [1, 0])
    assert not stationarity_check([1, 0], [0, 1])


def _solve_k_2x2(p):
    """Continuity + normalisation as a plain 2x2 linear system in (k1, k2)."""
    a1, a2, b1, b2, th, s = p.alpha1, p.alpha2, p.beta1, p.beta2, p.theta, p.sigma
    e = lambda a, b, x: math.exp((-a * x * x + 2 * b * x) / s ** 2)  # noqa: E731
    I1, _ = integrate.quad(lambda x: e(a1, b1, x), -np.inf, th, epsabs=0, epsrel=1e-13)
    I2, _ = integrate.quad(lambda x: e(a2, b2, x), th, np.inf, epsabs=0, epsrel=1e-13)
    A = np.array([[e(a1, b1, th), -e(a2, b2, th)], [I1, I2]])
    return np.linalg.solve(A, [0.0, 1.0])


def test_symmetric_coefficients():
    p = TwoRegimeParams(1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    k = invariant_density(p).coefficients
    assert k == pytest.approx([1 / math.sqrt(math.pi)] * 2, rel=1e-14)
    assert _solve_k_2x2(p) == pytest.approx([0.5641895835477563] * 2, rel=1e-10)


@pytest.mark.parametrize("a1,a2,s", [(0.02, 0.05, 1.0), (0.3, 1.7, 0.6), (2.0, 0.1, 1.3)])
def test_zero_beta_coefficients(a1, a2, s):
    k = invariant_density(TwoRegimeParams(a1, a2, 0, 0, 0, s)).coefficients
    expected = 2 * math.sqrt(a1 * a2) / (math.sqrt(math.pi) * (math.sqrt(a1) + math.sqrt(a2)) * s)
    assert k == pytest.approx([expected, expected], rel=1e-13)


@pytest.mark.parametrize(
    "p",
    [
        TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0),
        TwoRegimeParams(1.3, 0.4, -0.3, 0.2, -0.4, 0.7),
        TwoRegimeParams(0.05, 0.9, 0.1, -0.2, 0.8, 1.5),
    ],
)
def test_coefficients_match_closed_form_and_linear_system(p):
    k = invariant_density(p).coefficients
    assert k == pytest.approx(two_regime_coefficients(p), rel=1e-12)
    assert k == pytest.approx(_solve_k_2x2(p), rel=1e-9)


def _quad_total(dens):
    p = dens.params
    mu, s = p.means(), p.scales()
    lo, hi = float(mu.min() - 20 * s.max()), float(mu.max() + 20 * s.max())
    pts = [lo] + [t for t in p.thresholds if lo < t < hi] + [hi]
    return sum(
        integrate.quad(dens.pdf, a, b, epsabs=0, epsrel=1e-12, limit=500)[0] for a, b in zip(pts, pts[1:])
    )


def test_normalisation_random(rng):
    for _ in range(100):
        dens = invariant_density(random_params(rng))
        assert abs(_quad_total(dens) - 1) <= 1e-8


def test_normalisation_spec_window():
    p = TwoRegimeParams(0.02, 0.05)
    dens = invariant_density(p)
    w = 20 * p.sigma / math.sqrt(2 * 0.02)
    total = integrate.quad(dens.pdf, -w, 0, epsrel=1e-12)[0] + integrate.quad(dens.pdf, 0, w, epsrel=1e-12)[0]
    assert total == pytest.approx(1, abs=1e-8)


def test_continuity_and_positivity(rng):
    for _ in range(100):
        dens = invariant_density(random_params(rng))
        left, right = dens.side_limits(0)
        assert abs(left - right) <= 1e-10 * max(left, right)
        assert np.all(dens.pdf(np.linspace(-30, 30, 601)) >= 0)


def test_three_regimes():
    p = ThresholdOUParams((-0.5, 1.0), (0.4, 1.2, 0.3), (0.1, -0.2, 0.6), 0.9)
    dens = invariant_density(p)
    assert abs(_quad_total(dens) - 1) <= 1e-8
    for i in range(2):
        left, right = dens.side_limits(i)
        assert abs(left - right) <= 1e-10 * left
    assert dens.regime_probabilities().sum() == pytest.approx(1, abs=1e-14)


def test_symmetric_collapse():
    a, b, s = 0.7, 0.3, 1.2
    dens = invariant_density(TwoRegimeParams(a, a, b, b, 0.25, s))
    x = np.linspace(b / a - 8, b / a + 8, 1601)
    ref = stats.norm.pdf(x, loc=b / a, scale=s / math.sqrt(2 * a))
    assert np.max(np.abs(dens.pdf(x) / ref - 1)) <= 1e-12


def test_cdf_matches_regime_probabilities():
    p = TwoRegimeParams(0.1, 0.5, 0.2, 0.5, 0.3, 1.0)
    dens = invariant_density(p)
    assert dens.cdf(p.theta) == pytest.approx(dens.regime_probabilities()[0], rel=1e-14)
    assert dens.cdf(1e6) == pytest.approx(1.0)


def test_moment_examples():
    sym = analytic_conditional_moments(TwoRegimeParams(1, 1), 1, signed_left=True)
    # quadrature oracle: int_0^inf x exp(-x^2)/sqrt(pi) dx = 1 / (2 sqrt(pi))
    assert sym.left == pytest.approx(0.28209479177387814, rel=1e-13)
    assert sym.right == pytest.approx(0.28209479177387814, rel=1e-13)
    t1 = analytic_conditional_moments(TwoRegimeParams(0.02, 0.05), 2, signed_left=True)
    assert t1.left == pytest.approx(15.314352831930172, rel=1e-12)


@pytest.mark.parametrize("n", [0.5, 1, 2, 3, 4])
def test_closed_form_vs_quadrature_case1(n):
    p = TwoRegimeParams(0.02, 0.05)
    a = analytic_conditional_moments(p, n, signed_left=True, method="closed")
    b = analytic_conditional_moments(p, n, signed_left=True, method="quad")
    assert a.left == pytest.approx(b.left, rel=1e-10)
    assert a.right == pytest.approx(b.right, rel=1e-10)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_closed_form_vs_quadrature_truncated(n, rng):
    for _ in range(10):
        p = random_params(rng)
        a = analytic_conditional_moments(p, n, method="closed")
        b = analytic_conditional_moments(p, n, method="quad")
        scale = max(abs(b.left), abs(b.right), 1e-300)
        assert abs(a.left - b.left) <= 1e-10 * max(abs(b.left), 1e-3 * scale)
        assert abs(a.right - b.right) <= 1e-10 * max(abs(b.right), 1e-3 * scale)


def test_zero_order_sums_to_one(rng):
    for _ in range(50):
        mv = analytic_conditional_moments(random_params(rng), 0)
        assert abs(mv.left + mv.right - 1.0) <= 2.2e-16


def test_moment_errors():
    with pytest.raises(ValueError):
        analytic_conditional_moments(TwoRegimeParams(1, 1, theta=0.2), 1, signed_left=True)
    with pytest.raises(ValueError):
        analytic_conditional_moments(TwoRegimeParams(1, 1), -1)
    with pytest.raises(ValueError):
        analytic_conditional_moments(TwoRegimeParams(1, 1, 0.5, 0, 0.1), 1.5)

import numpy as np
import pytest

from threshold_ou.model import TwoRegimeParams


@pytest.fixture
def slow_params():
    return TwoRegimeParams(alpha1=0.02, alpha2=0.05, beta1=0.0, beta2=0.0, theta=0.0, sigma=1.0)


@pytest.fixture
def shifted_params():
    return TwoRegimeParams(alpha1=0.1, alpha2=0.2, beta1=0.0, beta2=0.0, theta=0.1, sigma=0.6)


@pytest.fixture
def full_drift_params():
    return TwoRegimeParams(alpha1=0.1, alpha2=0.5, beta1=0.2, beta2=0.5, theta=0.3, sigma=1.0)


def random_params(rng, zero_beta=False, zero_theta=False):
    """Uniform draw from the round-trip parameter box."""
    a1, a2 = rng.uniform(0.02, 2.0, size=2)
    b1, b2 = (0.0, 0.0) if zero_beta else rng.uniform(-1.0, 1.0, size=2)
    th = 0.0 if zero_theta else rng.choice([-1.0, 1.0]) * rng.uniform(0.05, 1.0)
    sg = rng.uniform(0.3, 2.0)
    return TwoRegimeParams(float(a1), float(a2), float(b1), float(b2), float(th), float(sg))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def analytic_ratios(p, method="quad"):
    """Conditional moments E[X^k | side] for k = 1, 2 from the invariant density."""
    from threshold_ou.model import analytic_conditional_moments

    m = [analytic_conditional_moments(p, k, method=method) for k in (0, 1, 2)]
    return m[1].left / m[0].left, m[2].left / m[0].left, m[1].right / m[0].right, m[2].right / m[0].right

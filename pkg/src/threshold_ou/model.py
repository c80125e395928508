"""Threshold OU parameters, invariant density and stationary moments.

Within regime ``i`` the stationary density is proportional to a Gaussian
with mean ``beta_i / alpha_i`` and standard deviation
``sigma / sqrt(2 alpha_i)``. The regime weights are fixed by continuity at
every threshold plus normalisation. They are solved in log space, because
the raw coefficients ``k_i`` overflow for strongly shifted regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special
from scipy.special import logsumexp

from .numerics import mills_lower, mills_upper, normal_cdf

TAIL_SDS = 20.0


@dataclass(frozen=True)
class ThresholdOUParams:
    """m-regime threshold OU model ``dX = (beta_i - alpha_i X) dt + sigma dW``.

    Regime ``i`` is active on ``(thresholds[i-1], thresholds[i]]``.
    """

    thresholds: Tuple[float, ...]
    alphas: Tuple[float, ...]
    betas: Tuple[float, ...]
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        m = len(self.alphas)
        if m < 1 or len(self.betas) != m or len(self.thresholds) != m - 1:
            raise ValueError(
                f"{m} regimes need {m} betas and {m - 1} thresholds, got "
                f"{len(self.betas)} and {len(self.thresholds)}"
            )
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if not all(a > 0 and math.isfinite(a) for a in self.alphas):
            raise ValueError("every alpha must be positive")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be positive")
        if not all(math.isfinite(v) for v in self.thresholds + self.betas):
            raise ValueError("thresholds and betas must be finite")

    @property
    def m(self) -> int:
        return len(self.alphas)

    def regime(self, x: float) -> int:
        """Index of the regime containing ``x`` (left-closed thresholds)."""
        return int(np.searchsorted(self.thresholds, x, side="left"))

    def means(self) -> np.ndarray:
        return np.asarray(self.betas) / np.asarray(self.alphas)

    def scales(self) -> np.ndarray:
        return self.sigma / np.sqrt(2.0 * np.asarray(self.alphas))

    def to_two_regime(self) -> "TwoRegimeParams":
        if self.m != 2:
            raise ValueError(f"expected 2 regimes, got {self.m}")
        return TwoRegimeParams(
            self.alphas[0], self.alphas[1], self.betas[0], self.betas[1],
            self.thresholds[0], self.sigma,
        )


@dataclass(frozen=True)
class TwoRegimeParams:
    alpha1: float
    alpha2: float
    beta1: float = 0.0
    beta2: float = 0.0
    theta: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.sigma > 0):
            raise ValueError("alpha1, alpha2 and sigma must be positive")

    def to_general(self) -> ThresholdOUParams:
        return ThresholdOUParams(
            (self.theta,), (self.alpha1, self.alpha2), (self.beta1, self.beta2), self.sigma
        )

    @classmethod
    def from_general(cls, params: ThresholdOUParams) -> "TwoRegimeParams":
        return params.to_two_regime()

    # Reparametrisation used by the Case III equations.
    @property
    def v(self) -> float:
        return self.beta1 / self.alpha1

    @property
    def z(self) -> float:
        return self.beta2 / self.alpha2

    @property
    def u(self) -> float:
        return math.sqrt(2 * self.alpha1) * (self.theta - self.v) / self.sigma

    @property
    def omega(self) -> float:
        return math.sqrt(2 * self.alpha2) * (self.theta - self.z) / self.sigma


def _as_general(params) -> ThresholdOUParams:
    return params.to_general() if isinstance(params, TwoRegimeParams) else params


def drift(x: float, params) -> float:
    p = _as_general(params)
    i = p.regime(x)
    return p.betas[i] - p.alphas[i] * x


def stationarity_check(
    alphas: Sequence[float], betas: Sequence[float]
) -> bool:
    """Whether ``-a x^2 + 2 b x`` tends to a negative limit in both outer tails.

    Only the first and last regimes matter. Accepts ``alpha = 0`` so that
    boundary configurations can be probed, which ``ThresholdOUParams``
    itself rejects.
    """
    def tail_ok(a, b, direction):
        if a > 0:
            return True
        if a < 0:
            return False
        # linear term 2 b x must go to -inf as x -> direction * inf
        return b * direction < 0

    return tail_ok(alphas[0], betas[0], -1) and tail_ok(alphas[-1], betas[-1], +1)


def _log_mass(a: float, b: float) -> float:
    """log(Phi(b) - Phi(a)) for standardised a < b, stable in both tails."""
    if a > 0:
        a, b = -b, -a
    lb = special.log_ndtr(b)
    la = special.log_ndtr(a)
    return lb + math.log1p(-math.exp(la - lb)) if la > -math.inf else lb


@dataclass(frozen=True)
class InvariantDensity:
    """Stationary density ``psi`` of a threshold OU process.

    ``log_weights[i]`` is the log probability of regime ``i`` relative to a
    full ``N(mean_i, scale_i^2)`` law, i.e. on regime ``i``
    ``psi(x) = exp(log_weights[i]) * N(x; mean_i, scale_i)``.
    """

    params: ThresholdOUParams
    log_weights: np.ndarray
    log_coefficients: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        """The constants ``k_i`` in ``psi = k_i exp((-a_i x^2 + 2 b_i x) / sigma^2)``."""
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.log_coefficients)

    def edges(self) -> np.ndarray:
        return np.concatenate(([-np.inf], self.params.thresholds, [np.inf]))

    def regime_probabilities(self) -> np.ndarray:
        p = self.params
        mu, s, e = p.means(), p.scales(), self.edges()
        out = np.empty(p.m)
        for i in range(p.m):
            out[i] = math.exp(self.log_weights[i] + _log_mass((e[i] - mu[i]) / s[i], (e[i + 1] - mu[i]) / s[i]))
        return out

    def log_pdf(self, x) -> np.ndarray:
        p = self.params
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(p.thresholds, x, side="left")
        mu, s = p.means()[idx], p.scales()[idx]
        zz = (x - mu) / s
        return self.log_weights[idx] - 0.5 * zz * zz - np.log(s) - 0.5 * math.log(2 * math.pi)

    def pdf(self, x):
        out = np.exp(self.log_pdf(x))
        return out if np.ndim(out) else float(out)

    def side_limits(self, i: int) -> Tuple[float, float]:
        """``(psi(theta_i-), psi(theta_i+))`` at the i-th threshold (0-based)."""
        p = self.params
        t = p.thresholds[i]
        vals = []
        for j in (i, i + 1):
            zz = (t - p.means()[j]) / p.scales()[j]
            vals.append(math.exp(self.log_weights[j] - 0.5 * zz * zz) / (p.scales()[j] * math.sqrt(2 * math.pi)))
        return vals[0], vals[1]

    def integration_intervals(self):
        """Finite pieces covering the support: regime ∩ mean ± 20 sd."""
        p = self.params
        mu, s, e = p.means(), p.scales(), self.edges()
        pieces = []
        for i in range(p.m):
            lo = max(e[i], mu[i] - TAIL_SDS * s[i])
            hi = min(e[i + 1], mu[i] + TAIL_SDS * s[i])
            if lo < hi:
                pieces.append((i, lo, hi))
        return pieces

    def cdf(self, x):
        """Stationary CDF, exact per regime via normal CDFs."""
        p = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        mu, s, e = p.means(), p.scales(), self.edges()
        w = np.exp(self.log_weights)
        out = np.zeros_like(x)
        for i in range(p.m):
            lo = (e[i] - mu[i]) / s[i]
            hi = (np.clip(x, e[i], e[i + 1]) - mu[i]) / s[i]
            out += w[i] * (special.ndtr(hi) - special.ndtr(lo))
        out = np.clip(out, 0.0, 1.0)
        return out if out.size > 1 else float(out[0])


def invariant_density(params) -> InvariantDensity:
    """Solve continuity + normalisation for the regime weights.

    The system is lower bidiagonal in the log weights plus one dense
    normalisation row, so it is solved by forward substitution followed by
    a log-sum-exp rescaling.
    """
    p = _as_general(params)
    if not stationarity_check(p.alphas, p.betas):
        raise ValueError("parameters admit no stationary distribution")
    mu, s = p.means(), p.scales()
    m = p.m
    # log of N(x; mu_i, s_i) density
    def log_n(i, x):
        zz = (x - mu[i]) / s[i]
        return -0.5 * zz * zz - math.log(s[i])

    rel = np.zeros(m)
    for i, t in enumerate(p.thresholds):
        rel[i + 1] = rel[i] + log_n(i, t) - log_n(i + 1, t)
    edges = np.concatenate(([-np.inf], p.thresholds, [np.inf]))
    log_mass = np.array([
        _log_mass((edges[i] - mu[i]) / s[i], (edges[i + 1] - mu[i]) / s[i]) for i in range(m)
    ])
    total = logsumexp(rel + log_mass)
    if not math.isfinite(total):
        raise ArithmeticError("singular normalisation for invariant density")
    log_w = rel - total
    # k_i exp(b_i) exp(-(x-mu)^2 / 2 s^2) = w_i N(x; mu, s)  with  b_i = beta_i^2 / (sigma^2 alpha_i)
    b = np.asarray(p.betas) ** 2 / (p.sigma ** 2 * np.asarray(p.alphas))
    log_k = log_w - np.log(s) - 0.5 * math.log(2 * math.pi) - b
    return InvariantDensity(p, log_w, log_k)


def two_regime_coefficients(params: TwoRegimeParams) -> Tuple[float, float]:
    """Closed-form ``(k_1, k_2)`` for two regimes, from the Gaussian partial integrals.

    Kept independent of :func:`invariant_density` so the two can be
    cross-checked.
    """
    a1, a2, b1, b2 = params.alpha1, params.alpha2, params.beta1, params.beta2
    th, sg = params.theta, params.sigma
    z1 = math.sqrt(2 * a1) / sg * (th - b1 / a1)
    z2 = math.sqrt(2 * a2) / sg * (th - b2 / a2)
    e1 = b1 ** 2 / (sg ** 2 * a1)
    e2 = b2 ** 2 / (sg ** 2 * a2)
    phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)  # noqa: E731
    denom = phi(z2) * normal_cdf(z1) / math.sqrt(a1) + phi(z1) * normal_cdf(-z2) / math.sqrt(a2)
    pref = 1.0 / (sg * math.sqrt(math.pi))
    return pref * phi(z2) / (math.exp(e1) * denom), pref * phi(z1) / (math.exp(e2) * denom)


@dataclass(frozen=True)
class MomentVector:
    order: float
    left: float
    right: float
    theta: float
    signed_left: bool = False


def case1_moments(alpha1: float, alpha2: float, sigma: float, n: float) -> Tuple[float, float]:
    """``(L_n, R_n)`` with ``L_n = E[(-X)^n; X<=0]`` when beta = theta = 0."""
    sa1, sa2 = math.sqrt(alpha1), math.sqrt(alpha2)
    common = sigma ** n * sa1 * sa2 * special.gamma((n + 1) / 2) / (math.sqrt(math.pi) * (sa1 + sa2))
    return common / alpha1 ** ((n + 1) / 2), common / alpha2 ** ((n + 1) / 2)


def truncated_moments(params: TwoRegimeParams):
    """Regime masses and conditional means / second moments on each side.

    Returns ``(p_left, m1_left, m2_left, p_right, m1_right, m2_right)`` where
    ``m_k`` are ``E[X^k | X <= theta]`` and ``E[X^k | X > theta]``.
    """
    dens = invariant_density(params)
    p_left, p_right = dens.regime_probabilities()
    th = params.theta
    v, s1 = params.v, params.sigma / math.sqrt(2 * params.alpha1)
    z, s2 = params.z, params.sigma / math.sqrt(2 * params.alpha2)
    lam1 = mills_lower((th - v) / s1)
    lam2 = mills_upper((th - z) / s2)
    m1_left = v - s1 * lam1
    m2_left = v * v + s1 * s1 - s1 * lam1 * (th + v)
    m1_right = z + s2 * lam2
    m2_right = z * z + s2 * s2 + s2 * lam2 * (th + z)
    return p_left, m1_left, m2_left, p_right, m1_right, m2_right


def _quad_moment(dens: InvariantDensity, g, side: str) -> float:
    total = 0.0
    for i, lo, hi in dens.integration_intervals():
        if (side == "left") != (i == 0):
            continue
        val, _ = integrate.quad(lambda x: g(x) * dens.pdf(x), lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


def analytic_conditional_moments(
    params: TwoRegimeParams, n: float, signed_left: bool = False, method: str = "auto"
) -> MomentVector:
    """Stationary ``L_n`` / ``R_n`` of a two-regime process.

    With ``signed_left`` the left moment is ``E[(-X)^n; X <= 0]`` (requires
    ``theta == 0``); otherwise it is ``E[X^n; X <= theta]``. ``method`` is
    ``"auto"`` (closed form when available), ``"closed"`` or ``"quad"``.
    """
    if not n >= 0:
        raise ValueError("moment order must be nonnegative")
    if signed_left and params.theta != 0:
        raise ValueError("signed_left moments are defined for theta = 0 only")
    integer = float(n).is_integer()
    if method not in ("auto", "closed", "quad"):
        raise ValueError(f"unknown method {method!r}")

    closed = None
    if n == 0 or (signed_left and params.beta1 == 0 and params.beta2 == 0):
        if n == 0:
            pl, pr = invariant_density(params).regime_probabilities()
            # the larger mass is taken as the complement so the pair sums to one
            closed = (pl, 1.0 - pl) if pl <= pr else (1.0 - pr, pr)
        else:
            closed = case1_moments(params.alpha1, params.alpha2, params.sigma, n)
    elif not signed_left and n in (1, 2):
        pl, m1l, m2l, pr, m1r, m2r = truncated_moments(params)
        closed = (pl * m1l, pr * m1r) if n == 1 else (pl * m2l, pr * m2r)

    if method == "closed":
        if closed is None:
            raise ValueError(f"no closed form for order {n} with these parameters")
        left, right = closed
    elif method == "auto" and closed is not None:
        left, right = closed
    else:
        if not signed_left and not integer:
            raise ValueError("non-integer orders of x^n need signed_left moments")
        dens = invariant_density(params)
        g_left = (lambda x: (-x) ** n) if signed_left else (lambda x: x ** n)
        left = _quad_moment(dens, g_left, "left")
        right = _quad_moment(dens, lambda x: x ** n, "right")
    return MomentVector(float(n), float(left), float(right), params.theta, signed_left)

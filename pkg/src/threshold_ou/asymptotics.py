"""Asymptotic covariance of the moment estimators.

The long-run covariance of the moment functionals is estimated with a
Bartlett (Newey-West) lag window. The delta method then maps it through
the moment-to-parameter map. Case I uses an analytic Jacobian. Cases II
and III difference through the implicit solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from .estimators import case1_alphas, case1_gradient, case2_from_ratios, case3_from_ratios

MIN_N = 100
FD_STEP = 1e-6

Bandwidth = Union[int, str]


@dataclass(frozen=True)
class LongRunCovariance:
    matrix: np.ndarray
    bandwidth: int
    names: tuple = ()
    N: int = 0


@dataclass(frozen=True)
class DeltaMethodResult:
    covariance: np.ndarray
    jacobian: np.ndarray
    stderr: np.ndarray
    names: tuple = ()
    level: Optional[float] = None
    intervals: Optional[np.ndarray] = None


def _andrews_bandwidth(y: np.ndarray) -> int:
    """Andrews (1991) AR(1) plug-in rule for the Bartlett kernel."""
    N = y.shape[0]
    num = den = 0.0
    for col in y.T:
        a, b = col[:-1], col[1:]
        ss = float(a @ a)
        if ss == 0:
            continue
        rho = float(a @ b) / ss
        rho = min(max(rho, -0.999), 0.999)
        s2 = float(np.mean((b - rho * a) ** 2))
        num += 4 * rho ** 2 * s2 ** 2 / ((1 - rho) ** 6 * (1 + rho) ** 2)
        den += s2 ** 2 / (1 - rho) ** 4
    if den == 0:
        return 0
    return int(min(math.floor(1.1447 * (num / den * N) ** (1 / 3)), N - 1))


def resolve_bandwidth(y: np.ndarray, bandwidth: Bandwidth) -> int:
    N = y.shape[0]
    if bandwidth == "auto":
        return int(math.floor(N ** (1 / 3)))
    if bandwidth == "andrews":
        return _andrews_bandwidth(y)
    b = int(bandwidth)
    if b < 0 or b >= N:
        raise ValueError(f"bandwidth must lie in [0, N), got {b}")
    return b


def hac_covariance(y: np.ndarray, bandwidth: Bandwidth = "auto") -> tuple:
    """Bartlett-window long-run covariance of the columns of ``y`` (N x d)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    N = y.shape[0]
    if N < MIN_N:
        raise ValueError(f"long-run covariance needs at least {MIN_N} observations, got {N}")
    yc = y - y.mean(axis=0)
    b = resolve_bandwidth(yc, bandwidth)
    S = yc.T @ yc / N
    for lag in range(1, b + 1):
        g = yc[lag:].T @ yc[:-lag] / N
        S += (1.0 - lag / (b + 1.0)) * (g + g.T)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w.min() < 0:
        S = (V * np.clip(w, 0.0, None)) @ V.T
        S = 0.5 * (S + S.T)
    return S, b


def longrun_covariance(
    series, functionals: Sequence[Callable], bandwidth: Bandwidth = "auto", names: Sequence[str] = ()
) -> LongRunCovariance:
    """Long-run covariance of ``f_i(X_k)`` over an observation series.

    ``bandwidth`` is a lag count, ``"auto"`` (``floor(N^(1/3))``) or
    ``"andrews"`` (AR(1) plug-in, better for persistent series).
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    y = np.column_stack([np.asarray(f(x), dtype=float) * np.ones_like(x) for f in functionals])
    S, b = hac_covariance(y, bandwidth)
    return LongRunCovariance(S, b, tuple(names), x.size)


def numerical_jacobian(func: Callable[[np.ndarray], np.ndarray], at: np.ndarray, rel_step: float = FD_STEP) -> np.ndarray:
    """Central differences with a per-coordinate relative step."""
    at = np.asarray(at, dtype=float)
    f0 = np.asarray(func(at), dtype=float)
    J = np.empty((f0.size, at.size))
    for j in range(at.size):
        step = rel_step * max(abs(at[j]), 1e-8)
        up, dn = at.copy(), at.copy()
        up[j] += step
        dn[j] -= step
        J[:, j] = (np.asarray(func(up)) - np.asarray(func(dn))) / (2 * step)
    return J


def delta_method(
    sigma_hat: LongRunCovariance,
    jacobian: np.ndarray,
    N: Optional[int] = None,
    names: Sequence[str] = (),
    level: Optional[float] = None,
    estimates: Optional[np.ndarray] = None,
) -> DeltaMethodResult:
    """Covariance ``J S J^T / N`` of the parameter estimates."""
    J = np.asarray(jacobian, dtype=float)
    if not np.all(np.isfinite(J)):
        raise ArithmeticError("non-finite Jacobian; the map is singular here")
    N = sigma_hat.N if N is None else N
    cov = J @ sigma_hat.matrix @ J.T / N
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    intervals = None
    if level is not None and estimates is not None:
        intervals = confidence_intervals(np.asarray(estimates, dtype=float), se, level)
    return DeltaMethodResult(cov, J, se, tuple(names), level, intervals)


def confidence_intervals(estimates: np.ndarray, stderr: np.ndarray, level: float) -> np.ndarray:
    """Symmetric normal intervals; level 1 gives infinite half-widths."""
    if not 0 <= level <= 1:
        raise ValueError("level must lie in [0, 1]")
    q = math.inf if level == 1 else float(sps.norm.ppf(0.5 + level / 2))
    with np.errstate(invalid="ignore"):
        half = np.where(stderr > 0, q * stderr, 0.0) if level < 1 else np.full_like(stderr, math.inf)
    return np.column_stack([estimates - half, estimates + half])


# --------------------------------------------------------------------------
# Per-case functionals and maps


def case1_functionals(n: float):
    return [
        lambda x: np.where(x <= 0, np.abs(np.minimum(x, 0.0)) ** n, 0.0),
        lambda x: np.where(x > 0, np.maximum(x, 0.0) ** n, 0.0),
    ]


def case2_functionals(theta: float):
    return [
        lambda x: (x <= theta).astype(float),
        lambda x: np.where(x <= theta, x, 0.0),
        lambda x: (x > theta).astype(float),
        lambda x: np.where(x > theta, x, 0.0),
    ]


def case3_functionals(theta: float):
    return [
        lambda x: (x <= theta).astype(float),
        lambda x: np.where(x <= theta, x, 0.0),
        lambda x: np.where(x <= theta, x * x, 0.0),
        lambda x: (x > theta).astype(float),
        lambda x: np.where(x > theta, x, 0.0),
        lambda x: np.where(x > theta, x * x, 0.0),
    ]


def case2_map(theta: float, sigma: float):
    def g(m):
        L0, L1, R0, R1 = m
        sol = case2_from_ratios(L1 / L0, R1 / R0, theta, sigma)
        return np.array([sol.alpha1_hat, sol.alpha2_hat])
    return g


def case3_map(theta: float, sigma: float):
    def g(m):
        L0, L1, L2, R0, R1, R2 = m
        sol = case3_from_ratios(L1 / L0, L2 / L0, R1 / R0, R2 / R0, theta, sigma)
        return np.array([sol.alpha1_hat, sol.alpha2_hat, sol.beta1_hat, sol.beta2_hat])
    return g


def estimator_covariance(
    series,
    case: str,
    theta: float,
    sigma: float,
    n: float = 2.0,
    bandwidth: Bandwidth = "andrews",
    level: Optional[float] = None,
) -> DeltaMethodResult:
    """Plug-in asymptotic covariance of the Case I/II/III estimates."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if case == "I":
        fs, names = case1_functionals(n), ("alpha1", "alpha2")
    elif case == "II":
        fs, names = case2_functionals(theta), ("alpha1", "alpha2")
    elif case == "III":
        fs, names = case3_functionals(theta), ("alpha1", "alpha2", "beta1", "beta2")
    else:
        raise ValueError(f"unknown case {case!r}")
    lrc = longrun_covariance(x, fs, bandwidth)
    means = np.array([float(np.mean(f(x))) for f in fs])
    if case == "I":
        J = case1_gradient(means[0], means[1], sigma, n)
        est = np.array(case1_alphas(means[0], means[1], sigma, n))
    else:
        g = case2_map(theta, sigma) if case == "II" else case3_map(theta, sigma)
        J = numerical_jacobian(g, means)
        est = g(means)
    return delta_method(lrc, J, x.size, names, level, est)

"""Generalized moment estimators for the two-regime threshold OU drift.

Three settings, all with ``theta`` and ``sigma`` known:

* Case I   (beta1 = beta2 = 0, theta = 0): closed form from ``L_n``, ``R_n``.
* Case II  (beta1 = beta2 = 0, theta != 0): two decoupled monotone scalar
  equations in the Mills ratios.
* Case III (all four drift parameters, theta != 0): each side reduces to a
  scalar equation in ``u`` (left) or ``omega`` (right), solved by a grid
  scan followed by bracketed refinement and back substitution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import special

from .numerics import (
    Bracket,
    RootFindingError,
    find_root,
    mills_lower,
    mills_upper,
    scan_sign_changes,
)
from .stats import ConditionalMomentStats, moment_ratios


class EstimationError(ValueError):
    """The data admit no estimate under the requested model."""


# Case II bracket growth and Case III scan settings.
CASE2_START = (1e-8, 1.0)
CASE2_CAP = 50.0
SCAN_U = (-10.0, 10.0)
SCAN_OMEGA = (-5.0, 5.0)
SCAN_POINTS = 4001
POLE_RADIUS = 1e-3
RESIDUAL_TOL = 1e-8
# The degenerate branch must fit the second moment as well as a regular root
# fits the system; a looser value is an explicit opt-in for noisy data.
DEGENERATE_TOL = RESIDUAL_TOL


@dataclass
class EstimationResult:
    case: str
    estimates: Dict[str, float]
    theta: float
    sigma: float
    N: int
    order: Optional[float] = None
    h: Optional[float] = None
    diagnostics: Dict[str, object] = field(default_factory=dict)
    covariance: Optional[np.ndarray] = None
    stderr: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        out = {
            "case": self.case,
            "estimates": dict(self.estimates),
            "inputs": {"theta": self.theta, "sigma": self.sigma, "N": self.N, "order": self.order, "h": self.h},
            "diagnostics": _jsonable(self.diagnostics),
        }
        if self.stderr is not None:
            out["stderr"] = dict(self.stderr)
        if self.covariance is not None:
            out["covariance"] = np.asarray(self.covariance).tolist()
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Bracket):
        return [obj.lo, obj.hi]
    return obj


# --------------------------------------------------------------------------
# Case I


def case1_alphas(L: float, R: float, sigma: float, n: float) -> Tuple[float, float]:
    """Invert ``(L_n, R_n) -> (alpha1, alpha2)`` in closed form."""
    if not (L > 0 and R > 0):
        raise EstimationError("Case I needs positive moments on both sides of 0")
    if not n > 0:
        raise ValueError("Case I order n must be positive")
    c = sigma ** n * special.gamma((n + 1) / 2) / math.sqrt(math.pi)
    a1 = (c / (L * ((R / L) ** (1 / (n + 1)) + 1))) ** (2 / n)
    a2 = (c / (R * ((L / R) ** (1 / (n + 1)) + 1))) ** (2 / n)
    return float(a1), float(a2)


def case1_gradient(L: float, R: float, sigma: float, n: float) -> np.ndarray:
    """Analytic Jacobian of :func:`case1_alphas` w.r.t. ``(L, R)``.

    Writing ``alpha1 = (c / D1)^(2/n)`` with ``D1 = L^(n/(n+1)) (R^(1/(n+1)) + L^(1/(n+1)))``
    gives ``d log alpha1 = -(2/n) d log D1``; ``alpha2`` is the mirror image.
    """
    a1, a2 = case1_alphas(L, R, sigma, n)
    p = 1.0 / (n + 1)
    lp, rp = L ** p, R ** p
    s = lp + rp
    # d log D1 / dL, d log D1 / dR
    d1_dl = (n * p) / L + p * lp / (L * s)
    d1_dr = p * rp / (R * s)
    d2_dr = (n * p) / R + p * rp / (R * s)
    d2_dl = p * lp / (L * s)
    k = -2.0 / n
    return np.array([
        [k * a1 * d1_dl, k * a1 * d1_dr],
        [k * a2 * d2_dl, k * a2 * d2_dr],
    ])


def estimate_case1(stats: ConditionalMomentStats, sigma: float, n: float) -> EstimationResult:
    if stats.theta != 0 or not stats.signed_left:
        raise ValueError("Case I needs signed_left statistics at theta = 0")
    L, R = stats.moment(n)
    a1, a2 = case1_alphas(L, R, sigma, n)
    return EstimationResult(
        "I", {"alpha1": a1, "alpha2": a2}, 0.0, sigma, stats.N, order=n,
        diagnostics={"L": L, "R": R},
    )


# --------------------------------------------------------------------------
# Case II


def K1(x: float) -> float:
    if x == 0:
        raise ZeroDivisionError("K1 undefined at 0")
    return -mills_lower(x) / x


def K2(y: float) -> float:
    if y == 0:
        raise ZeroDivisionError("K2 undefined at 0")
    return mills_upper(y) / y


def monotonicity_factor(x):
    """``1/x^2 + 1 + A(x)/x``; positive for every ``x != 0``."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (x * x) + 1.0 + mills_lower(x) / x


@dataclass
class Case2Solution:
    x_hat: float
    y_hat: float
    alpha1_hat: float
    alpha2_hat: float
    diagnostics: Dict[str, object]


def _solve_K(K, target: float, positive: bool, name: str):
    """Root of ``K(x) = target`` on the half-line chosen by ``positive``."""
    sign = 1.0 if positive else -1.0
    g = lambda t: K(sign * t) - target  # noqa: E731  t > 0
    lo, hi = CASE2_START
    g_lo, g_hi = g(lo), g(hi)
    while g_lo * g_hi > 0:
        if hi >= CASE2_CAP:
            raise EstimationError(f"{name}: target {target!r} is outside the reachable range")
        hi = min(2.0 * hi, CASE2_CAP)
        g_hi = g(hi)
    res = find_root(g, Bracket(lo, hi, g_lo, g_hi))
    root = sign * res.root
    return root, {"iterations": res.iterations, "residual": res.f_root, "bracket": [sign * lo, sign * hi]}


def solve_K1(target: float):
    """Unique ``x`` with ``K1(x) = target``.

    ``K1`` maps ``(-inf, 0)`` onto ``(1, inf)`` and ``(0, inf)`` onto
    ``(-inf, 0)``; targets in ``[0, 1]`` have no solution.
    """
    if target > 1:
        return _solve_K(K1, target, positive=False, name="K1")
    if target < 0:
        return _solve_K(K1, target, positive=True, name="K1")
    raise EstimationError(f"K1 target {target!r} lies in [0, 1]: no solution")


def solve_K2(target: float):
    if target > 1:
        return _solve_K(K2, target, positive=True, name="K2")
    if target < 0:
        return _solve_K(K2, target, positive=False, name="K2")
    raise EstimationError(f"K2 target {target!r} lies in [0, 1]: no solution")


def case2_from_ratios(l1: float, r1: float, theta: float, sigma: float) -> Case2Solution:
    """Solve Case II from conditional means ``E[X|X<=theta]``, ``E[X|X>theta]``."""
    if theta == 0:
        raise ValueError("Case II requires theta != 0")
    x, dx = solve_K1(l1 / theta)
    y, dy = solve_K2(r1 / theta)
    a1 = 0.5 * (sigma * x / theta) ** 2
    a2 = 0.5 * (sigma * y / theta) ** 2
    return Case2Solution(x, y, a1, a2, {"left": dx, "right": dy})


def estimate_case2(stats: ConditionalMomentStats, sigma: float, theta: Optional[float] = None) -> Case2Solution:
    theta = stats.theta if theta is None else theta
    if theta != stats.theta:
        raise ValueError("statistics were computed at a different threshold")
    ratios = moment_ratios(stats, [1])
    return case2_from_ratios(ratios["left"][1], ratios["right"][1], theta, sigma)


# --------------------------------------------------------------------------
# Case III


def Kbar_left(u: float, v: float, theta: float) -> Tuple[float, float]:
    """Conditional first and second moments below ``theta`` in ``(u, v)``."""
    a = mills_lower(u)
    return (v - theta) / u * a + v, ((theta - v) / u) ** 2 + v * v - a * (theta * theta - v * v) / u


def Kbar_right(w: float, z: float, theta: float) -> Tuple[float, float]:
    b = mills_upper(w)
    return (theta - z) / w * b + z, ((theta - z) / w) ** 2 + z * z + b * (theta * theta - z * z) / w


def F1(u, l1: float, l2: float, theta: float):
    """Left-side reduced equation after eliminating ``v``.

    Accepts scalars or arrays. ``u = 0`` is a spurious root of this
    polynomial form and is rejected for scalar input.
    """
    if np.ndim(u) == 0 and u == 0:
        raise ZeroDivisionError("F1 has a spurious root at u = 0")
    a = mills_lower(u)
    q = u * l1 + theta * a
    s = u + a
    return u * (l1 - theta) ** 2 + u * q * q - a * (theta * theta * s * s - q * q) - u * s * s * l2


def F2(w, r1: float, r2: float, theta: float):
    if np.ndim(w) == 0 and w == 0:
        raise ZeroDivisionError("F2 has a spurious root at omega = 0")
    b = mills_upper(w)
    q = w * r1 - theta * b
    s = w - b
    return w * (r1 - theta) ** 2 + w * q * q + b * (theta * theta * s * s - q * q) - w * s * s * r2


def v_from_u(u: float, l1: float, theta: float) -> float:
    a = mills_lower(u)
    return (u * l1 + theta * a) / (u + a)


def z_from_omega(w: float, r1: float, theta: float) -> float:
    b = mills_upper(w)
    return (w * r1 - theta * b) / (w - b)


def D1(u):
    """Sign factor of the left Jacobian: ``det J1 = -(v-theta)^2 / u^3 * D1(u)``."""
    u = np.asarray(u, dtype=float)
    a = mills_lower(u)
    return a * u ** 3 + 3 * a * u + a ** 3 * u + 2 * a * a * u * u + 3 * a * a - 2


def D2(w):
    """Sign factor of the right Jacobian: ``det J2 = -(theta-z)^2 / w^3 * D2(w)``.

    By the reflection ``X -> -X`` the right system is the left one at
    ``(-w, -z, -theta)``, hence ``D2(w) = D1(-w)``.
    """
    w = np.asarray(w, dtype=float)
    b = mills_upper(w)
    return -b * w ** 3 - 3 * b * w - b ** 3 * w + 2 * b * b * w * w + 3 * b * b - 2


def _side_from_uv(u: float, v: float, theta: float, sigma: float) -> Tuple[float, float]:
    alpha = u * u * sigma * sigma / (2 * (theta - v) ** 2)
    return alpha, v * alpha


def _solve_side(side: str, m1: float, m2: float, theta: float, sigma: float, degenerate_tol: float = DEGENERATE_TOL):
    """Scan, refine and back-substitute one side of the Case III system."""
    if side == "left":
        F, back, Kbar, (lo, hi) = F1, v_from_u, Kbar_left, SCAN_U
    else:
        F, back, Kbar, (lo, hi) = F2, z_from_omega, Kbar_right, SCAN_OMEGA
    f = lambda t: F(t, m1, m2, theta)  # noqa: E731
    brackets = scan_sign_changes(f, lo, -POLE_RADIUS, SCAN_POINTS // 2) + scan_sign_changes(
        f, POLE_RADIUS, hi, SCAN_POINTS // 2
    )
    candidates = []
    for br in brackets:
        try:
            res = find_root(f, br)
        except RootFindingError:
            continue
        t = res.root
        shift = back(t, m1, theta)
        if not math.isfinite(shift) or abs(theta - shift) < 1e-8:
            continue
        k1, k2 = Kbar(t, shift, theta)
        resid = math.hypot((k1 - m1) / max(1.0, abs(m1)), (k2 - m2) / max(1.0, abs(m2)))
        if not resid <= RESIDUAL_TOL:
            # sign change across a pole, not a root
            continue
        candidates.append((resid, t, shift, res.iterations))
    diag = {"roots_found": len(candidates), "brackets": len(brackets), "degenerate": False, "unique": len(candidates) == 1}
    if candidates:
        candidates.sort(key=lambda c: c[0])
        resid, t, shift, its = candidates[0]
        alpha, beta = _side_from_uv(t, shift, theta, sigma)
        diag.update(residual=resid, iterations=its, all_roots=[c[1] for c in candidates])
        return t, shift, alpha, beta, diag
    # Degenerate branch: shift == theta, where the conditional mean is
    # theta -/+ sigma / sqrt(pi alpha).
    gap = theta - m1 if side == "left" else m1 - theta
    if gap <= 0:
        raise EstimationError(f"{side}: conditional mean on the wrong side of theta")
    alpha = sigma * sigma / (math.pi * gap * gap)
    s = sigma / math.sqrt(2 * alpha)
    # second conditional moment of a half-normal anchored at theta
    sign = -1.0 if side == "left" else 1.0
    pred2 = theta * theta + s * s + sign * 2 * theta * s * math.sqrt(2 / math.pi)
    resid = abs(pred2 - m2) / max(1.0, abs(m2))
    diag.update(degenerate=True, residual=resid)
    if not resid <= degenerate_tol:
        raise EstimationError(
            f"{side}: no admissible root of the reduced equation in the scan window and the "
            f"degenerate branch residual {resid:.3g} exceeds {degenerate_tol:g}"
        )
    return 0.0, theta, alpha, theta * alpha, diag



@dataclass
class Case3Solution:
    u_hat: float
    v_hat: float
    omega_hat: float
    z_hat: float
    alpha1_hat: float
    alpha2_hat: float
    beta1_hat: float
    beta2_hat: float
    diagnostics: Dict[str, object]

    @property
    def estimates(self) -> Dict[str, float]:
        return {"alpha1": self.alpha1_hat, "alpha2": self.alpha2_hat, "beta1": self.beta1_hat, "beta2": self.beta2_hat}


def case3_from_ratios(
    l1: float, l2: float, r1: float, r2: float, theta: float, sigma: float, degenerate_tol: float = DEGENERATE_TOL
) -> Case3Solution:
    """Solve Case III from conditional first and second moments on each side.

    When a scan window holds no root, the ``shift == theta`` branch is tried
    and accepted only if it reproduces the second moment to ``degenerate_tol``.
    """
    if theta == 0:
        raise ValueError("Case III requires theta != 0")
    u, v, a1, b1, dl = _solve_side("left", l1, l2, theta, sigma, degenerate_tol)
    w, z, a2, b2, dr = _solve_side("right", r1, r2, theta, sigma, degenerate_tol)
    return Case3Solution(u, v, w, z, a1, a2, b1, b2, {"left": dl, "right": dr})


def estimate_case3(
    stats: ConditionalMomentStats, sigma: float, theta: Optional[float] = None, degenerate_tol: float = DEGENERATE_TOL
) -> Case3Solution:
    theta = stats.theta if theta is None else theta
    if theta != stats.theta:
        raise ValueError("statistics were computed at a different threshold")
    r = moment_ratios(stats, [1, 2])
    return case3_from_ratios(r["left"][1], r["left"][2], r["right"][1], r["right"][2], theta, sigma, degenerate_tol)

"""Special functions and scalar root finding used by the estimators.

Normal tail quantities go through ``scipy.special`` (``ndtr``, ``erfcx``)
so that Mills ratios stay accurate far into either tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy import special

_SQRT_2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

XTOL = 1e-12
FTOL = 1e-12
MAX_ITER = 200


class RootFindingError(RuntimeError):
    """Raised when a bracketed root search cannot complete."""


def normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


def normal_cdf(x):
    """Standard normal CDF, accurate in both tails (erfc based)."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def mills_lower(x):
    """``A(x) = phi(x) / Phi(x)``, the Mills ratio of the lower tail.

    For ``x < 0`` the ratio is formed from the scaled complementary error
    function, ``A(x) = sqrt(2/pi) / erfcx(-x/sqrt(2))``, which avoids the
    0/0 underflow of the naive quotient.
    """
    x = np.asarray(x, dtype=float)
    neg = x < 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        tail = _SQRT_2_OVER_PI / special.erfcx(-np.where(neg, x, 0.0) / _SQRT_2)
        body = _INV_SQRT_2PI * np.exp(-0.5 * x * x) / special.ndtr(np.where(neg, 0.0, x))
    out = np.where(neg, tail, body)
    return out if out.ndim else float(out)


def mills_upper(x):
    """``B(x) = phi(x) / (1 - Phi(x))``; equal to ``mills_lower(-x)``."""
    return mills_lower(-np.asarray(x, dtype=float))


def gamma_fn(a: float) -> float:
    if not a > 0:
        raise ValueError(f"gamma_fn requires a > 0, got {a!r}")
    return float(special.gamma(a))


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bracket needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.f_lo * self.f_hi < 0:
            raise ValueError(
                f"bracket ends must have opposite signs, got f({self.lo})={self.f_lo}, "
                f"f({self.hi})={self.f_hi}"
            )

    @classmethod
    def from_function(cls, f: Callable[[float], float], lo: float, hi: float) -> "Bracket":
        return cls(lo, hi, float(f(lo)), float(f(hi)))


@dataclass(frozen=True)
class RootResult:
    root: float
    f_root: float
    iterations: int
    bracket: Bracket


def find_root(
    f: Callable[[float], float],
    bracket: Bracket,
    xtol: float = XTOL,
    ftol: float = FTOL,
    max_iter: int = MAX_ITER,
) -> RootResult:
    """Safeguarded secant/bisection search inside a sign-change bracket.

    Each step tries a secant (false-position) point. The step falls back to
    bisection when that point leaves the open bracket, or when the bracket
    failed to halve over the previous two steps. Stops as soon as
    ``|f(x)| <= ftol`` or the bracket is narrower than ``xtol``.
    """
    lo, hi, f_lo, f_hi = bracket.lo, bracket.hi, bracket.f_lo, bracket.f_hi
    if not f_lo * f_hi < 0:
        raise RootFindingError("invalid bracket: no sign change")
    widths = [hi - lo, hi - lo]
    for it in range(1, max_iter + 1):
        x = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        width = hi - lo
        if not (lo < x < hi) or width > 0.5 * widths[-2]:
            x = 0.5 * (lo + hi)
        fx = float(f(x))
        if not math.isfinite(fx):
            raise RootFindingError(f"non-finite function value at x={x!r}")
        if abs(fx) <= ftol:
            return RootResult(x, fx, it, bracket)
        if (fx < 0) == (f_lo < 0):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
        widths.append(width)
        if hi - lo <= xtol:
            x, fx = (lo, f_lo) if abs(f_lo) <= abs(f_hi) else (hi, f_hi)
            return RootResult(x, fx, it, bracket)
    raise RootFindingError(f"no convergence after {max_iter} iterations")


def find_root_monotone(
    f: Callable[[float], float],
    bracket: Bracket,
    xtol: float = XTOL,
    ftol: float = FTOL,
    max_iter: int = MAX_ITER,
) -> float:
    return find_root(f, bracket, xtol=xtol, ftol=ftol, max_iter=max_iter).root


def scan_sign_changes(
    f: Callable[[float], float], lo: float, hi: float, n_grid: int
) -> List[Bracket]:
    """All cells of a uniform grid on ``[lo, hi]`` where ``f`` changes sign.

    Grid points where ``f`` is not finite are dropped, so a cell is only
    reported between two neighbouring finite evaluations.
    """
    if not lo < hi or n_grid < 2:
        raise ValueError("scan_sign_changes needs lo < hi and n_grid >= 2")
    grid = np.linspace(lo, hi, n_grid)
    with np.errstate(all="ignore"):
        try:
            values = np.asarray(f(grid), dtype=float)
            if values.shape != grid.shape:
                raise TypeError
        except (TypeError, ValueError, ZeroDivisionError):
            values = np.array([_safe_eval(f, x) for x in grid])
    brackets = []
    prev = None
    for i, fx in enumerate(values):
        if not math.isfinite(fx):
            prev = None
            continue
        x = float(grid[i])
        if fx == 0.0:
            br = _exact_zero_bracket(f, x, (hi - lo) / (n_grid - 1))
            if br is not None:
                brackets.append(br)
            prev = None
            continue
        if prev is not None and prev[1] * fx < 0:
            brackets.append(Bracket(prev[0], x, prev[1], float(fx)))
        prev = (x, float(fx))
    return brackets


def _safe_eval(f, x):
    try:
        return float(f(float(x)))
    except (ZeroDivisionError, ValueError, OverflowError):
        return math.nan


def _exact_zero_bracket(f, x, step):
    # A grid point hit the root exactly; widen slightly to form a bracket.
    for d in (1e-9, 1e-6, 1e-3 * step):
        a, b = float(f(x - d)), float(f(x + d))
        if a * b < 0:
            return Bracket(x - d, x + d, a, b)
    return None

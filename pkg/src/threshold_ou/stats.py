"""Empirical conditional moments below / above a threshold.

``L_n = (1/N) sum g(X_k) 1{X_k <= theta}`` and ``R_n = (1/N) sum X_k^n 1{X_k > theta}``,
with ``g(x) = (-x)^n`` for signed-left statistics (theta = 0 only) and
``g(x) = x^n`` otherwise. Ties at ``theta`` count on the left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ConditionalMomentStats:
    theta: float
    orders: Tuple[float, ...]
    left: Tuple[float, ...]
    right: Tuple[float, ...]
    count_left: int
    count_right: int
    N: int
    signed_left: bool = False

    def moment(self, n: float) -> Tuple[float, float]:
        """``(L_n, R_n)`` for an order that was computed."""
        try:
            i = self.orders.index(float(n))
        except ValueError:
            raise KeyError(f"order {n!r} not computed; have {self.orders}") from None
        return self.left[i], self.right[i]

    def vector(self, orders: Sequence[float]) -> np.ndarray:
        """Stacked ``(L_o1, L_o2, ..., R_o1, R_o2, ...)``."""
        pairs = [self.moment(n) for n in orders]
        return np.array([p[0] for p in pairs] + [p[1] for p in pairs])


def _power(x: np.ndarray, n: float) -> np.ndarray:
    if n == 0:
        return np.ones_like(x)
    if float(n).is_integer():
        return x ** int(n)
    return x ** n


def _compensated_sum(values: np.ndarray) -> float:
    # math.fsum is exactly rounded, so the result does not depend on order.
    return math.fsum(values.tolist())


def empirical_moments(
    series, theta: float, orders: Iterable[float], signed_left: bool = False
) -> ConditionalMomentStats:
    """Conditional moment statistics of an observation series.

    ``series`` is an :class:`~threshold_ou.simulate.ObservationSeries` or any
    1-d array of observations.
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    orders = tuple(float(n) for n in orders)
    if x.size == 0:
        raise ValueError("empty series")
    if not orders:
        raise ValueError("at least one moment order is required")
    if signed_left and theta != 0:
        raise ValueError("signed_left statistics are defined at theta = 0 only")
    if any(n < 0 for n in orders):
        raise ValueError("moment orders must be nonnegative")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    N = x.size
    mask = x <= theta
    xl, xr = x[mask], x[~mask]
    if signed_left:
        xl = -xl
    left, right = [], []
    for n in orders:
        if n == 0:
            left.append(xl.size / N)
            right.append(xr.size / N)
            continue
        if not signed_left and not float(n).is_integer() and (xl.size and xl.min() < 0):
            raise ValueError("non-integer orders of negative observations are undefined")
        left.append(_compensated_sum(_power(xl, n)) / N)
        right.append(_compensated_sum(_power(xr, n)) / N)
    return ConditionalMomentStats(
        float(theta), orders, tuple(left), tuple(right), int(xl.size), int(xr.size), int(N), signed_left
    )


def moment_ratios(stats: ConditionalMomentStats, orders: Sequence[float]) -> Dict[str, Dict[float, float]]:
    """Conditional moments ``L_n / L_0`` and ``R_n / R_0``.

    Raises ``ValueError`` when one side of the threshold holds no data.
    """
    L0, R0 = stats.moment(0)
    if L0 <= 0:
        raise ValueError(f"no observations at or below theta={stats.theta}")
    if R0 <= 0:
        raise ValueError(f"no observations above theta={stats.theta}")
    out = {"left": {}, "right": {}}
    for n in orders:
        L, R = stats.moment(n)
        out["left"][float(n)] = L / L0
        out["right"][float(n)] = R / R0
    return out

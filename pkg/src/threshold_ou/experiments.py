"""Monte Carlo replication harness.

Replication ``r`` always uses stream ``derive_seed(base_seed, r)``. Results
are collected by index and reduced in index order, so the summaries do not
depend on how many worker threads ran the replications.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .asymptotics import estimator_covariance
from .estimators import EstimationError, estimate_case1, estimate_case2, estimate_case3
from .model import TwoRegimeParams
from .numerics import RootFindingError
from .simulate import derive_seed, simulate_path
from .stats import empirical_moments

PARAMS_BY_CASE = {"I": ("alpha1", "alpha2"), "II": ("alpha1", "alpha2"), "III": ("alpha1", "alpha2", "beta1", "beta2")}
ESTIMATION_ERRORS = (EstimationError, RootFindingError, ValueError, ArithmeticError)


@dataclass
class ExperimentConfig:
    params: TwoRegimeParams
    case: str = "I"
    orders: Tuple[float, ...] = (2.0,)
    h: float = 0.5
    N: Tuple[int, ...] = (100_000,)
    replications: int = 100
    base_seed: int = 0
    refine: int = 10
    burn_in: int = 0
    x0: float = 0.0

    def __post_init__(self):
        if isinstance(self.N, int):
            self.N = (self.N,)
        if isinstance(self.orders, (int, float)):
            self.orders = (self.orders,)
        self.N = tuple(int(n) for n in self.N)
        self.orders = tuple(float(n) for n in self.orders)
        if self.case not in PARAMS_BY_CASE:
            raise ValueError(f"case must be one of I, II, III; got {self.case!r}")
        if self.replications < 1 or min(self.N) < 1:
            raise ValueError("need at least one replication and N >= 1")
        if self.case == "I" and (self.params.theta != 0 or self.params.beta1 or self.params.beta2):
            raise ValueError("Case I simulates beta = 0, theta = 0 models only")
        if self.case == "I" and any(not 0 < n <= 8 for n in self.orders):
            raise ValueError("Case I orders must lie in (0, 8]")
        if self.case != "I" and self.params.theta == 0:
            raise ValueError(f"Case {self.case} requires theta != 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["orders"] = list(self.orders)
        d["N"] = list(self.N)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["params"] = TwoRegimeParams(**d["params"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class SummaryRow:
    param: str
    n: Optional[float]
    N: int
    R: int
    mean: float
    std: float
    mse: float
    failures: int


@dataclass
class MCSummary:
    rows: List[SummaryRow]
    replications: int
    estimates: Dict[Tuple[Optional[float], int], np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, param: str, n: Optional[float] = None, N: Optional[int] = None) -> SummaryRow:
        for r in self.rows:
            if r.param == param and (n is None or r.n == n) and (N is None or r.N == N):
                return r
        raise KeyError((param, n, N))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "n", "N", "R", "mean", "std", "mse", "failures"])
        for r in self.rows:
            w.writerow([r.param, _fmt(r.n), r.N, r.R, _fmt(r.mean), _fmt(r.std), _fmt(r.mse), r.failures])
        return buf.getvalue()

    def mse_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "n", "mse"])
        for r in self.rows:
            w.writerow([r.param, _fmt(r.n), _fmt(r.mse)])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _estimate(case: str, x: np.ndarray, p: TwoRegimeParams, n: float) -> np.ndarray:
    if case == "I":
        st = empirical_moments(x, 0.0, (0.0, n), signed_left=True)
        e = estimate_case1(st, p.sigma, n).estimates
        return np.array([e["alpha1"], e["alpha2"]])
    if case == "II":
        st = empirical_moments(x, p.theta, (0, 1))
        sol = estimate_case2(st, p.sigma)
        return np.array([sol.alpha1_hat, sol.alpha2_hat])
    st = empirical_moments(x, p.theta, (0, 1, 2))
    sol = estimate_case3(st, p.sigma)
    return np.array([sol.alpha1_hat, sol.alpha2_hat, sol.beta1_hat, sol.beta2_hat])


def _cells(config: ExperimentConfig) -> List[Tuple[Optional[float], int]]:
    orders = config.orders if config.case == "I" else (None,)
    return [(n, N) for N in config.N for n in orders]


def _replicate(config: ExperimentConfig, r: int) -> Dict[Tuple[Optional[float], int], Optional[np.ndarray]]:
    p = config.params
    series = simulate_path(p, config.x0, config.h, max(config.N), config.refine, derive_seed(config.base_seed, r), config.burn_in)
    out = {}
    for n, N in _cells(config):
        try:
            est = _estimate(config.case, series.values[:N], p, n)
            out[(n, N)] = est if np.all(np.isfinite(est)) else None
        except ESTIMATION_ERRORS:
            out[(n, N)] = None
    return out


def _map_replications(fn, R: int, threads: int):
    if threads <= 1:
        return [fn(r) for r in range(R)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(R)))


def summarize(values: np.ndarray, truth: float) -> Tuple[float, float, float]:
    """Mean, sample std (ddof=1; NaN when R=1) and MSE about ``truth``."""
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if values.size > 1 else math.nan
    mse = float(np.mean((values - truth) ** 2))
    return mean, std, mse


def run_monte_carlo(config: ExperimentConfig, threads: int = 1) -> MCSummary:
    results = _map_replications(lambda r: _replicate(config, r), config.replications, threads)
    names = PARAMS_BY_CASE[config.case]
    truth = asdict(config.params)
    rows, kept = [], {}
    for cell in _cells(config):
        ok = [res[cell] for res in results if res[cell] is not None]
        failures = config.replications - len(ok)
        if not ok:
            raise EstimationError(f"all {config.replications} replications failed for cell n={cell[0]}, N={cell[1]}")
        est = np.vstack(ok)
        kept[cell] = est
        for j, name in enumerate(names):
            mean, std, mse = summarize(est[:, j], truth[name])
            rows.append(SummaryRow(name, cell[0], cell[1], len(ok), mean, std, mse, failures))
    return MCSummary(rows, config.replications, kept)


def mse_vs_order(config: ExperimentConfig, threads: int = 1) -> MCSummary:
    """MSE per order, all orders estimated on the same paths."""
    if config.case != "I":
        raise ValueError("MSE-vs-order runs use Case I")
    return run_monte_carlo(config, threads)


@dataclass
class CoverageResult:
    level: float
    coverage: Dict[str, float]
    z_scores: np.ndarray
    replications: int
    failures: int


def coverage_study(config: ExperimentConfig, level: float = 0.95, threads: int = 1, bandwidth="andrews") -> CoverageResult:
    """Fraction of delta-method intervals that contain the true parameters.

    Uses the first order and first sample size of ``config``. Also returns
    the standardised errors ``(estimate - truth) / stderr`` per replication.
    """
    p = config.params
    names = PARAMS_BY_CASE[config.case]
    truth = np.array([asdict(p)[k] for k in names])
    N, n = config.N[0], config.orders[0]

    def one(r):
        s = simulate_path(p, config.x0, config.h, N, config.refine, derive_seed(config.base_seed, r), config.burn_in)
        try:
            d = estimator_covariance(s, config.case, p.theta, p.sigma, n, bandwidth, level)
        except ESTIMATION_ERRORS:
            return None
        est = d.intervals.mean(axis=1) if level < 1 else _point(config.case, s.values, p, n)
        hit = (d.intervals[:, 0] <= truth) & (truth <= d.intervals[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (est - truth) / d.stderr
        return hit, z

    results = [res for res in _map_replications(one, config.replications, threads) if res is not None]
    if not results:
        raise EstimationError("all replications failed")
    hits = np.array([r[0] for r in results])
    z = np.array([r[1] for r in results])
    cov = {name: float(hits[:, j].mean()) for j, name in enumerate(names)}
    return CoverageResult(level, cov, z, len(results), config.replications - len(results))


def _point(case, x, p, n):
    return _estimate(case, x, p, n)

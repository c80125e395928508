"""Discretely sampled threshold OU paths.

Paths are generated by Euler-Maruyama on an internal grid of ``M`` steps
per observation interval ``h``; every ``M``-th state is recorded.

Random numbers come from numpy's counter-based Philox generator. Stream
``(base_seed, stream_id)`` is ``Philox(SeedSequence(base_seed,
spawn_key=(stream_id,)))``, so it is reproducible across runs and
platforms for a fixed numpy version.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
from scipy import special

from .model import ThresholdOUParams, TwoRegimeParams, invariant_density, stationarity_check

GENERATOR = "numpy.random.Philox(SeedSequence(base_seed, spawn_key=(stream_id,)))"
SCHEME = "euler-maruyama"
CHUNK_OBS = 1 << 15


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.base_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))


def derive_seed(base: int, replication: int) -> SeedSpec:
    if base < 0 or replication < 0:
        raise ValueError("seeds and replication indices must be nonnegative")
    return SeedSpec(int(base), int(replication))


@dataclass(frozen=True)
class ObservationSeries:
    h: float
    values: np.ndarray
    x0: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("sampling step h must be positive")
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("series needs at least one observation")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")

    @property
    def N(self) -> int:
        return int(self.values.size)

    def times(self) -> np.ndarray:
        return self.h * np.arange(1, self.N + 1)

    def head(self, n: int) -> "ObservationSeries":
        return ObservationSeries(self.h, self.values[:n], self.x0, dict(self.meta))


@numba.njit(cache=True, nogil=True)
def _euler_chunk(x, z, n_obs, M, dt, noise_scale, thresholds, alphas, betas, out):
    k = 0
    m = thresholds.shape[0]
    for j in range(n_obs):
        for _ in range(M):
            i = 0
            while i < m and x > thresholds[i]:
                i += 1
            x = x + (betas[i] - alphas[i] * x) * dt + noise_scale * z[k]
            k += 1
        out[j] = x
    return x


class SimulationError(ArithmeticError):
    pass


def simulate_path(
    params,
    x0: float = 0.0,
    h: float = 0.5,
    N: int = 100_000,
    M: int = 10,
    seed: SeedSpec | int = 0,
    burn_in: int = 0,
) -> ObservationSeries:
    """Simulate ``N`` observations ``X_h, ..., X_{Nh}`` after ``burn_in`` discarded ones."""
    p = params.to_general() if isinstance(params, TwoRegimeParams) else params
    if not stationarity_check(p.alphas, p.betas):
        raise ValueError("parameters are not stationary")
    if N < 1 or M < 1 or burn_in < 0:
        raise ValueError("need N >= 1, M >= 1 and burn_in >= 0")
    if not h > 0:
        raise ValueError("h must be positive")
    seed = seed if isinstance(seed, SeedSpec) else derive_seed(int(seed), 0)
    rng = seed.generator()
    dt = h / M
    noise = p.sigma * math.sqrt(dt)
    thr = np.asarray(p.thresholds, dtype=float)
    al = np.asarray(p.alphas, dtype=float)
    be = np.asarray(p.betas, dtype=float)

    total = N + burn_in
    values = np.empty(N)
    scratch = np.empty(min(CHUNK_OBS, total))
    x = float(x0)
    done = 0
    while done < total:
        n_obs = min(CHUNK_OBS, total - done)
        z = rng.standard_normal(n_obs * M)
        x = _euler_chunk(x, z, n_obs, M, dt, noise, thr, al, be, scratch)
        if not math.isfinite(x) or not np.all(np.isfinite(scratch[:n_obs])):
            raise SimulationError("path blew up; check the drift parameters")
        # copy the retained part of this chunk
        keep_from = max(burn_in - done, 0)
        if keep_from < n_obs:
            start = done + keep_from - burn_in
            values[start:start + n_obs - keep_from] = scratch[keep_from:n_obs]
        done += n_obs
    meta = {
        "base_seed": seed.base_seed,
        "stream_id": seed.stream_id,
        "refinement": M,
        "burn_in": burn_in,
        "scheme": SCHEME,
        "generator": GENERATOR,
    }
    return ObservationSeries(float(h), values, float(x0), meta)


def sample_stationary(params, size: int, seed: SeedSpec | int = 0) -> np.ndarray:
    """Independent draws from the invariant density, by regime-wise inverse CDF."""
    p = params.to_general() if isinstance(params, TwoRegimeParams) else params
    seed = seed if isinstance(seed, SeedSpec) else derive_seed(int(seed), 0)
    rng = seed.generator()
    dens = invariant_density(p)
    probs = dens.regime_probabilities()
    probs = probs / probs.sum()
    regimes = rng.choice(p.m, size=size, p=probs)
    u = rng.random(size)
    edges = dens.edges()
    mu, s = p.means(), p.scales()
    out = np.empty(size)
    for i in range(p.m):
        sel = regimes == i
        a, b = (edges[i] - mu[i]) / s[i], (edges[i + 1] - mu[i]) / s[i]
        if a > 0:
            # upper tail: sample the mirrored lower tail for accuracy
            lo, hi = special.ndtr(-b), special.ndtr(-a)
            out[sel] = mu[i] - s[i] * special.ndtri(lo + u[sel] * (hi - lo))
        else:
            lo, hi = special.ndtr(a), special.ndtr(b)
            out[sel] = mu[i] + s[i] * special.ndtri(lo + u[sel] * (hi - lo))
    return out

"""Roughness of a volatility series.

The moment statistic ``m(q, l)`` averages ``|log s_k - log s_{k-l}|^q``.
Under fractional scaling ``log m(q, l Delta)`` is linear in
``log(l Delta)`` with slope ``zeta_q = q H``, so regressing the slopes on q
through the origin gives an estimate of H.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionError

__all__ = ["VolSeries", "RoughnessFit", "m_stat", "zeta_fit", "hurst_estimate", "acf",
           "DEFAULT_Q_GRID"]

DEFAULT_Q_GRID = (0.5, 1.0, 1.5, 2.0, 3.0)


@dataclass(frozen=True)
class VolSeries:
    values: np.ndarray
    delta: float = 1.0
    squared: bool = False  # True when values hold sigma^2

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 3:
            raise DistributionError("volatility series needs at least 3 values")
        if np.any(~(v > 0)):
            raise DistributionError("volatility values must be positive")
        if not self.delta > 0:
            raise DistributionError("delta must be positive")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        """Index of the last observation (values run j = 0..n)."""
        return len(self.values) - 1

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)

    @classmethod
    def from_log(cls, log_values, delta: float = 1.0, squared: bool = False) -> "VolSeries":
        return cls(np.exp(np.asarray(log_values, dtype=float)), delta, squared)


def _m_from_log(lv: np.ndarray, q: float, l: int) -> float:
    d = np.abs(lv[l:] - lv[:-l])
    return float(np.mean(d**q))


def m_stat(vs: VolSeries, q: float, l: int = 1) -> float:
    """Mean of ``|log s_k - log s_{k-l}|^q`` over the available k."""
    if not q > 0:
        raise DistributionError("q must be positive")
    l = int(l)
    if not 1 <= l <= vs.n - 1:
        raise DistributionError(f"lag must lie in [1, {vs.n - 1}]")
    return _m_from_log(vs.log_values, q, l)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = float(np.dot(x - xm, x - xm))
    slope = float(np.dot(x - xm, y - ym)) / sxx
    icpt = float(ym - slope * xm)
    res = y - icpt - slope * x
    sst = float(np.dot(y - ym, y - ym))
    r2 = 1.0 - float(np.dot(res, res)) / sst if sst > 0 else 1.0
    return slope, icpt, r2


def _zeta_from_table(lags: np.ndarray, delta: float, m: np.ndarray):
    if np.any(~(m > 0)):
        raise DistributionError("m(q, l) = 0 for some lag; log-log fit undefined")
    return _ols(np.log(lags * delta), np.log(m))


def zeta_fit(vs: VolSeries, q: float, L: int = 100, return_r2: bool = False):
    """OLS slope and intercept of ``log m(q, l Delta)`` on ``log(l Delta)``, l = 1..L."""
    if L < 2:
        raise DistributionError("need L >= 2")
    if L > vs.n - 1:
        raise DistributionError(f"series too short for L={L}")
    lags = np.arange(1, L + 1)
    lv = vs.log_values
    m = np.array([_m_from_log(lv, q, int(l)) for l in lags])
    slope, icpt, r2 = _zeta_from_table(lags, vs.delta, m)
    return (slope, icpt, r2) if return_r2 else (slope, icpt)


@dataclass
class RoughnessFit:
    q_grid: np.ndarray
    lags: np.ndarray
    delta: float
    m_table: np.ndarray  # shape (len(q_grid), len(lags))
    zeta: np.ndarray
    intercepts: np.ndarray
    r2: np.ndarray
    H_hat: float
    free_fit: dict = field(default_factory=dict)

    @property
    def in_range(self) -> bool:
        return 0.0 < self.H_hat < 1.0

    @classmethod
    def from_table(cls, q_grid, lags, delta, m_table) -> "RoughnessFit":
        q = np.asarray(q_grid, dtype=float)
        lags = np.asarray(lags)
        m_table = np.asarray(m_table, dtype=float)
        fits = [_zeta_from_table(lags, delta, row) for row in m_table]
        zeta = np.array([f[0] for f in fits])
        icpt = np.array([f[1] for f in fits])
        r2 = np.array([f[2] for f in fits])
        H = float(np.dot(q, zeta) / np.dot(q, q))
        if len(q) >= 2:
            s, c, rr = _ols(q, zeta)
            free = {"slope": s, "intercept": c, "r2": rr}
        else:
            free = {}
        return cls(q, lags, delta, m_table, zeta, icpt, r2, H, free)

    def to_dict(self) -> dict:
        return {
            "q_grid": self.q_grid.tolist(),
            "lags": self.lags.tolist(),
            "delta": self.delta,
            "zeta": self.zeta.tolist(),
            "intercepts": self.intercepts.tolist(),
            "r2": self.r2.tolist(),
            "H_hat": self.H_hat,
            "H_in_range": self.in_range,
            "free_intercept_fit": self.free_fit,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def m_rows(self):
        """Long-format rows (q, lag, log_lag_delta, m, log_m) for plotting."""
        for i, q in enumerate(self.q_grid):
            for j, l in enumerate(self.lags):
                m = self.m_table[i, j]
                yield (float(q), int(l), math.log(l * self.delta), float(m), math.log(m))


def hurst_estimate(vs: VolSeries, q_grid=DEFAULT_Q_GRID, L: int = 100) -> RoughnessFit:
    """Fit ``zeta_q`` for each q and regress them on q through the origin."""
    if L > vs.n - 1:
        raise DistributionError(f"series too short for L={L}")
    q = np.asarray(q_grid, dtype=float)
    if q.size == 0 or np.any(~(q > 0)):
        raise DistributionError("q grid must be nonempty and positive")
    lags = np.arange(1, L + 1)
    lv = vs.log_values
    table = np.empty((len(q), L))
    for j, l in enumerate(lags):
        d = np.abs(lv[l:] - lv[:-l])
        for i, qq in enumerate(q):
            table[i, j] = np.mean(d**qq)
    return RoughnessFit.from_table(q, lags, vs.delta, table)


def acf(vs: VolSeries, max_lag: int) -> np.ndarray:
    """Sample autocorrelations of the log-increments at lags 0..max_lag."""
    x = np.diff(vs.log_values)
    if not 0 <= max_lag < len(x):
        raise DistributionError("max_lag must be below the number of increments")
    x = x - x.mean()
    c0 = float(np.dot(x, x))
    if c0 == 0:
        raise DistributionError("constant log-increments have no autocorrelation")
    return np.array([1.0] + [float(np.dot(x[k:], x[:-k])) / c0 for k in range(1, max_lag + 1)])

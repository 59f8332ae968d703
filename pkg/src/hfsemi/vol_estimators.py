"""Integrated and spot volatility estimators.

Covers realized volatility and its truncated (jump-robust) version, local
spot estimators, and the block-minima estimators for prices observed under
one-sided limit order noise, including the Monte Carlo bias-correction
curve ``psi_n``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .distributions import DistributionError
from .process_sim import NoiseSpec, ObservationSeries
from .rng import SeedSpec

__all__ = [
    "IncrementSeries",
    "TruncationSpec",
    "SpotEstimate",
    "BlockMinima",
    "PsiTable",
    "WindowSide",
    "increment_series",
    "realized_volatility",
    "truncated_rv",
    "spot_window_length",
    "spot_vol",
    "spot_vol_adaptive",
    "truncated_spot_vol",
    "block_minima",
    "choose_hn",
    "psi_n",
    "psi_table",
    "default_kn",
    "lomn_spot_vol",
    "lomn_truncated_spot_vol",
    "lomn_block_spot",
    "lomn_variance_constant",
    "taxi_estimators",
    "MAD_TO_SD",
]

MAD_TO_SD = 1.4826
# pi / (2 (pi - 2)): inverse of the half-normal-difference variance 2(1 - 2/pi)
LOMN_SCALE = math.pi / (2.0 * (math.pi - 2.0))


def lomn_variance_constant() -> float:
    """Asymptotic variance factor of the block-minima spot estimator."""
    pi = math.pi
    return (7 * pi**2 / 4 - 2 * pi / 3 - 12) / (pi - 2) ** 2


@dataclass(frozen=True)
class IncrementSeries:
    values: np.ndarray
    dt: float
    source: Optional[ObservationSeries] = None

    @property
    def n(self) -> int:
        return len(self.values)


def increment_series(obs: ObservationSeries) -> IncrementSeries:
    if len(obs.y) < 2:
        raise DistributionError("need at least 2 observations")
    return IncrementSeries(np.diff(obs.y), obs.dt, obs)


@dataclass(frozen=True)
class TruncationSpec:
    """Threshold ``u_n = c_u * pilot_scale * dt**tau``.

    With ``pilot_scale=None`` the scale is estimated robustly from the data
    as ``1.4826 * median(|dX|) / sqrt(dt)``.
    """

    tau: float = 0.49
    c_u: float = 4.0
    pilot_scale: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.tau < 0.5:
            raise DistributionError("tau must lie in (0, 1/2)")
        if not self.c_u > 0:
            raise DistributionError("c_u must be positive")
        if self.pilot_scale is not None and not self.pilot_scale > 0:
            raise DistributionError("pilot_scale must be positive")

    def scale(self, increments: np.ndarray, dt: float) -> float:
        if self.pilot_scale is not None:
            return self.pilot_scale
        return MAD_TO_SD * float(np.median(np.abs(increments))) / math.sqrt(dt)

    def threshold(self, increments: np.ndarray, dt: float) -> float:
        return self.c_u * self.scale(increments, dt) * dt**self.tau


class WindowSide(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    CENTER = "center"


@dataclass(frozen=True)
class SpotEstimate:
    s: float
    value: float
    k_n: int
    alpha_used: float
    raw: Optional[float] = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Integrated volatility


def realized_volatility(obs: ObservationSeries) -> float:
    inc = increment_series(obs)
    return float(np.dot(inc.values, inc.values)) / obs.T


def truncated_rv(obs: ObservationSeries, spec: TruncationSpec = TruncationSpec(),
                 threshold: Optional[float] = None) -> float:
    """Realized volatility over increments with ``|dX| <= u_n``."""
    inc = increment_series(obs)
    u = spec.threshold(inc.values, inc.dt) if threshold is None else threshold
    if not u > 0:
        raise DistributionError("truncation threshold must be positive")
    keep = np.abs(inc.values) <= u
    v = inc.values[keep]
    return float(np.dot(v, v)) / obs.T


# ---------------------------------------------------------------------------
# Spot volatility


def spot_window_length(n: int, alpha: float) -> int:
    """``k_n = round(n^{2 alpha / (2 alpha + 1)})`` clipped to [2, n]."""
    if not alpha > 0:
        raise DistributionError("alpha must be positive")
    k = int(round(n ** (2 * alpha / (2 * alpha + 1))))
    return min(max(k, 2), n)


def _window(n: int, anchor: int, k: int, side: WindowSide) -> slice:
    side = WindowSide(side)
    if side is WindowSide.RIGHT:
        lo = anchor
    elif side is WindowSide.LEFT:
        lo = anchor - k
    else:
        lo = anchor - k // 2
    return slice(max(lo, 0), min(lo + k, n))


def _spot(sq: np.ndarray, dt: float, s: float, T0: float, T: float, k: int,
          alpha: float, side) -> SpotEstimate:
    n = len(sq)
    if not T0 < s < T0 + T:
        raise DistributionError(f"s must lie inside the observation window, got {s}")
    anchor = int(math.floor((s - T0) / dt + 1e-9))
    w = _window(n, anchor, k, side)
    used = w.stop - w.start
    if used < 1:
        raise DistributionError("empty spot window")
    value = float(np.sum(sq[w])) / (used * dt)
    return SpotEstimate(s, value, k, alpha, extra={"window": [w.start, w.stop]})


def spot_vol(obs: ObservationSeries, s: float, alpha: float = 0.5,
             side: WindowSide = WindowSide.RIGHT, k_n: Optional[int] = None) -> SpotEstimate:
    """Local average of rescaled squared increments around time ``s``.

    The default window holds the ``k_n`` increments right after ``s``;
    ``side`` mirrors or centres it, and windows are cut at the grid edges.
    """
    if not 0 < alpha <= 1:
        raise DistributionError("alpha must lie in (0, 1]")
    inc = increment_series(obs)
    k = spot_window_length(inc.n, alpha) if k_n is None else int(k_n)
    return _spot(inc.values**2, inc.dt, s, float(obs.times[0]), obs.T, k, alpha, side)


def spot_vol_adaptive(obs: ObservationSeries, s: float, alpha_hat: float,
                      side: WindowSide = WindowSide.RIGHT) -> SpotEstimate:
    """Spot estimator with the window built from an estimated regularity."""
    return spot_vol(obs, s, alpha_hat, side)


def truncated_spot_vol(obs: ObservationSeries, s: float, alpha: float = 0.5,
                       spec: TruncationSpec = TruncationSpec(),
                       side: WindowSide = WindowSide.RIGHT,
                       threshold: Optional[float] = None) -> SpotEstimate:
    if not 0 < alpha <= 1:
        raise DistributionError("alpha must lie in (0, 1]")
    inc = increment_series(obs)
    u = spec.threshold(inc.values, inc.dt) if threshold is None else threshold
    sq = np.where(np.abs(inc.values) <= u, inc.values**2, 0.0)
    k = spot_window_length(inc.n, alpha)
    est = _spot(sq, inc.dt, s, float(obs.times[0]), obs.T, k, alpha, side)
    est.extra["threshold"] = u
    return est


# ---------------------------------------------------------------------------
# Block minima under LOMN


@dataclass(frozen=True)
class BlockMinima:
    h_n: float
    minima: np.ndarray
    nh_n: int
    n: int

    @property
    def n_blocks(self) -> int:
        return len(self.minima)

    @property
    def scaled_differences(self) -> np.ndarray:
        """``h_n^{-1/2} (m_k - m_{k-1})`` for k = 1 .. B-1."""
        return np.diff(self.minima) / math.sqrt(self.h_n)


def block_minima(obs: ObservationSeries, h_n: float) -> BlockMinima:
    """Minima of ``y`` over blocks ``{k nh, ..., (k+1) nh - 1}``.

    The partition uses the first ``n`` of the ``n + 1`` observations, so
    each block starts at its left grid point ``k h_n``.
    """
    n = obs.n
    B = 1.0 / h_n
    nb = int(round(B))
    if abs(B - nb) > 1e-9 * B or n % nb:
        raise DistributionError(
            f"h_n={h_n} does not split n={n} into whole blocks; use choose_hn"
        )
    nh = n // nb
    m = obs.y[: nb * nh].reshape(nb, nh).min(axis=1)
    return BlockMinima(1.0 / nb, m, nh, n)


def _divisors(n: int) -> np.ndarray:
    small = [d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0]
    return np.array(sorted(set(small + [n // d for d in small])))


def choose_hn(n: int, mode: str = "balanced", c_h: Optional[float] = None,
              return_info: bool = False, rel_tol: float = 0.25):
    """Block length for the block-minima estimators.

    ``balanced`` targets ``h^{-1} = n^{2/3} / c_h`` with default
    ``c_h = 2 log(2 n^{2/3})``; ``test`` solves the fixed point
    ``h = 2 log(2/h - 2) n^{-2/3}``. The number of blocks is then moved to the
    nearest divisor of ``n``.
    """
    n23 = n ** (2.0 / 3.0)
    if mode == "balanced":
        if c_h is None:
            c_h = 2.0 * math.log(2.0 * n23)
        target = n23 / c_h
        residual = None
    elif mode == "test":
        h = 1.0 / n23
        for _ in range(25):
            h = 2.0 * math.log(2.0 / h - 2.0) / n23
        residual = abs(h - 2.0 * math.log(2.0 / h - 2.0) / n23) / h
        target = 1.0 / h
    else:
        raise DistributionError(f"unknown mode {mode!r}")
    if target < 2:
        raise DistributionError(f"n={n} too small for at least two blocks")
    divs = _divisors(n)
    divs = divs[(divs >= 2) & (divs < n)]
    if len(divs) == 0:
        raise DistributionError(f"n={n} admits no block partition; trim n")
    nb = int(divs[np.argmin(np.abs(divs - target))])
    if abs(nb - target) > rel_tol * target:
        raise DistributionError(
            f"no block count dividing n={n} within {rel_tol:.0%} of {target:.1f}; "
            f"trim the sample to a highly composite length"
        )
    h_n = 1.0 / nb
    if return_info:
        return h_n, {"target_blocks": target, "blocks": nb, "fixed_point_residual": residual}
    return h_n


# ---------------------------------------------------------------------------
# psi_n


@dataclass(frozen=True)
class PsiTable:
    """``psi_n`` tabulated on a sigma^2 grid, with monotone inversion."""

    sigma2: np.ndarray
    values: np.ndarray
    n: int
    h_n: float
    noise: NoiseSpec
    mc_paths: int

    def __call__(self, s2):
        s2 = np.asarray(s2, dtype=float)
        out = np.interp(s2, self.sigma2, self.values)
        lo, hi = self.sigma2[0], self.sigma2[-1]
        # proportional extrapolation outside the grid
        out = np.where(s2 < lo, s2 * self.values[0] / lo, out)
        out = np.where(s2 > hi, s2 * self.values[-1] / hi, out)
        return float(out) if out.ndim == 0 else out

    def invert(self, target):
        """Solve ``psi(v) = target`` for v by bisection on the interpolant."""
        target = np.atleast_1d(np.asarray(target, dtype=float))
        lo = np.zeros_like(target)
        hi = np.maximum(target * 4.0 / max(self.values[-1] / self.sigma2[-1], 1e-12),
                        self.sigma2[-1]) + 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-13 * np.maximum(hi, 1e-300)):
                break
        out = 0.5 * (lo + hi)
        return float(out[0]) if out.size == 1 else out


def _psi_sim(sigmas: np.ndarray, n: int, nh: int, noise: NoiseSpec, M: int,
             seed: SeedSpec, chunk: int = 2000) -> np.ndarray:
    acc = np.zeros(len(sigmas))
    done = 0
    sd = 1.0 / math.sqrt(n)
    c = 0
    while done < M:
        m = min(chunk, M - done)
        rng = seed.child(c).generator()
        # forward block starts at the boundary point, backward block ends there
        f = np.cumsum(rng.standard_normal((m, nh)) * sd, axis=1)
        f = np.concatenate((np.zeros((m, 1)), f[:, :-1]), axis=1)
        b = np.cumsum(rng.standard_normal((m, nh)) * sd, axis=1)
        ef = noise.draw(m * nh, rng).reshape(m, nh)
        eb = noise.draw(m * nh, rng).reshape(m, nh)
        for i, s in enumerate(sigmas):
            d = (s * f + ef).min(axis=1) - (s * b + eb).min(axis=1)
            acc[i] += float(np.dot(d, d))
        done += m
        c += 1
    h = nh / n
    return acc / M / h


@lru_cache(maxsize=64)
def _psi_cached(sigma2: tuple, n: int, nh: int, noise: NoiseSpec, M: int,
                seed: SeedSpec) -> tuple:
    sig = np.sqrt(np.asarray(sigma2))
    return tuple(_psi_sim(sig, n, nh, noise, M, seed).tolist())


def psi_n(sigma2: float, n: int, h_n: float, noise: NoiseSpec, mc_paths: int = 10_000,
          seed: SeedSpec = SeedSpec(0, (0x5051,))) -> float:
    """Monte Carlo value of ``psi_n(sigma^2)``.

    ``psi_n(s2) = h^{-1} E[(min_{i<nh}(s B_{i/n} + e_i) - min_{1<=i<=nh}(s B~_{i/n} + e~_i))^2]``
    with independent Brownian motions and independent noise draws on the two
    neighbouring blocks.
    """
    nh = int(round(n * h_n))
    if sigma2 < 0:
        raise DistributionError("sigma^2 must be nonnegative")
    return _psi_cached((float(sigma2),), n, nh, noise, int(mc_paths), seed)[0]


def psi_table(n: int, h_n: float, noise: NoiseSpec, sigma2_grid=None, *,
              center: float = 1.0, nodes: int = 33, mc_paths: int = 10_000,
              seed: SeedSpec = SeedSpec(0, (0x5051,))) -> PsiTable:
    """Tabulate ``psi_n`` with common random numbers across the grid.

    The default grid is geometric on ``[center/4, 4 center]``.
    """
    if sigma2_grid is None:
        sigma2_grid = np.geomspace(center / 4.0, center * 4.0, nodes)
    grid = tuple(float(g) for g in np.asarray(sigma2_grid))
    nh = int(round(n * h_n))
    vals = _psi_cached(grid, n, nh, noise, int(mc_paths), seed)
    vals = np.maximum.accumulate(np.asarray(vals))
    return PsiTable(np.asarray(grid), vals, n, h_n, noise, int(mc_paths))


# ---------------------------------------------------------------------------
# LOMN spot volatility


def default_kn(h_n: float, alpha: float = 0.5, delta: float = 0.1, c_k: float = 1.0,
               available: Optional[int] = None) -> int:
    """``K_n = C_K h^{delta - 2 alpha/(1 + 2 alpha)}`` clipped to [10, available]."""
    k = int(round(c_k * h_n ** (delta - 2 * alpha / (1 + 2 * alpha))))
    k = max(k, 10)
    if available is not None:
        k = min(k, available)
    return k


def _window_terms(minima: BlockMinima, tau: float, K_n: int) -> np.ndarray:
    if K_n < 2:
        raise DistributionError("K_n must be >= 2")
    if not 0 < tau <= 1:
        raise DistributionError("tau must lie in (0, 1]")
    B = minima.n_blocks
    top = int(math.floor(B * tau + 1e-9))
    if top < K_n + 1:
        raise DistributionError(
            f"only {top} blocks before tau={tau}; need K_n + 1 = {K_n + 1}"
        )
    lo = max(top - K_n, 1)
    hi = min(top - 1, B - 1)
    # d[k-1] = h^{-1/2}(m_k - m_{k-1})
    return minima.scaled_differences[lo - 1: hi]


def _lomn_threshold(d: np.ndarray, h_n: float, spec: TruncationSpec) -> float:
    scale = spec.pilot_scale if spec.pilot_scale is not None else (
        MAD_TO_SD * float(np.median(np.abs(d))))
    return spec.c_u * scale * h_n ** (spec.tau - 0.5)


def _finish(minima: BlockMinima, tau: float, terms: np.ndarray, psi: Optional[PsiTable],
            K_n: int, extra: dict) -> SpotEstimate:
    raw = LOMN_SCALE * float(np.mean(terms**2)) if len(terms) else 0.0
    if isinstance(psi, NoiseSpec):
        # auto grid [raw/4, 4 raw] around the raw value
        psi = psi_table(minima.n, minima.h_n, psi, center=max(raw, 1e-12))
    if psi is None:
        corrected = raw
    elif raw == 0.0:
        corrected = 0.0
    else:
        corrected = psi.invert(raw / LOMN_SCALE)
    extra = dict(extra, terms=len(terms), corrected=psi is not None)
    return SpotEstimate(tau, corrected, K_n, 0.5, raw=raw, extra=extra)


def lomn_spot_vol(minima: BlockMinima, tau: float, K_n: Optional[int] = None,
                  psi: Optional[PsiTable] = None) -> SpotEstimate:
    """Block-minima spot estimator with optional ``psi_n`` bias correction.

    The raw value averages ``pi/(2(pi-2)) h^{-1}(m_k - m_{k-1})^2`` over the
    ``K_n`` blocks before ``tau`` (the actual number of summed terms is used
    as divisor). With a ``psi`` table, the corrected value ``v`` solves
    ``pi/(2(pi-2)) psi(v) = raw``.
    """
    if K_n is None:
        K_n = default_kn(minima.h_n, available=minima.n_blocks - 1)
    terms = _window_terms(minima, tau, K_n)
    return _finish(minima, tau, terms, psi, K_n, {})


def lomn_truncated_spot_vol(minima: BlockMinima, tau: float, K_n: Optional[int] = None,
                            psi: Optional[PsiTable] = None,
                            trunc: TruncationSpec = TruncationSpec(),
                            threshold: Optional[float] = None) -> SpotEstimate:
    """Jump-robust variant: scaled differences above the threshold are zeroed.

    The threshold is ``c_u * scale * h^{tau - 1/2}`` on the scale of
    ``h^{-1/2}|m_k - m_{k-1}|``, with a MAD-based scale over all blocks.
    """
    if K_n is None:
        K_n = default_kn(minima.h_n, available=minima.n_blocks - 1)
    terms = _window_terms(minima, tau, K_n)
    u = _lomn_threshold(minima.scaled_differences, minima.h_n, trunc) if threshold is None else threshold
    terms = np.where(np.abs(terms) <= u, terms, 0.0)
    return _finish(minima, tau, terms, psi, K_n, {"threshold": u})


def lomn_block_spot(minima: BlockMinima, K_n: Optional[int] = None,
                    psi: Optional[PsiTable] = None,
                    trunc: Optional[TruncationSpec] = TruncationSpec()) -> np.ndarray:
    """Per-difference spot estimates for k = 1 .. B-1.

    Each uses the ``K_n`` nearest scaled differences other than its own
    (centred, shifted at the edges), truncated unless ``trunc`` is None.
    ``K_n`` defaults to all remaining differences.
    """
    d = minima.scaled_differences
    m = len(d)
    if m < 3:
        raise DistributionError("need at least 3 blocks")
    if K_n is None:
        # all other differences: the short default window inflates the
        # size of the block-minima Gumbel test badly
        K_n = m - 1
    K_n = min(int(K_n), m - 1)
    sq = d**2
    if trunc is not None:
        u = _lomn_threshold(d, minima.h_n, trunc)
        sq = np.where(np.abs(d) <= u, sq, 0.0)
    cs = np.concatenate(([0.0], np.cumsum(sq)))
    j = np.arange(m)
    lo = np.clip(j - K_n // 2, 0, m - K_n - 1)
    hi = lo + K_n + 1
    raw = LOMN_SCALE * (cs[hi] - cs[lo] - sq) / K_n
    if psi is None:
        return raw
    return np.asarray(psi.invert(raw / LOMN_SCALE), dtype=float).reshape(m)


# ---------------------------------------------------------------------------
# Taxi problem


def taxi_estimators(sample) -> tuple[float, float, float]:
    """Method of moments, maximum likelihood and UMVU estimates of a
    uniform upper boundary."""
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise DistributionError("empty sample")
    if np.any(x < 0):
        raise DistributionError("taxi sample must be nonnegative")
    n = x.size
    mx = float(x.max())
    return 2.0 * float(x.mean()), mx, (n + 1) * mx / n

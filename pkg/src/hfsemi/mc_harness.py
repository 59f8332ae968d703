"""Monte Carlo studies.

Replications are grouped in fixed-size chunks; chunk c draws from the
substream ``seed.child(c)``. Because the chunking does not depend on the
number of workers and results are concatenated in chunk order, a study is
bit-identical whether it runs serially or in a process pool.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats as sps

from . import distributions as dist
from .distributions import DistributionError
from .jump_tests import (
    exp_gap_statistic,
    gumbel_statistic,
    lomn_gumbel_test,
    max_statistic,
    normalize_matrix,
    renyi_statistic,
)
from .process_sim import GridSpec, NoiseSpec, observe, simulate_bm
from .rng import SeedSpec
from .vol_estimators import (
    block_minima,
    choose_hn,
    lomn_block_spot,
    lomn_spot_vol,
    lomn_variance_constant,
    psi_table,
    taxi_estimators,
)

__all__ = [
    "ExperimentSpec",
    "McSummary",
    "SizePowerTable",
    "DEFAULT_PERCENTILES",
    "STATISTICS",
    "run_statistic_study",
    "run_statistic_studies",
    "run_size_power",
    "check_reflection",
    "check_mixed_halfnormal",
    "check_rv_clt",
    "check_lomn_clt",
    "run_taxi",
    "wilson_interval",
]

DEFAULT_PERCENTILES = tuple(round(0.90 + 0.01 * j, 2) for j in range(10))
STATISTICS = ("gumbel_centered", "exp_gap_r1", "renyi_maxgap")
DESK_R = 100_000
FULL_R = 1_000_000


@dataclass(frozen=True)
class ExperimentSpec:
    experiment_id: str
    n: int
    R: int = DESK_R
    seed: SeedSpec = SeedSpec()
    params: dict = field(default_factory=dict)
    statistic: str = "renyi_maxgap"
    percentiles: tuple = DEFAULT_PERCENTILES
    bins: int = 60
    chunk: int = 1000

    def __post_init__(self):
        if self.R < 1:
            raise DistributionError("R must be >= 1")
        p = np.asarray(self.percentiles, dtype=float)
        if p.size == 0 or np.any((p <= 0) | (p >= 1)) or np.any(np.diff(p) <= 0):
            raise DistributionError("percentiles must be strictly increasing in (0, 1)")
        if self.chunk < 1:
            raise DistributionError("chunk must be >= 1")

    def to_dict(self) -> dict:
        return {"experiment_id": self.experiment_id, "n": self.n, "R": self.R,
                "seed": self.seed.lineage(), "params": dict(self.params),
                "statistic": self.statistic, "percentiles": list(self.percentiles),
                "bins": self.bins, "chunk": self.chunk}


@dataclass
class McSummary:
    experiment_id: str
    R: int
    percentiles: np.ndarray
    empirical: np.ndarray
    theoretical: Optional[np.ndarray]
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    moments: dict
    wall_clock: float
    seed: dict
    extra: dict = field(default_factory=dict)

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical - self.theoretical)))

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()
        return {
            "experiment_id": self.experiment_id, "R": self.R,
            "percentiles": arr(self.percentiles), "empirical": arr(self.empirical),
            "theoretical": arr(self.theoretical),
            "hist_edges": arr(self.hist_edges), "hist_counts": arr(self.hist_counts),
            "moments": self.moments, "wall_clock": self.wall_clock, "seed": self.seed,
            "extra": self.extra,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write(self, out_dir: str, stem: Optional[str] = None) -> dict:
        """Write ``<stem>.json``, ``<stem>_qq.csv`` and ``<stem>_hist.csv``."""
        os.makedirs(out_dir, exist_ok=True)
        stem = stem or self.experiment_id.replace("/", "_")
        paths = {"json": os.path.join(out_dir, f"{stem}.json")}
        with open(paths["json"], "w") as fh:
            fh.write(self.to_json(indent=2))
        if len(self.percentiles):
            paths["qq"] = os.path.join(out_dir, f"{stem}_qq.csv")
            with open(paths["qq"], "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["percentile", "theoretical", "empirical"])
                theo = self.theoretical if self.theoretical is not None else [math.nan] * len(self.percentiles)
                for p, t, e in zip(self.percentiles, theo, self.empirical):
                    w.writerow([f"{p:.17g}", f"{t:.17g}", f"{e:.17g}"])
        if len(self.hist_counts):
            paths["hist"] = os.path.join(out_dir, f"{stem}_hist.csv")
            with open(paths["hist"], "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["left", "right", "count"])
                for a, b, c in zip(self.hist_edges[:-1], self.hist_edges[1:], self.hist_counts):
                    w.writerow([f"{a:.17g}", f"{b:.17g}", int(c)])
        return paths


# ---------------------------------------------------------------------------
# Chunked execution


def _chunks(R: int, chunk: int):
    return [(c, min(chunk, R - c * chunk)) for c in range((R + chunk - 1) // chunk)]


def _run_chunks(fn: Callable, args: tuple, R: int, chunk: int, seed: SeedSpec,
                workers: int = 1) -> list:
    jobs = _chunks(R, chunk)
    if workers <= 1 or len(jobs) == 1:
        return [fn(args, m, seed.child(c)) for c, m in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(fn, args, m, seed.child(c)) for c, m in jobs]
        return [f.result() for f in futs]


def _summarize(experiment_id: str, values: np.ndarray, percentiles, theoretical,
               bins: int, seed: SeedSpec, t0: float, extra=None) -> McSummary:
    values = np.asarray(values, dtype=float)
    p = np.asarray(percentiles, dtype=float)
    emp = np.quantile(values, p) if len(p) else np.array([])
    counts, edges = np.histogram(values, bins=bins)
    R = len(values)
    sd = float(values.std(ddof=1)) if R > 1 else 0.0
    moments = {"mean": [float(values.mean()), sd / math.sqrt(R)],
               "variance": [sd**2, sd**2 * math.sqrt(2.0 / max(R - 1, 1))]}
    return McSummary(experiment_id, R, p, emp, theoretical, edges, counts, moments,
                     time.perf_counter() - t0, seed.lineage(), extra or {})


# ---------------------------------------------------------------------------
# Limit-law studies


def theoretical_quantiles(statistic: str, percentiles) -> np.ndarray:
    p = np.asarray(percentiles, dtype=float)
    if statistic == "gumbel_centered":
        return np.array([dist.gumbel_quantile(q) for q in p])
    if statistic == "exp_gap_r1":
        return np.array([dist.exp_gap_quantile(q, 1) for q in p])
    if statistic == "renyi_maxgap":
        return np.array([dist.deheuvels_quantile(q, one_sided=False) for q in p])
    raise DistributionError(f"unknown statistic {statistic!r}")


_STAT_FN = {"gumbel_centered": max_statistic, "exp_gap_r1": exp_gap_statistic,
            "renyi_maxgap": renyi_statistic}


def _stat_chunk(args, m, seed):
    n, names, pipeline, alpha = args
    rng = seed.generator()
    z = rng.standard_normal((m, n))
    if pipeline:
        # n increments of a unit-volatility BM on [0, 1], normalized by local estimates
        z, _ = normalize_matrix(z / math.sqrt(n), 1.0 / n, alpha)
    return np.stack([_STAT_FN[s](z) for s in names])


def run_statistic_studies(spec: ExperimentSpec, statistics=STATISTICS,
                          workers: int = 1) -> dict:
    """Several limit-law studies sharing the same simulated samples.

    Samples are i.i.d. standard normals of size n, or with
    ``params['pipeline']`` the normalized increments of simulated Brownian
    paths.
    """
    for s in statistics:
        if s not in _STAT_FN:
            raise DistributionError(f"unknown statistic {s!r}")
    t0 = time.perf_counter()
    pipeline = bool(spec.params.get("pipeline", False))
    alpha = float(spec.params.get("alpha", 1.0))
    parts = _run_chunks(_stat_chunk, (spec.n, tuple(statistics), pipeline, alpha),
                        spec.R, spec.chunk, spec.seed, workers)
    allv = np.concatenate(parts, axis=1)
    out = {}
    for i, s in enumerate(statistics):
        theo = theoretical_quantiles(s, spec.percentiles)
        out[s] = _summarize(f"{spec.experiment_id}/{s}", allv[i], spec.percentiles, theo,
                            spec.bins, spec.seed, t0,
                            extra={"n": spec.n, "statistic": s, "pipeline": pipeline})
    return out


def run_statistic_study(spec: ExperimentSpec, workers: int = 1) -> McSummary:
    return run_statistic_studies(spec, (spec.statistic,), workers)[spec.statistic]


# ---------------------------------------------------------------------------
# Size and power


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = sps.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class SizePowerTable:
    test_id: str
    alpha: float
    R: int
    jump_sizes: np.ndarray
    rejections: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return self.rejections / self.R

    def intervals(self, level: float = 0.95):
        return [wilson_interval(k, self.R, level) for k in self.rejections]

    def rows(self):
        for b, k, (lo, hi) in zip(self.jump_sizes, self.rejections, self.intervals()):
            yield {"jump": float(b), "rate": k / self.R, "wilson_low": lo, "wilson_high": hi,
                   "rejections": int(k)}

    def to_dict(self) -> dict:
        return {"test_id": self.test_id, "alpha": self.alpha, "R": self.R,
                "rows": list(self.rows()), "extra": self.extra}


_BM_TESTS = ("gumbel", "renyi", "exp_gap")


def _size_power_chunk(args, m, seed):
    n, test_id, grid, alpha, trunc_alpha = args
    rng = seed.generator()
    base = rng.standard_normal((m, n)) / math.sqrt(n)
    where = rng.integers(0, n, size=m)
    crit = {"gumbel": dist.gumbel_quantile(1 - alpha),
            "renyi": dist.deheuvels_quantile(1 - alpha, one_sided=False),
            "exp_gap": dist.exp_gap_quantile(1 - alpha, 1)}[test_id]
    fn = {"gumbel": gumbel_statistic, "renyi": renyi_statistic,
          "exp_gap": exp_gap_statistic}[test_id]
    out = np.zeros(len(grid), dtype=np.int64)
    rows = np.arange(m)
    for g, b in enumerate(grid):
        inc = base.copy()
        inc[rows, where] += b
        z, _ = normalize_matrix(inc, 1.0 / n, trunc_alpha)
        out[g] = int(np.sum(fn(z) > crit))
    return out


def _lomn_chunk(args, m, seed):
    n, grid, alpha, eta = args
    noise = NoiseSpec.lomn_exponential(eta)
    h = choose_hn(n, "test")
    out = np.zeros(len(grid), dtype=np.int64)
    g = GridSpec(n)
    for i in range(m):
        s = seed.child(i)
        path = simulate_bm(g, s.child(0))
        obs = observe(path, noise, s.child(1))
        tau = float(s.child(2).generator().random())
        for k, b in enumerate(grid):
            y = obs.y + np.where(obs.times >= tau, b, 0.0) if b else obs.y
            o = type(obs)(obs.times, y, noise)
            bm = block_minima(o, h)
            rep = lomn_gumbel_test(bm, lomn_block_spot(bm), alpha)
            out[k] += rep.reject
    return out


def run_size_power(spec: ExperimentSpec, test_id: str, jump_grid, alpha: float = 0.05,
                   workers: int = 1) -> SizePowerTable:
    """Rejection rates on unit-volatility Brownian paths with one injected jump.

    Every replication uses the same base path and jump location for all
    grid sizes (common random numbers); the jump-0 row is the size.
    ``test_id`` is one of gumbel, renyi, exp_gap or lomn_gumbel (the last on
    paths observed with exponential limit order noise of rate
    ``params['eta']``).
    """
    grid = np.asarray(jump_grid, dtype=float)
    if test_id in _BM_TESTS:
        args = (spec.n, test_id, tuple(grid), alpha, float(spec.params.get("alpha", 1.0)))
        parts = _run_chunks(_size_power_chunk, args, spec.R, spec.chunk, spec.seed, workers)
    elif test_id == "lomn_gumbel":
        args = (spec.n, tuple(grid), alpha, float(spec.params.get("eta", 10.0)))
        parts = _run_chunks(_lomn_chunk, args, spec.R, spec.chunk, spec.seed, workers)
    else:
        raise DistributionError(f"unknown test {test_id!r}")
    rej = np.sum(parts, axis=0)
    return SizePowerTable(test_id, alpha, spec.R, grid, rej, {"n": spec.n, "seed": spec.seed.lineage()})


# ---------------------------------------------------------------------------
# Reflection principle


def _minima_chunk(args, m, seed):
    steps, = args
    rng = seed.generator()
    out = np.empty((m, 2))
    sub = 250  # rows per batch, bounds memory at steps * sub doubles
    for a in range(0, m, sub):
        b = min(a + sub, m)
        w = np.cumsum(rng.standard_normal((b - a, steps)), axis=1) / math.sqrt(steps)
        out[a:b, 0] = np.minimum(w.min(axis=1), 0.0)
        out[a:b, 1] = w[:, -1]
    return out


def check_reflection(R: int, xs, seed: SeedSpec = SeedSpec(), y: Optional[float] = 0.0,
                     steps: int = 10_000, chunk: int = 1000, workers: int = 1) -> McSummary:
    """Empirical ``P(min B <= x)`` and ``P(min B <= x, B_1 <= y)`` on a
    discretized Brownian motion against ``2 Phi(x)`` and ``2 Phi(x) - Phi(2x - y)``.

    The discrete minimum misses excursions between grid points, so the
    empirical probabilities sit below the continuous ones by O(steps^{-1/2}).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs >= 0):
        raise DistributionError("reflection checks need x < 0")
    if y is not None and np.any(xs > y):
        raise DistributionError("joint check needs x <= y")
    t0 = time.perf_counter()
    mv = np.concatenate(_run_chunks(_minima_chunk, (steps,), R, chunk, seed, workers))
    mn, last = mv[:, 0], mv[:, 1]
    emp = [float(np.mean(mn <= x)) for x in xs]
    theo = [2 * dist.normal_cdf(x) for x in xs]
    extra = {"x": xs.tolist(), "steps": steps}
    if y is not None:
        extra["joint_y"] = y
        extra["joint_empirical"] = [float(np.mean((mn <= x) & (last <= y))) for x in xs]
        extra["joint_theoretical"] = [2 * dist.normal_cdf(x) - dist.normal_cdf(2 * x - y) for x in xs]
    s = _summarize("reflection", mn, [], None, 60, seed, t0, extra)
    s.empirical = np.array(emp)
    s.theoretical = np.array(theo)
    s.percentiles = np.array([])
    return s


# ---------------------------------------------------------------------------
# Mixed half-normal limit of block minima


def _mhn_chunk(args, m, seed):
    n, nh, sigma, noise = args
    out = []
    g = GridSpec(n)
    for i in range(m):
        s = seed.child(i)
        path = simulate_bm(g, s.child(0))
        x = sigma * path.x
        y = x + noise.draw(n + 1, s.child(1))
        nb = n // nh
        mins = y[: nb * nh].reshape(nb, nh).min(axis=1)
        out.append(-(mins - x[: nb * nh: nh]) / math.sqrt(nh / n))
    return np.concatenate(out)


def check_mixed_halfnormal(R: int, n: int, h_n: float, sigma: float, noise: NoiseSpec,
                           seed: SeedSpec = SeedSpec(), chunk: int = 50,
                           workers: int = 1) -> McSummary:
    """Moments of ``-h^{-1/2}(m_k - X_{k h})`` pooled over blocks and paths.

    The limit is half-normal with mean ``sigma sqrt(2/pi)`` and variance
    ``sigma^2 (1 - 2/pi)``.
    """
    nh = int(round(n * h_n))
    if n * h_n**1.5 < 50:
        raise DistributionError(f"need n h_n^{{3/2}} >= 50, got {n * h_n**1.5:.3g}")
    t0 = time.perf_counter()
    e = np.concatenate(_run_chunks(_mhn_chunk, (n, nh, sigma, noise), R, chunk, seed, workers))
    mean_th, var_th = dist.halfnormal_moments()
    mean_th *= sigma
    var_th *= sigma**2
    s = _summarize("mixed_halfnormal", e, [], None, 60, seed, t0)
    mu = float(e.mean())
    var = float(e.var(ddof=1))
    s.moments.update({
        "mean_ratio": mu / mean_th,
        "var_over_mean2": var / mu**2,
        "var_over_mean2_theory": (math.pi - 2) / 2,
        "theory_mean": mean_th, "theory_var": var_th,
    })
    s.extra = {"n": n, "h_n": h_n, "nh": nh, "sigma": sigma, "noise": noise.describe(),
               "blocks_pooled": len(e)}
    return s


# ---------------------------------------------------------------------------
# Realized volatility CLT


def _rv_chunk(args, m, seed):
    n, sigma = args
    rng = seed.generator()
    z = rng.standard_normal((m, n)) * (sigma / math.sqrt(n))
    return np.einsum("ij,ij->i", z, z)


def check_rv_clt(R: int, n: int, sigma: float = 1.0, seed: SeedSpec = SeedSpec(),
                 chunk: int = 500, workers: int = 1) -> McSummary:
    """Sample variances of ``sqrt(n)(RV - sigma^2)`` (limit ``2 sigma^4``) and of
    ``sqrt(n) log(RV / sigma^2)`` (limit 2)."""
    t0 = time.perf_counter()
    rv = np.concatenate(_run_chunks(_rv_chunk, (n, sigma), R, chunk, seed, workers))
    a = math.sqrt(n) * (rv - sigma**2)
    b = math.sqrt(n) * np.log(rv / sigma**2)
    s = _summarize("rv_clt", a, [], None, 60, seed, t0)
    s.moments.update({
        "var_centered": float(a.var(ddof=1)), "var_centered_theory": 2 * sigma**4,
        "var_log": float(b.var(ddof=1)), "var_log_theory": 2.0,
    })
    s.extra = {"n": n, "sigma": sigma}
    return s


# ---------------------------------------------------------------------------
# Block-minima estimator CLT


def _lomn_clt_chunk(args, m, seed):
    n, h, eta, tab = args
    noise = NoiseSpec.lomn_exponential(eta)
    g = GridSpec(n)
    out = np.empty((m, 2))
    for i in range(m):
        s = seed.child(i)
        obs = observe(simulate_bm(g, s.child(0)), noise, s.child(1))
        bm = block_minima(obs, h)
        e = lomn_spot_vol(bm, 1.0, bm.n_blocks - 1, psi=tab)
        out[i] = (e.value, e.raw)
    return out


def check_lomn_clt(R: int, n: int, eta: float = 10.0, h_n: Optional[float] = None,
                   seed: SeedSpec = SeedSpec(), chunk: int = 100, workers: int = 1,
                   psi_paths: int = 10_000) -> McSummary:
    """Corrected block-minima estimates at tau = 1 using all blocks, on a
    unit-volatility Brownian motion with exponential limit order noise.

    Standardized by ``sqrt(C / K)`` with C the asymptotic variance constant.
    """
    t0 = time.perf_counter()
    h = choose_hn(n, "balanced") if h_n is None else h_n
    noise = NoiseSpec.lomn_exponential(eta)
    tab = psi_table(n, h, noise, center=1.0, mc_paths=psi_paths, seed=seed.child(9999))
    v = np.concatenate(_run_chunks(_lomn_clt_chunk, (n, h, eta, tab), R, chunk, seed, workers))
    K = int(round(1 / h)) - 1
    C = lomn_variance_constant()
    zst = (v[:, 0] - 1.0) / math.sqrt(C / K)
    s = _summarize("lomn_clt", v[:, 0], [], None, 60, seed, t0)
    s.moments.update({
        "mean_corrected": float(v[:, 0].mean()), "mean_raw": float(v[:, 1].mean()),
        "sd_corrected": float(v[:, 0].std(ddof=1)), "sd_theory": math.sqrt(C / K),
        "skewness": float(sps.skew(zst)), "excess_kurtosis": float(sps.kurtosis(zst)),
        "band_coverage_3sd": float(np.mean(np.abs(zst) <= 3.0)),
    })
    s.extra = {"n": n, "h_n": h, "K_n": K, "eta": eta, "variance_constant": C}
    return s


# ---------------------------------------------------------------------------
# Taxi problem


def _taxi_chunk(args, m, seed):
    theta, n = args
    rng = seed.generator()
    out = np.empty((m, 3))
    for i in range(m):
        out[i] = taxi_estimators(theta * rng.random(n))
    return out


def run_taxi(R: int, theta: float, n: int, seed: SeedSpec = SeedSpec(),
             chunk: int = 1000, workers: int = 1, percentiles=(0.5, 0.9, 0.95)) -> McSummary:
    """Bias and MSE of the three boundary estimators, plus the law of
    ``n (theta - max)`` against the exponential limit with mean theta."""
    if not theta > 0:
        raise DistributionError("theta must be positive")
    t0 = time.perf_counter()
    est = np.concatenate(_run_chunks(_taxi_chunk, (theta, n), R, chunk, seed, workers))
    err = est - theta
    names = ("mm", "ml", "umvu")
    mom = {}
    for j, nm in enumerate(names):
        e = err[:, j]
        mom[f"bias_{nm}"] = [float(e.mean()), float(e.std(ddof=1) / math.sqrt(R))]
        se2 = e**2
        mom[f"mse_{nm}"] = [float(se2.mean()), float(se2.std(ddof=1) / math.sqrt(R))]
    gap = n * (theta - est[:, 1])
    theo = np.array([dist.quantile(dist.DistributionId.exponential(1.0 / theta), p) for p in percentiles])
    s = _summarize("taxi", gap, percentiles, theo, 60, seed, t0)
    s.moments.update(mom)
    s.extra = {"theta": theta, "n": n,
               "mse_ml_exact": 2 * theta**2 / ((n + 1) * (n + 2)),
               "mse_mm_asymptotic": theta**2 / (3 * n)}
    return s

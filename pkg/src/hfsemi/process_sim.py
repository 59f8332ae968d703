"""Path simulators and the observation layer.

Latent log-prices live on an equidistant grid ``t_j = j T / n``. Jumps are
added after the continuous part is simulated and are kept in an exact
ledger; observations may be contaminated with regular (centred) noise or
with one-sided limit order noise (LOMN).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .distributions import DistributionError, DistributionId, Family
from .rng import as_generator, sample

__all__ = [
    "GridSpec",
    "PathSample",
    "JumpSpec",
    "NoiseKind",
    "Side",
    "NoiseSpec",
    "ObservationSeries",
    "HestonParams",
    "simulate_bm",
    "simulate_diffusion",
    "simulate_heston",
    "add_jumps",
    "fgn_autocovariance",
    "simulate_fbm",
    "simulate_fractional_logvol",
    "observe",
    "simulate_lb_submodel",
]


@dataclass(frozen=True)
class GridSpec:
    n: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("grid needs n >= 2 increments")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n + 1) * self.dt
        t[-1] = self.T
        return t


@dataclass
class PathSample:
    grid: GridSpec
    x: np.ndarray
    sigma: np.ndarray
    jumps: list = field(default_factory=list)
    model_tag: str = ""
    variance: Optional[np.ndarray] = None  # raw variance path for Heston

    def __post_init__(self):
        n1 = self.grid.n + 1
        if len(self.x) != n1 or len(self.sigma) != n1:
            raise ValueError("x and sigma must have n + 1 entries")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.x)

    def integrated_variance(self) -> float:
        """Left-point Riemann sum of sigma^2, matching the Euler scheme."""
        return float(np.sum(self.sigma[:-1] ** 2) * self.grid.dt)

    def jump_variation(self) -> float:
        return float(sum(b * b for _, b in self.jumps))

    def as_observations(self) -> "ObservationSeries":
        return ObservationSeries(self.times, self.x.copy(), NoiseSpec(), latent=self)


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson jumps.

    ``count`` fixes the number of jumps (uniform times) instead of drawing it
    from Poisson(intensity * T); ``fixed_jumps`` pins both times and sizes.
    """

    intensity: float = 0.0
    size_dist: DistributionId = DistributionId(Family.Laplace, (0.05,))
    fixed_jumps: Optional[tuple] = None
    count: Optional[int] = None

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("jump intensity must be >= 0")
        if self.count is not None and self.count < 0:
            raise ValueError("jump count must be >= 0")
        if self.fixed_jumps is not None:
            jumps = tuple((float(t), float(b)) for t, b in self.fixed_jumps)
            times = [t for t, _ in jumps]
            if len(set(times)) != len(times):
                raise ValueError("fixed jump times must be distinct")
            object.__setattr__(self, "fixed_jumps", jumps)


class NoiseKind(str, enum.Enum):
    NONE = "None"
    REGULAR = "RegularMMN"
    LOMN = "LOMN"


class Side(str, enum.Enum):
    LOWER = "lower"  # ask quotes sit above the efficient price
    UPPER = "upper"  # bid quotes sit below it


_LOMN_FAMILIES = (Family.Exponential, Family.Uniform, Family.ParetoShifted)


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = NoiseKind.NONE
    dist: Optional[DistributionId] = None
    side: Side = Side.LOWER

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "side", Side(self.side))
        if kind is NoiseKind.NONE:
            return
        if self.dist is None:
            raise DistributionError(f"{kind.value} noise needs a distribution")
        fam = self.dist.family
        if kind is NoiseKind.LOMN:
            if fam not in _LOMN_FAMILIES:
                raise DistributionError(
                    f"LOMN noise needs nonnegative support, got {fam.value}"
                )
            if fam is Family.Uniform and self.dist.params[0] != 0.0:
                raise DistributionError("LOMN uniform noise must start at 0")
        elif kind is NoiseKind.REGULAR:
            if fam not in (Family.StdNormal, Family.Laplace, Family.Uniform):
                raise DistributionError(f"regular noise family {fam.value} unsupported")
            if fam is Family.Uniform and self.dist.params[0] != -self.dist.params[1]:
                raise DistributionError("regular uniform noise must be centred")

    @classmethod
    def lomn_exponential(cls, eta: float, side: Side = Side.LOWER) -> "NoiseSpec":
        return cls(NoiseKind.LOMN, DistributionId.exponential(eta), side)

    @property
    def eta(self) -> float:
        """Slope of the noise CDF at 0 for LOMN noise."""
        if self.kind is not NoiseKind.LOMN:
            raise DistributionError("eta is defined for LOMN noise only")
        fam, p = self.dist.family, self.dist.params
        if fam is Family.Exponential:
            return p[0]
        if fam is Family.Uniform:
            return 1.0 / p[1]
        return p[0] / p[1]

    def draw(self, n: int, seed) -> np.ndarray:
        if self.kind is NoiseKind.NONE:
            return np.zeros(n)
        eps = sample(self.dist, n, seed)
        return eps if self.side is Side.LOWER else -eps

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "family": self.dist.family.value if self.dist else None,
            "params": list(self.dist.params) if self.dist else [],
            "side": self.side.value,
        }


@dataclass
class ObservationSeries:
    times: np.ndarray
    y: np.ndarray
    noise_spec: NoiseSpec = field(default_factory=NoiseSpec)
    latent: Optional[PathSample] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.times.shape != self.y.shape:
            raise ValueError("times and y must have equal length")

    @property
    def n(self) -> int:
        return len(self.y) - 1

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.y)


# ---------------------------------------------------------------------------
# Continuous paths

Coefficient = Union[float, np.ndarray, Callable[[float], float]]


def _coeff_path(c: Coefficient, grid: GridSpec) -> np.ndarray:
    if callable(c):
        return np.array([float(c(t)) for t in grid.times])
    arr = np.asarray(c, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n + 1, float(arr))
    if arr.shape != (grid.n + 1,):
        raise ValueError("coefficient path must have n + 1 entries")
    return arr


def simulate_bm(grid: GridSpec, seed) -> PathSample:
    rng = as_generator(seed)
    z = rng.standard_normal(grid.n)
    x = np.concatenate(([0.0], np.cumsum(math.sqrt(grid.dt) * z)))
    return PathSample(grid, x, np.ones(grid.n + 1), [], "bm")


def simulate_diffusion(grid: GridSpec, mu: Coefficient, sigma_path: Coefficient,
                       seed, *, allow_zero: bool = False) -> PathSample:
    """Euler scheme ``X_j = X_{j-1} + mu_{j-1} dt + sigma_{j-1} sqrt(dt) Z_j``.

    ``allow_zero`` admits a zero volatility (deterministic limit); the default
    rejects nonpositive values.
    """
    mu_p = _coeff_path(mu, grid)
    sig = _coeff_path(sigma_path, grid)
    if np.any(sig < 0) or (not allow_zero and np.any(sig <= 0)):
        raise DistributionError("volatility must be positive")
    rng = as_generator(seed)
    z = rng.standard_normal(grid.n)
    incr = mu_p[:-1] * grid.dt + sig[:-1] * (math.sqrt(grid.dt) * z)
    x = np.concatenate(([0.0], np.cumsum(incr)))
    return PathSample(grid, x, sig, [], "diffusion")


@dataclass(frozen=True)
class HestonParams:
    """Heston parameters; defaults are illustrative daily-scale values."""

    kappa: float = 5.0
    theta: float = 0.04
    xi: float = 0.5
    rho: float = -0.5
    v0: float = 0.04
    mu: float = 0.05

    def __post_init__(self):
        if min(self.kappa, self.theta, self.v0) <= 0:
            raise DistributionError("kappa, theta and v0 must be positive")
        if self.xi < 0:
            raise DistributionError("xi must be nonnegative")
        if abs(self.rho) > 1:
            raise DistributionError("|rho| must not exceed 1")


def simulate_heston(grid: GridSpec, params: HestonParams = HestonParams(), seed=None,
                    *, sigma_floor: float = 1e-6) -> PathSample:
    """Full-truncation Euler for the variance, correlated Euler for the price.

    ``xi = 0`` is accepted for the deterministic-variance limit.
    """
    p = params
    dt, n = grid.dt, grid.n
    rng = as_generator(seed)
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    zv = p.rho * z1 + math.sqrt(1.0 - p.rho * p.rho) * z2
    sq = math.sqrt(dt)
    v = np.empty(n + 1)
    v[0] = p.v0
    for j in range(1, n + 1):
        vp = v[j - 1] if v[j - 1] > 0 else 0.0
        v[j] = v[j - 1] + p.kappa * (p.theta - vp) * dt + p.xi * math.sqrt(vp) * sq * zv[j - 1]
    sigma = np.maximum(np.sqrt(np.maximum(v, 0.0)), sigma_floor)
    x = np.concatenate(([0.0], np.cumsum(p.mu * dt + sigma[:-1] * sq * z1)))
    return PathSample(grid, x, sigma, [], "heston", variance=v)


def add_jumps(path: PathSample, spec: JumpSpec, seed) -> PathSample:
    """Add compound Poisson jumps; each jump hits the first grid point >= its time."""
    T = path.grid.T
    if spec.fixed_jumps is not None:
        jumps = list(spec.fixed_jumps)
        if any(not 0 < t < T for t, _ in jumps):
            raise ValueError("fixed jump times must lie in (0, T)")
    else:
        rng = as_generator(seed)
        k = spec.count if spec.count is not None else rng.poisson(spec.intensity * T)
        if k == 0:
            jumps = []
        else:
            times = rng.uniform(0.0, T, size=k)
            # Uniform on [0, T); an exact 0 has probability ~2^-53
            times[times == 0.0] = T * 0.5 ** 53
            sizes = sample(spec.size_dist, k, rng)
            jumps = list(zip(times.tolist(), sizes.tolist()))
    jumps.sort(key=lambda tb: tb[0])
    x = path.x + jump_component(path.grid, jumps)
    tag = path.model_tag + "+jumps" if jumps else path.model_tag
    return replace(path, x=x, jumps=list(path.jumps) + jumps, model_tag=tag)


def jump_component(grid: GridSpec, jumps) -> np.ndarray:
    """Step function ``sum_{tau <= t_j} b`` on the grid (first point >= tau)."""
    out = np.zeros(grid.n + 1)
    times = grid.times
    for tau, b in sorted(jumps, key=lambda tb: tb[0]):
        idx = int(np.searchsorted(times, tau, side="left"))
        out[idx:] += b
    return out


# ---------------------------------------------------------------------------
# Fractional processes


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n."""
    k = np.arange(n + 1, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * H) + np.abs(k - 1) ** (2 * H) - 2 * k ** (2 * H))


def _fgn_circulant(H: float, n: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    gamma = fgn_autocovariance(H, n)
    row = np.concatenate((gamma, gamma[-2:0:-1]))  # length 2n
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = len(row)
    w = np.sqrt(lam / m) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return np.fft.fft(w)[:n].real


def _fgn_cholesky(H: float, n: int, rng: np.random.Generator) -> np.ndarray:
    from scipy.linalg import toeplitz

    cov = toeplitz(fgn_autocovariance(H, n - 1))
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(
            f"Cholesky of the fGn covariance failed (H={H}, n={n})"
        ) from exc
    return L @ rng.standard_normal(n)


def simulate_fbm(n: int, H: float, seed) -> np.ndarray:
    """Exact sample of ``(B^H_{j/n})_{j=0..n}`` by circulant embedding.

    Falls back to a Cholesky factorisation if the embedding is not
    nonnegative definite.
    """
    if not 0 < H < 1:
        raise ValueError("Hurst exponent must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    inc = _fgn_circulant(H, n, rng) if n > 1 else None
    if inc is None:
        inc = _fgn_cholesky(H, n, rng)
    return np.concatenate(([0.0], np.cumsum(inc))) * float(n) ** (-H)


def simulate_fractional_logvol(n: int, H: float, nu: float, base_level: float = 0.0,
                               seed=None) -> np.ndarray:
    """Volatility path ``exp(base_level + nu * B^H_{j/n})``."""
    if nu < 0:
        raise ValueError("vol-of-vol must be nonnegative")
    if nu == 0:
        return np.full(n + 1, math.exp(base_level))
    return np.exp(base_level + nu * simulate_fbm(n, H, seed))


# ---------------------------------------------------------------------------
# Observations


def observe(path: PathSample, noise: NoiseSpec, seed=None) -> ObservationSeries:
    if noise.kind is NoiseKind.NONE:
        return ObservationSeries(path.times, path.x.copy(), noise, latent=path)
    eps = noise.draw(path.grid.n + 1, seed)
    return ObservationSeries(path.times, path.x + eps, noise, latent=path)


def simulate_lb_submodel(n: int, alpha: float, delta: float,
                         u_dist: DistributionId = DistributionId.uniform(-1.0, 1.0),
                         seed=None) -> np.ndarray:
    """Scale-perturbed Gaussians ``(1 + delta^alpha U_j) Z_j``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rng = as_generator(seed)
    u = sample(u_dist, n, rng)
    z = rng.standard_normal(n)
    return (1.0 + delta ** alpha * u) * z

"""Distribution functions for the limit laws used by the jump tests.

Closed forms cover the standard families; the Deheuvels law (limit of the
scaled maximal spacing of Gaussian order statistics) is evaluated as a
truncated infinite product and inverted numerically.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

__all__ = [
    "DistributionError",
    "Family",
    "DistributionId",
    "QuantileRequest",
    "gumbel_cdf",
    "gumbel_quantile",
    "deheuvels_cdf",
    "deheuvels_cdf_approx",
    "deheuvels_quantile",
    "deheuvels_density",
    "halfnormal_moments",
    "exp_gap_cdf",
    "exp_gap_quantile",
    "normal_cdf",
    "cdf",
    "quantile",
]

DEHEUVELS_TOL = 1e-12
_BRACKET = (1e-8, 60.0)
# log of the smallest positive double; partial products below this are 0.
_LOG_TINY = -745.0


class DistributionError(ValueError):
    """Raised for invalid arguments or unsupported family/parameter combos."""


class Family(str, enum.Enum):
    StdNormal = "StdNormal"
    HalfNormal = "HalfNormal"
    Exponential = "Exponential"
    Gumbel = "Gumbel"
    DeheuvelsTwoSided = "DeheuvelsTwoSided"
    DeheuvelsOneSided = "DeheuvelsOneSided"
    Laplace = "Laplace"
    ParetoShifted = "ParetoShifted"
    Uniform = "Uniform"


# (min params, max params, all positive?) per family; params are optional
# location/scale style slots documented on DistributionId.
_ARITY = {
    Family.StdNormal: (0, 0),
    Family.HalfNormal: (0, 1),
    Family.Exponential: (1, 1),
    Family.Gumbel: (0, 0),
    Family.DeheuvelsTwoSided: (0, 0),
    Family.DeheuvelsOneSided: (0, 0),
    Family.Laplace: (1, 1),
    Family.ParetoShifted: (2, 2),
    Family.Uniform: (2, 2),
}


@dataclass(frozen=True)
class DistributionId:
    """Tagged distribution family with its parameters.

    Parameter slots:

    * ``StdNormal``, ``Gumbel``, ``Deheuvels*``: none
    * ``HalfNormal``: optional ``(scale,)``, default 1
    * ``Exponential``: ``(rate,)``
    * ``Laplace``: ``(scale,)``, centred at 0
    * ``ParetoShifted``: ``(shape, scale)``; law of ``scale * (U**(-1/shape) - 1)``,
      supported on ``[0, inf)`` with density ``shape/scale`` at 0
    * ``Uniform``: ``(low, high)``
    """

    family: Family
    params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        lo, hi = _ARITY[fam]
        if not lo <= len(params) <= hi:
            raise DistributionError(
                f"{fam.value} takes between {lo} and {hi} parameters, got {len(params)}"
            )
        if not all(math.isfinite(p) for p in params):
            raise DistributionError(f"{fam.value} parameters must be finite")
        if fam is Family.Uniform:
            if not params[0] < params[1]:
                raise DistributionError("Uniform requires low < high")
        elif any(p <= 0 for p in params):
            raise DistributionError(f"{fam.value} parameters must be positive")

    # convenience constructors
    @classmethod
    def exponential(cls, rate: float) -> "DistributionId":
        return cls(Family.Exponential, (rate,))

    @classmethod
    def uniform(cls, low: float, high: float) -> "DistributionId":
        return cls(Family.Uniform, (low, high))

    @classmethod
    def laplace(cls, scale: float) -> "DistributionId":
        return cls(Family.Laplace, (scale,))

    @classmethod
    def pareto_shifted(cls, shape: float, scale: float) -> "DistributionId":
        return cls(Family.ParetoShifted, (shape, scale))

    @classmethod
    def std_normal(cls) -> "DistributionId":
        return cls(Family.StdNormal)

    @property
    def support_lower(self) -> float:
        fam = self.family
        if fam in (Family.HalfNormal, Family.Exponential, Family.ParetoShifted,
                   Family.DeheuvelsOneSided, Family.DeheuvelsTwoSided):
            return 0.0
        if fam is Family.Uniform:
            return self.params[0]
        return -math.inf

    @property
    def mean(self) -> float:
        fam, p = self.family, self.params
        if fam is Family.Exponential:
            return 1.0 / p[0]
        if fam is Family.Uniform:
            return 0.5 * (p[0] + p[1])
        if fam is Family.HalfNormal:
            return (p[0] if p else 1.0) * math.sqrt(2.0 / math.pi)
        if fam in (Family.StdNormal, Family.Laplace):
            return 0.0
        if fam is Family.Gumbel:
            return np.euler_gamma
        if fam is Family.ParetoShifted:
            shape, scale = p
            return scale / (shape - 1.0) if shape > 1 else math.inf
        raise DistributionError(f"mean not available for {fam.value}")


@dataclass(frozen=True)
class QuantileRequest:
    dist: DistributionId
    p: float
    tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DistributionError(f"p must lie in (0, 1), got {self.p}")
        if not self.tol > 0:
            raise DistributionError("tol must be positive")


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DistributionError(f"p must lie in (0, 1), got {p}")
    return p


# ---------------------------------------------------------------------------
# Gumbel


def gumbel_cdf(x: float) -> float:
    """Standard Gumbel CDF ``exp(-exp(-x))``."""
    x = float(x)
    if not math.isfinite(x):
        raise DistributionError(f"x must be finite, got {x}")
    return math.exp(-math.exp(-x)) if x > -700 else 0.0


def gumbel_quantile(p: float) -> float:
    p = _check_prob(p)
    return -math.log(-math.log(p))


# ---------------------------------------------------------------------------
# Deheuvels


def _deheuvels_terms(x: float, power: int) -> int:
    # power * sum_{j>J} e^{-jx} = power * e^{-(J+1)x} / (1 - e^{-x}) <= tol
    q = math.exp(-x)
    bound = math.log(power / (DEHEUVELS_TOL * -math.expm1(-x))) / x - 1.0
    return max(1, int(math.ceil(bound))) if q > 0 else 1


def _log_product(x: float, power: int, terms: int | None) -> float:
    """``power * sum_j log(1 - e^{-jx})``, summed in chunks with early exit."""
    # both laws truncate at the two-sided J so that the square identity
    # holds to rounding
    J = _deheuvels_terms(x, 2) if terms is None else int(terms)
    total = 0.0
    chunk = 4096
    start = 1
    while start <= J:
        stop = min(J, start + chunk - 1)
        j = np.arange(start, stop + 1, dtype=float)
        total += power * float(np.sum(np.log(-np.expm1(-j * x))))
        if total < _LOG_TINY:
            return -math.inf
        start = stop + 1
    return total


def deheuvels_cdf(x: float, one_sided: bool = False, terms: int | None = None) -> float:
    """CDF of the Deheuvels law, ``prod_j (1 - e^{-jx})^s``.

    ``s = 2`` for the two-sided law (maximal spacing over both tails) and
    ``s = 1`` for a single tail. With ``terms=None`` the product is truncated
    where the geometric tail bound drops below 1e-12.
    """
    x = float(x)
    if math.isnan(x):
        raise DistributionError("x must not be NaN")
    if x <= 0:
        return 0.0
    if x == math.inf:
        return 1.0
    if terms is not None and terms < 1:
        raise DistributionError("terms must be a positive integer")
    power = 1 if one_sided else 2
    lp = _log_product(x, power, terms)
    return 0.0 if lp == -math.inf else math.exp(lp)


def deheuvels_cdf_approx(x: float) -> float:
    """``1 - e^{-x} - e^{-2x}`` clamped to [0, 1].

    Approximates the one-sided product; the error is O(e^{-3x}).
    """
    x = float(x)
    if x <= 0:
        return 0.0
    return min(1.0, max(0.0, 1.0 - math.exp(-x) - math.exp(-2.0 * x)))


def deheuvels_quantile(p: float, one_sided: bool = False, tol: float = 1e-13) -> float:
    """Invert the truncated Deheuvels product by bracketing and bisection."""
    p = _check_prob(p)
    lo, hi = _BRACKET
    f = lambda x: deheuvels_cdf(x, one_sided) - p  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ArithmeticError(f"could not bracket Deheuvels quantile for p={p}")
    while hi - lo > tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def deheuvels_density(x: float, one_sided: bool = False) -> float:
    """Density by central differences with one Richardson step."""
    x = float(x)
    if x <= 0:
        return 0.0
    h = max(1e-4, 1e-4 * x)
    F = lambda t: deheuvels_cdf(t, one_sided)  # noqa: E731

    def D(step):
        lo = max(x - step, 0.0)
        return (F(x + step) - F(lo)) / (x + step - lo)

    val = (4.0 * D(h / 2) - D(h)) / 3.0
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# Exponential-gap limit law


def exp_gap_cdf(x: float, r: int = 1) -> float:
    """CDF of ``log((E_1 + ... + E_{r+1}) / E_1)``.

    The variable telescopes into a sum of independent Exp(1), ..., Exp(r)
    terms, which has the law of the maximum of r standard exponentials,
    so the CDF is ``(1 - e^{-x})^r``.
    """
    if r < 1:
        raise DistributionError("gap order r must be >= 1")
    x = float(x)
    if x <= 0:
        return 0.0
    return float(-math.expm1(-x)) ** r


def exp_gap_quantile(p: float, r: int = 1) -> float:
    p = _check_prob(p)
    if r < 1:
        raise DistributionError("gap order r must be >= 1")
    return -math.log1p(-(p ** (1.0 / r)))


# ---------------------------------------------------------------------------
# Normal / half-normal


def normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * special.erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def halfnormal_moments() -> tuple[float, float]:
    """Mean and variance of ``|Z|`` for standard normal ``Z``."""
    return math.sqrt(2.0 / math.pi), 1.0 - 2.0 / math.pi


# ---------------------------------------------------------------------------
# Dispatch


def cdf(dist: DistributionId, x: float) -> float:
    fam, p = dist.family, dist.params
    x = float(x)
    if math.isnan(x):
        raise DistributionError("x must not be NaN")
    if fam is Family.StdNormal:
        return normal_cdf(x)
    if fam is Family.HalfNormal:
        s = p[0] if p else 1.0
        return 0.0 if x <= 0 else float(special.erf(x / (s * math.sqrt(2.0))))
    if fam is Family.Exponential:
        return 0.0 if x <= 0 else -math.expm1(-p[0] * x)
    if fam is Family.Gumbel:
        return gumbel_cdf(x)
    if fam is Family.DeheuvelsTwoSided:
        return deheuvels_cdf(x, one_sided=False)
    if fam is Family.DeheuvelsOneSided:
        return deheuvels_cdf(x, one_sided=True)
    if fam is Family.Laplace:
        b = p[0]
        return 0.5 * math.exp(x / b) if x < 0 else 1.0 - 0.5 * math.exp(-x / b)
    if fam is Family.ParetoShifted:
        shape, scale = p
        return 0.0 if x <= 0 else 1.0 - (1.0 + x / scale) ** (-shape)
    if fam is Family.Uniform:
        lo, hi = p
        return min(1.0, max(0.0, (x - lo) / (hi - lo)))
    raise DistributionError(f"unsupported family {fam}")


def quantile(req: QuantileRequest | DistributionId, p: float | None = None) -> float:
    """Quantile dispatch; accepts a ``QuantileRequest`` or ``(dist, p)``."""
    if isinstance(req, DistributionId):
        if p is None:
            raise DistributionError("p is required when passing a DistributionId")
        req = QuantileRequest(req, p)
    dist, q = req.dist, req.p
    fam, pr = dist.family, dist.params
    if fam is Family.StdNormal:
        return float(special.ndtri(q))
    if fam is Family.HalfNormal:
        s = pr[0] if pr else 1.0
        return s * float(special.ndtri(0.5 + 0.5 * q))
    if fam is Family.Exponential:
        return -math.log1p(-q) / pr[0]
    if fam is Family.Gumbel:
        return gumbel_quantile(q)
    if fam is Family.DeheuvelsTwoSided:
        return deheuvels_quantile(q, one_sided=False, tol=min(req.tol, 1e-12))
    if fam is Family.DeheuvelsOneSided:
        return deheuvels_quantile(q, one_sided=True, tol=min(req.tol, 1e-12))
    if fam is Family.Laplace:
        b = pr[0]
        return b * math.log(2 * q) if q < 0.5 else -b * math.log(2 * (1 - q))
    if fam is Family.ParetoShifted:
        shape, scale = pr
        return scale * ((1.0 - q) ** (-1.0 / shape) - 1.0)
    if fam is Family.Uniform:
        lo, hi = pr
        return lo + q * (hi - lo)
    raise DistributionError(f"unsupported family {fam}")

"""Reproducible random streams.

A :class:`SeedSpec` names a stream by a master seed plus a path of substream
indices (experiment, replication chunk, block, ...). Streams are derived with
:class:`numpy.random.SeedSequence` spawn keys, so a given spec always yields
the same PCG64 stream no matter which worker draws it or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionError, DistributionId, Family

__all__ = ["SeedSpec", "as_generator", "sample", "DEFAULT_SEED"]

DEFAULT_SEED = 20240101

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = DEFAULT_SEED
    stream_path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        path = tuple(int(i) for i in self.stream_path)
        if any(not 0 <= i <= _MASK32 for i in path):
            raise ValueError("stream_path entries must be 32-bit unsigned integers")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_path", path)

    def child(self, *indices: int) -> "SeedSpec":
        """Substream ``indices`` below this one."""
        return SeedSpec(self.master_seed, self.stream_path + tuple(indices))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_path)
        return np.random.Generator(np.random.PCG64(ss))

    def lineage(self) -> dict:
        return {"master_seed": self.master_seed, "stream_path": list(self.stream_path)}


def as_generator(seed) -> np.random.Generator:
    """Accept a SeedSpec, an int master seed, a Generator, or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.generator()
    if seed is None:
        return SeedSpec().generator()
    if isinstance(seed, (int, np.integer)):
        return SeedSpec(int(seed)).generator()
    raise TypeError(f"cannot build a generator from {type(seed).__name__}")


def sample(dist: DistributionId, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. values from ``dist``.

    Normals use NumPy's ziggurat (exact rejection sampler); the other
    families are drawn by inverting their CDFs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(seed)
    fam, p = dist.family, dist.params
    if fam is Family.StdNormal:
        return rng.standard_normal(n)
    if fam is Family.HalfNormal:
        return (p[0] if p else 1.0) * np.abs(rng.standard_normal(n))
    if fam is Family.Exponential:
        # -log(1 - U) with U in [0, 1)
        return -np.log1p(-rng.random(n)) / p[0]
    if fam is Family.Laplace:
        u = rng.random(n) - 0.5
        return -p[0] * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if fam is Family.Uniform:
        lo, hi = p
        return lo + (hi - lo) * rng.random(n)
    if fam is Family.ParetoShifted:
        shape, scale = p
        u = 1.0 - rng.random(n)  # (0, 1]
        return scale * np.expm1(-np.log(u) / shape)
    if fam is Family.Gumbel:
        u = 1.0 - rng.random(n)
        return -np.log(-np.log(u))
    raise DistributionError(f"sampling not supported for {fam.value}")

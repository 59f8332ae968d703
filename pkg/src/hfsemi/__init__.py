"""Simulation and inference for discretely observed semimartingale prices.

Submodules:

``distributions``   limit laws (Gumbel, exponential gaps, Deheuvels) and quantiles
``rng``             seeded, splittable random streams
``process_sim``     Brownian, Heston, jump, fractional and noisy paths
``vol_estimators``  realized, truncated, spot and block-minima volatility estimators
``jump_tests``      Gumbel, exponential-gap and Renyi jump tests
``rough_vol``       moment statistics and Hurst estimation
``mc_harness``      Monte Carlo studies
``io``, ``cli``     CSV/config handling and the ``hfsemi`` command
"""

from .distributions import (
    DistributionError,
    DistributionId,
    Family,
    QuantileRequest,
    cdf,
    deheuvels_cdf,
    deheuvels_quantile,
    gumbel_cdf,
    gumbel_quantile,
    quantile,
)
from .jump_tests import (
    TestReport,
    exp_gap_test,
    gumbel_test,
    lomn_gumbel_test,
    normalize_increments,
    renyi_test,
    sequential_detect,
)
from .process_sim import (
    GridSpec,
    HestonParams,
    JumpSpec,
    NoiseSpec,
    ObservationSeries,
    PathSample,
    add_jumps,
    observe,
    simulate_bm,
    simulate_diffusion,
    simulate_fbm,
    simulate_fractional_logvol,
    simulate_heston,
)
from .rng import SeedSpec
from .rough_vol import VolSeries, hurst_estimate, m_stat, zeta_fit
from .vol_estimators import (
    TruncationSpec,
    block_minima,
    choose_hn,
    lomn_spot_vol,
    lomn_truncated_spot_vol,
    psi_n,
    psi_table,
    realized_volatility,
    spot_vol,
    taxi_estimators,
    truncated_rv,
    truncated_spot_vol,
)

__version__ = "0.1.0"

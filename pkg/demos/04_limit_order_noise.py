"""
Best ask quotes and the taxi problem
====================================

With one-sided noise the efficient price sits below every ask. The block
minimum of the quotes is a boundary estimate, just like the largest taxi
number seen estimates the fleet size.
"""

import math

import numpy as np

from hfsemi.jump_tests import lomn_gumbel_test
from hfsemi.mc_harness import run_taxi
from hfsemi.process_sim import (GridSpec, JumpSpec, NoiseSpec, add_jumps, observe,
                                simulate_bm)
from hfsemi.rng import SeedSpec
from hfsemi.vol_estimators import (block_minima, choose_hn, lomn_block_spot, lomn_spot_vol,
                                   lomn_variance_constant, psi_table, taxi_estimators)

# taxis first: numbers 1..theta, we see n of them
print("taxi sample {1,2,3}: mm, ml, umvu =", taxi_estimators([1, 2, 3]))
taxi = run_taxi(2000, 5.0, 100, SeedSpec(3))
# each entry is (estimate, Monte Carlo standard error)
for nm in ("mm", "ml", "umvu"):
    b, mse = taxi.moments[f"bias_{nm}"], taxi.moments[f"mse_{nm}"]
    print(f"  {nm:>4}: bias {b[0]:+.4f} (se {b[1]:.4f})  mse {mse[0]:.5f}")

n = 20_000
noise = NoiseSpec.lomn_exponential(10.0)
h = choose_hn(n)
print(f"\nn = {n}, block length h_n = {h:.4f} ({int(round(1 / h))} blocks)")

seed = SeedSpec(5)
obs = observe(simulate_bm(GridSpec(n), seed.child(0)), noise, seed.child(1))
bm = block_minima(obs, h)

# noise biases the raw estimate up; psi_n maps it back
tab = psi_table(n, h, noise)
est = lomn_spot_vol(bm, 1.0, bm.n_blocks - 1, psi=tab)
K = bm.n_blocks - 1
sd = math.sqrt(lomn_variance_constant() / K)
print(f"raw {est.raw:.3f}  corrected {est.value:.3f}  (sd of the corrected estimate ~ {sd:.3f})")

# the jump test wants finer blocks than the estimator
ht = choose_hn(n, "test")
bm = block_minima(obs, ht)
rep = lomn_gumbel_test(bm, lomn_block_spot(bm))
print(f"\ntest blocks: {bm.n_blocks}")
print(f"no jump:   T = {rep.statistic:.3f}  critical {rep.critical_value:.3f}  reject={rep.reject}")

# a jump at t = 0.6 shows up as one large jump in the block minima
jumped = observe(add_jumps(simulate_bm(GridSpec(n), seed.child(0)),
                           JumpSpec(fixed_jumps=((0.6, 1.0),)), None), noise, seed.child(1))
bj = block_minima(jumped, ht)
rep = lomn_gumbel_test(bj, lomn_block_spot(bj))
print(f"jump 1.0:  T = {rep.statistic:.3f}  critical {rep.critical_value:.3f}  reject={rep.reject}")
print("located at t ~", round(rep.params["argmax"]["time"], 3))

import itertools
import json
import math

import numpy as np
import pytest

from hfsemi.distributions import DistributionError, deheuvels_quantile
from hfsemi.jump_tests import (NormalizedIncrements, NumericError, exp_gap_test,
                               gumbel_normalizers, gumbel_statistic, gumbel_test,
                               lomn_gumbel_test, max_adjacent_gap, max_statistic,
                               normalize_increments, renyi_statistic, renyi_test,
                               sequential_detect)
from hfsemi.process_sim import (GridSpec, JumpSpec, NoiseSpec, ObservationSeries, add_jumps,
                                observe, simulate_bm, simulate_diffusion)
from hfsemi.rng import SeedSpec
from hfsemi.vol_estimators import block_minima, choose_hn, lomn_block_spot


def ni_from(values):
    v = np.asarray(values, dtype=float)
    n = len(v)
    return NormalizedIncrements(v, np.ones(n), np.arange(n), (np.arange(n) + 1) / n, v / math.sqrt(n))


def bm(n, seed, sigma=1.0):
    return simulate_diffusion(GridSpec(n), 0.0, sigma, seed)


class TestNormalize:
    def test_unit_variance(self):
        ni = normalize_increments(bm(3600, SeedSpec(1)).as_observations())
        assert ni.n == 3600
        assert np.var(ni.values) == pytest.approx(1.0, rel=0.05)
        assert np.all(np.isfinite(ni.values)) and np.all(ni.spot > 0)

    def test_scale_removed(self):
        ni = normalize_increments(bm(3600, SeedSpec(2), 2.0).as_observations())
        assert np.var(ni.values) == pytest.approx(1.0, rel=0.05)
        assert np.median(ni.spot) == pytest.approx(4.0, rel=0.1)

    def test_linear_path(self):
        g = GridSpec(500)
        ni = normalize_increments(ObservationSeries(g.times, 0.3 * g.times))
        assert np.allclose(ni.values, 1.0)

    def test_window_excludes_self(self):
        # one huge increment does not shrink its own normalized value
        g = GridSpec(400)
        y = np.concatenate(([0.0], np.cumsum(np.tile([0.01, -0.01], 200))))
        y[201:] += 5.0
        ni = normalize_increments(ObservationSeries(g.times, y), guard=False)
        assert ni.values[200] > 100

    def test_zero_path(self):
        g = GridSpec(100)
        with pytest.raises(NumericError):
            normalize_increments(ObservationSeries(g.times, np.zeros(101)))

    def test_exclude(self):
        ni = ni_from(np.arange(40.0))
        e = ni.exclude([0, 5])
        assert e.n == 38 and e.exclusions == (0, 5)
        assert e.exclude([0]).exclusions == (0, 5, 1)


class TestGumbel:
    def test_normalizers(self):
        a, b = gumbel_normalizers(7200)
        assert a == pytest.approx(math.sqrt(2 * math.log(7200)))
        assert b == pytest.approx(a - math.log(4 * math.pi * math.log(7200)) / (2 * a))

    def test_statistic_and_report(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(3600)
        rep = gumbel_test(ni_from(x))
        a, b = gumbel_normalizers(7200)
        assert rep.statistic == pytest.approx(a * (np.abs(x).max() - b))
        assert rep.critical_value == pytest.approx(2.970195, abs=1e-6)
        assert rep.reject == (rep.statistic > rep.critical_value)
        assert rep.p_value == pytest.approx(1 - math.exp(-math.exp(-rep.statistic)))
        assert rep.params["argmax"]["index"] == int(np.argmax(np.abs(x)))
        assert gumbel_statistic(x) == pytest.approx(rep.statistic)
        json.loads(rep.to_json())

    def test_signed_max_statistic(self):
        x = np.array([[0.0, 1.0, -3.0, 2.0] * 10])
        a, b = gumbel_normalizers(40)
        assert max_statistic(x)[0] == pytest.approx(a * (2.0 - b))

    def test_power_single_jump(self):
        rng = np.random.default_rng(4)
        n, hits, R = 3600, 0, 200
        for _ in range(R):
            inc = rng.standard_normal(n) / math.sqrt(n)
            inc[rng.integers(n)] += 0.1
            o = ObservationSeries(np.linspace(0, 1, n + 1), np.concatenate(([0.0], np.cumsum(inc))))
            hits += gumbel_test(normalize_increments(o)).reject
        assert hits / R >= 0.85

    def test_small_n(self):
        with pytest.raises(DistributionError):
            gumbel_test(ni_from(np.arange(10.0)))
        with pytest.raises(DistributionError):
            gumbel_test(ni_from(np.arange(40.0)), alpha=1.0)


class TestExpGap:
    def test_r1(self):
        x = np.linspace(-1, 1, 100)
        x[-1] = 4.0
        rep = exp_gap_test(ni_from(x))
        assert rep.critical_value == pytest.approx(2.995732, abs=1e-6)
        assert rep.statistic == pytest.approx(math.sqrt(2 * math.log(100)) * (4.0 - x[-2]))
        assert rep.reject

    def test_lower_and_both(self):
        x = np.linspace(-1, 1, 100)
        x[0] = -4.0
        lo = exp_gap_test(ni_from(x), tail="lower")
        up = exp_gap_test(ni_from(x), tail="upper")
        both = exp_gap_test(ni_from(x), tail="both")
        assert lo.reject and not up.reject
        assert both.statistic == lo.statistic
        assert both.critical_value == pytest.approx(-math.log(1 - 0.95 ** 0.5))

    def test_two_equal_jumps(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(3600)
        x[100] = x[2000] = 12.0
        r1 = exp_gap_test(ni_from(x), r=1)
        r2 = exp_gap_test(ni_from(x), r=2)
        assert r1.statistic == 0.0 and not r1.reject
        assert r2.statistic > 20 and r2.reject

    def test_r_domain(self):
        with pytest.raises(DistributionError):
            exp_gap_test(ni_from(np.arange(10.0)), r=9)
        with pytest.raises(DistributionError):
            exp_gap_test(ni_from(np.arange(10.0)), r=0)
        with pytest.raises(DistributionError):
            exp_gap_test(ni_from(np.arange(10.0)), tail="middle")


class TestRenyi:
    def test_gap_bruteforce(self):
        rng = np.random.default_rng(6)
        for m in (2, 5, 50, 200):
            x = rng.standard_normal(m)
            g, _ = max_adjacent_gap(x)
            # brute force: the largest gap is the largest y - x over pairs with
            # nothing strictly between them
            best = 0.0
            for i, j in itertools.permutations(range(m), 2):
                if x[j] > x[i] and not np.any((x > x[i]) & (x < x[j])):
                    best = max(best, x[j] - x[i])
            assert g == best

    def test_statistic(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(3600)
        rep = renyi_test(ni_from(x))
        assert rep.statistic == pytest.approx(math.sqrt(2 * math.log(3600)) * np.diff(np.sort(x)).max())
        assert rep.critical_value == pytest.approx(deheuvels_quantile(0.95))
        assert renyi_statistic(x) == pytest.approx(rep.statistic)

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(500)
        assert renyi_test(ni_from(x + 3.7)).statistic == pytest.approx(renyi_test(ni_from(x)).statistic, abs=1e-12)

    def test_attribution_upper(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(3600)
        x[[10, 20, 30]] = [15.0, 15.5, 16.0]
        rep = renyi_test(ni_from(x))
        assert rep.reject and rep.params["gap_tail"] == "upper"
        assert [d["index"] for d in rep.detected] == [10, 20, 30]

    def test_attribution_lower(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal(3600)
        x[42] = -14.0
        rep = renyi_test(ni_from(x))
        assert rep.reject and rep.params["gap_tail"] == "lower"
        assert [d["index"] for d in rep.detected] == [42]

    def test_bulk_gap_not_attributed(self):
        x = np.concatenate((np.linspace(-1, -0.9, 40), np.linspace(0.9, 1, 40)))
        rep = renyi_test(ni_from(x))
        assert rep.reject
        assert rep.params["gap_tail"] == "bulk" and rep.detected == []
        assert not rep.params["attributed"]

    def test_power(self):
        rng = np.random.default_rng(11)
        n, R, hits = 3600, 200, 0
        for _ in range(R):
            inc = rng.standard_normal(n) / math.sqrt(n)
            inc[rng.integers(n)] += 0.1
            o = ObservationSeries(np.linspace(0, 1, n + 1), np.concatenate(([0.0], np.cumsum(inc))))
            hits += renyi_test(normalize_increments(o)).reject
        assert hits / R >= 0.85


class TestSequential:
    def five_jumps(self, seed, n=23400):
        p = bm(n, seed.child(0))
        times = (0.1, 0.3, 0.5, 0.7, 0.9)
        sizes = (0.1, -0.12, 0.15, -0.1, 0.2)
        return add_jumps(p, JumpSpec(fixed_jumps=tuple(zip(times, sizes))), None)

    @pytest.mark.parametrize("base", ["gumbel", "renyi"])
    def test_five_jumps_recovered(self, base):
        q = self.five_jumps(SeedSpec(12))
        ni = normalize_increments(q.as_observations())
        found = sequential_detect(ni, base=base)
        dt = q.grid.dt
        hits = {t for t, _ in q.jumps for d in found if abs(d["time"] - t) <= dt}
        assert len(hits) == 5
        assert len(found) <= 6
        for d in found:
            if any(abs(d["time"] - t) <= dt for t, _ in q.jumps):
                b = dict(q.jumps)[min(q.jumps, key=lambda tb: abs(tb[0] - d["time"]))[0]]
                assert d["size"] == pytest.approx(b, abs=0.02)

    def test_h0_mostly_empty(self):
        R, empty = 100, 0
        for i in range(R):
            ni = normalize_increments(bm(3600, SeedSpec(13, (i,))).as_observations())
            empty += sequential_detect(ni) == []
        assert empty / R >= 0.85

    def test_cap_and_base(self):
        ni = ni_from(np.concatenate((np.full(5, 50.0) + np.arange(5), np.random.default_rng(0).standard_normal(100))))
        assert len(sequential_detect(ni, max_rounds=2)) == 2
        with pytest.raises(DistributionError):
            sequential_detect(ni, base="other")


class TestLomnGumbel:
    def setup_data(self, jump=0.0, seed=SeedSpec(14)):
        n = 20000
        h = choose_hn(n, "test")
        p = bm(n, seed.child(0))
        if jump:
            p = add_jumps(p, JumpSpec(fixed_jumps=((0.5001, jump),)), None)
        o = observe(p, NoiseSpec.lomn_exponential(10.0), seed.child(1))
        return block_minima(o, h)

    def test_formula(self):
        bmn = self.setup_data()
        spot = lomn_block_spot(bmn)
        rep = lomn_gumbel_test(bmn, spot)
        d = np.diff(bmn.minima)
        T = np.max(np.abs(d) / np.sqrt(spot))
        L = math.log(2 / bmn.h_n - 2)
        assert rep.statistic == pytest.approx(bmn.n ** (1 / 3) * T - 2 * L + math.log(math.pi * L))
        assert rep.critical_value == pytest.approx(2.970195, abs=1e-6)

    def test_large_jump_detected_at_block(self):
        bmn = self.setup_data(jump=1.0)
        rep = lomn_gumbel_test(bmn, lomn_block_spot(bmn))
        assert rep.reject
        assert abs(rep.detected[0]["time"] - 0.5001) <= 2 * bmn.h_n

    def test_errors(self):
        bmn = self.setup_data()
        with pytest.raises(DistributionError):
            lomn_gumbel_test(bmn, np.ones(3))
        with pytest.raises(NumericError):
            lomn_gumbel_test(bmn, np.zeros(bmn.n_blocks - 1))

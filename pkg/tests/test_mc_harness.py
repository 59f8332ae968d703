import csv
import json
import math

import numpy as np
import pytest

from hfsemi import distributions as dist
from hfsemi.distributions import DistributionError
from hfsemi.mc_harness import (DEFAULT_PERCENTILES, ExperimentSpec, check_lomn_clt,
                               check_mixed_halfnormal, check_reflection, check_rv_clt,
                               run_size_power, run_statistic_studies, run_statistic_study,
                               run_taxi, theoretical_quantiles, wilson_interval)
from hfsemi.process_sim import NoiseSpec
from hfsemi.rng import SeedSpec


class TestSpec:
    def test_validation(self):
        with pytest.raises(DistributionError):
            ExperimentSpec("x", 100, R=0)
        with pytest.raises(DistributionError):
            ExperimentSpec("x", 100, percentiles=(0.9, 0.9))
        with pytest.raises(DistributionError):
            ExperimentSpec("x", 100, percentiles=(0.5, 1.0))

    def test_default_grid(self):
        assert DEFAULT_PERCENTILES == (0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99)


class TestStatisticStudy:
    def test_degenerate_R1(self):
        s = run_statistic_study(ExperimentSpec("one", 3600, R=1, seed=SeedSpec(1)))
        assert s.hist_counts.sum() == 1 and s.R == 1

    def test_theoretical_from_distributions(self):
        p = [0.9, 0.95]
        np.testing.assert_array_equal(theoretical_quantiles("renyi_maxgap", p),
                                      [dist.deheuvels_quantile(q) for q in p])
        np.testing.assert_array_equal(theoretical_quantiles("gumbel_centered", p),
                                      [dist.gumbel_quantile(q) for q in p])
        np.testing.assert_array_equal(theoretical_quantiles("exp_gap_r1", p),
                                      [-math.log(1 - q) for q in p])
        with pytest.raises(DistributionError):
            theoretical_quantiles("other", p)

    def test_renyi_and_exp_gap(self):
        out = run_statistic_studies(ExperimentSpec("fig", 3600, R=20_000, seed=SeedSpec(2)),
                                    ("exp_gap_r1", "renyi_maxgap"))
        r = out["renyi_maxgap"]
        i = list(r.percentiles).index(0.95)
        assert abs(r.empirical[i] - dist.deheuvels_quantile(0.95)) <= 0.1
        e = out["exp_gap_r1"]
        assert abs(e.moments["mean"][0] - 1.0) < 0.1
        for s in out.values():
            assert s.hist_counts.sum() == 20_000
            assert np.all(np.diff(s.empirical) >= 0)

    def test_workers_do_not_change_result(self):
        spec = ExperimentSpec("det", 500, R=3000, seed=SeedSpec(3), chunk=500)
        a = run_statistic_study(spec, workers=1)
        b = run_statistic_study(spec, workers=2)
        np.testing.assert_array_equal(a.empirical, b.empirical)
        np.testing.assert_array_equal(a.hist_counts, b.hist_counts)
        assert a.moments == b.moments

    def test_write(self, tmp_path):
        s = run_statistic_study(ExperimentSpec("limit_laws/renyi", 200, R=500, seed=SeedSpec(4)))
        paths = s.write(str(tmp_path))
        d = json.loads(open(paths["json"]).read())
        assert d["R"] == 500 and d["seed"]["master_seed"] == 4
        rows = list(csv.reader(open(paths["qq"])))
        assert rows[0] == ["percentile", "theoretical", "empirical"] and len(rows) == 11
        hist = list(csv.reader(open(paths["hist"])))
        assert sum(int(r[2]) for r in hist[1:]) == 500


class TestSizePower:
    def test_wilson(self):
        lo, hi = wilson_interval(50, 1000)
        # closed form Wilson interval
        p, n, z = 0.05, 1000, 1.959963984540054
        c = (p + z * z / (2 * n)) / (1 + z * z / n)
        h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        assert lo == pytest.approx(c - h, abs=1e-10) and hi == pytest.approx(c + h, abs=1e-10)

    @pytest.mark.parametrize("test_id", ["gumbel", "renyi", "exp_gap"])
    def test_size_row_and_monotone(self, test_id):
        spec = ExperimentSpec("sp", 3600, R=2000, seed=SeedSpec(5))
        tab = run_size_power(spec, test_id, [0.0, 0.025, 0.05, 0.075, 0.1])
        rates = tab.rates
        lo, hi = tab.intervals()[0]
        assert lo <= 0.07 and hi >= 0.035
        assert np.all(np.diff(rates) >= 0)
        rows = list(tab.rows())
        assert rows[0]["jump"] == 0.0 and rows[0]["rate"] == rates[0]

    def test_jump0_equals_size(self):
        spec = ExperimentSpec("sp", 1000, R=500, seed=SeedSpec(6))
        a = run_size_power(spec, "gumbel", [0.0]).rates[0]
        b = run_size_power(spec, "gumbel", [0.0, 0.1]).rates[0]
        assert a == b

    def test_unknown(self):
        with pytest.raises(DistributionError):
            run_size_power(ExperimentSpec("sp", 100, R=1), "other", [0.0])


class TestChecks:
    def test_reflection(self):
        s = check_reflection(10_000, [-0.5, -3.0], SeedSpec(7))
        assert abs(s.empirical[0] - 0.61708) < 0.015
        assert s.theoretical[0] == pytest.approx(2 * 0.308538, abs=1e-5)
        assert s.theoretical[1] == pytest.approx(0.0026998, abs=1e-7)
        assert abs(s.empirical[1] - s.theoretical[1]) < 0.002
        assert s.extra["joint_theoretical"][0] == pytest.approx(0.45842, abs=1e-5)
        assert abs(s.extra["joint_empirical"][0] - 0.45842) < 0.015

    def test_reflection_domain(self):
        with pytest.raises(DistributionError):
            check_reflection(10, [0.5])

    def test_mixed_halfnormal(self):
        noise = NoiseSpec.lomn_exponential(10.0)
        a = check_mixed_halfnormal(40, 10**5, 0.1, 1.0, noise, SeedSpec(8))
        assert abs(a.moments["mean_ratio"] - 1) < 0.1
        assert abs(a.moments["var_over_mean2"] / ((math.pi - 2) / 2) - 1) < 0.15
        b = check_mixed_halfnormal(40, 10**5, 0.1, 2.0, noise, SeedSpec(8))
        assert b.moments["mean"][0] / a.moments["mean"][0] == pytest.approx(2.0, rel=0.05)

    def test_mixed_halfnormal_guard(self):
        with pytest.raises(DistributionError):
            check_mixed_halfnormal(1, 1000, 0.01, 1.0, NoiseSpec(), SeedSpec())

    def test_rv_clt(self):
        s = check_rv_clt(10_000, 10_000, 1.0, SeedSpec(9))
        assert 1.9 <= s.moments["var_centered"] <= 2.1
        assert 1.9 <= s.moments["var_log"] <= 2.1

    def test_taxi(self):
        theta, n = 2.0, 10_000
        s = run_taxi(2000, theta, n, SeedSpec(10))
        m = s.moments
        assert abs(m["bias_umvu"][0]) < 3 * m["bias_umvu"][1]
        assert 0.5 <= m["mse_ml"][0] * n**2 / (2 * theta**2) <= 1.5
        assert m["mse_mm"][0] * n / (theta**2 / 3) == pytest.approx(1.0, rel=0.1)
        assert m["mse_umvu"][0] < m["mse_mm"][0]

    def test_lomn_clt_small(self):
        s = check_lomn_clt(100, 20_000, seed=SeedSpec(11), psi_paths=4000)
        assert abs(s.moments["mean_corrected"] - 1.0) < 0.15
        assert s.moments["mean_raw"] > s.moments["mean_corrected"]
        assert s.moments["sd_theory"] == pytest.approx(math.sqrt(2.438099 / 49), rel=1e-5)

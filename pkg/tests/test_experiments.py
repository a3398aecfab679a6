import json
import math

import numpy as np
import pytest

from sphere_sgd.dynamics import SGDConfig, run_online_sgd
from sphere_sgd.experiments import (
    ScanConfig,
    fit_loglog_slope,
    lln_experiment,
    make_model,
    refutation_experiment,
    resolve_rule,
    same_data_comparison,
    scaling_scan,
    search_descent_split,
)
from sphere_sgd.hermite import hermite_profile, supervised_population_profile
from sphere_sgd.models import PopulationModel

GRID = [256, 512, 1024, 2048]


class TestSlope:
    def test_power_law(self):
        slope, intercept, ci = fit_loglog_slope([(n, n ** 2) for n in GRID])
        assert abs(slope - 2.0) < 1e-12
        assert abs(intercept) < 1e-10
        assert ci[0] <= slope <= ci[1]

    def test_constant(self):
        slope, _, _ = fit_loglog_slope([(n, 7.0) for n in GRID])
        assert abs(slope) < 1e-12

    def test_n_log_n(self):
        slope, _, _ = fit_loglog_slope([(n, n * math.log(n)) for n in GRID])
        assert 1.05 < slope < 1.25

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([(1, 1.0), (2, 2.0)])
        with pytest.raises(ValueError):
            fit_loglog_slope([(1, 1.0), (2, 0.0), (3, 3.0)])

    def test_paired_bootstrap(self, rng):
        samples = {n: n * np.exp(rng.normal(0, 0.3, 20)) for n in GRID}
        pairs = [(n, float(np.median(v))) for n, v in samples.items()]
        slope, _, ci = fit_loglog_slope(pairs, samples=samples, seed=3)
        assert ci[0] <= slope <= ci[1]
        assert 0.7 < slope < 1.3
        assert fit_loglog_slope(pairs, samples=samples, seed=3) == (slope, _, ci)


class TestRules:
    def test_forms(self):
        assert resolve_rule(0.3, 100) == 0.3
        assert resolve_rule({100: 0.1, "200": 0.2}, 200) == 0.2
        assert resolve_rule({"coef": 2.0, "power": -1}, 4) == 0.5
        assert resolve_rule(lambda n: n / 10, 50) == 5.0
        with pytest.raises(KeyError):
            resolve_rule({100: 0.1}, 300)
        with pytest.raises(ValueError):
            resolve_rule("theory", 100)

    def test_make_model(self):
        m = make_model({"family": "supervised", "activation": "relu"}, 33)
        assert m.dim == 33


class TestScanConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScanConfig({"family": "supervised", "activation": "linear"}, [64, 32, 128])
        with pytest.raises(ValueError):
            ScanConfig({"family": "supervised", "activation": "linear"}, [32, 64, 128],
                       seeds_per_cell=4)

    def test_thresholds(self):
        cfg = ScanConfig({"family": "supervised", "activation": "linear"}, [32, 64, 128],
                         descent_eta=0.3)
        assert cfg.thresholds() == (0.3, 0.5, 0.7)


def small_scan(**kw):
    base = dict(model={"family": "supervised", "activation": "linear"}, N_grid=[32, 64, 128],
                seeds_per_cell=5, delta_rule=0.5, master_seed=7)
    base.update(kw)
    return scaling_scan(ScanConfig(**base))


class TestScan:
    def test_linear_runs_and_is_deterministic(self, tmp_path):
        a, b = small_scan(), small_scan()
        assert a.k == 1 and a.scaling_observed
        for res, tag in ((a, "a"), (b, "b")):
            res.write_csv(tmp_path / f"{tag}.csv")
            res.write_json(tmp_path / f"{tag}.json")
            res.write_plot_data(tmp_path / f"{tag}_plot.csv")
        for name in ("{}.csv", "{}.json", "{}_plot.csv"):
            assert (tmp_path / name.format("a")).read_bytes() == (tmp_path / name.format("b")).read_bytes()
        for row in a.per_N:
            assert row["q25"] <= row["q50"] <= row["q75"]
        assert a.ci[0] <= a.slope <= a.ci[1]
        header = (tmp_path / "a.csv").read_text().splitlines()[0]
        assert header == "N,seed,tau,censored,final_m"
        assert json.loads((tmp_path / "a.json").read_text())["k"] == 1

    def test_censoring_monotone(self):
        short = small_scan(alpha_rule=0.3)
        long = small_scan(alpha_rule=3.0)
        for c_s, c_l in zip(sorted(short.cells, key=lambda c: (c["N"], c["seed"])),
                            sorted(long.cells, key=lambda c: (c["N"], c["seed"]))):
            assert c_l["tau"] <= c_s["tau"]
            if not c_s["censored"]:
                assert c_l["tau"] == c_s["tau"]

    def test_all_censored_flag(self):
        res = small_scan(alpha_rule=0.01)
        assert not res.scaling_observed
        assert any("scaling not observed" in f for f in res.flags)
        assert all(c["censored"] for c in res.cells)
        assert math.isinf(res.taus(32)[0])

    def test_assumption_a_checked(self):
        with pytest.raises(ValueError):
            small_scan(model={"family": "supervised", "activation": "zero"})


class TestLLN:
    def test_zero_noise(self):
        prof = supervised_population_profile(hermite_profile("square"))
        res = lln_experiment(lambda n: PopulationModel(n, prof), [50, 100, 200], 0.5, 0.1, 2.0,
                             seeds=3)
        assert all(r["median"] < 1e-12 for r in res.rows)

    def test_constraint(self):
        with pytest.raises(ValueError, match="alpha delta"):
            lln_experiment({"family": "supervised", "activation": "square"}, [50, 100, 200],
                           0.5, 0.5, 10.0, seeds=3)

    def test_deviation_summary(self):
        res = lln_experiment({"family": "supervised", "activation": "square"}, [64, 256, 1024],
                             0.5, {"coef": 6.4, "power": -1}, {"coef": 0.05, "power": 1},
                             seeds=5)
        assert [r["N"] for r in res.rows] == [64, 256, 1024]
        for r in res.rows:
            assert r["q25"] <= r["median"] <= r["q75"]
            assert r["alpha_delta2"] <= 0.05
        assert "deviations" not in res.summary()["rows"][0]


class TestRefutation:
    def test_small_alpha_k2(self):
        res = refutation_experiment({"family": "supervised", "activation": "square"}, 512,
                                    alpha=1.0, delta=0.2, eta=0.3, seeds=10)
        assert res.exceed_fraction <= 0.2
        assert res.exceeded.shape == (10,)

    def test_default_alpha(self):
        res = refutation_experiment({"family": "supervised", "activation": "linear"}, 64, seeds=5)
        assert res.alpha == 0.2
        res = refutation_experiment({"family": "supervised", "activation": "square"}, 64, seeds=5)
        assert res.alpha == pytest.approx(math.log(64) / 10)


class TestSplit:
    def test_dicts(self):
        runs = [{0.2: 100, 0.8: 120}, {0.2: 50}, {0.2: 10, 0.8: 40}]
        res = search_descent_split(runs, 0.2)
        assert res.excluded == 1
        assert res.rows == [(100, 20, 20 / 120), (10, 30, 30 / 40)]
        assert res.median_descent_fraction() == pytest.approx((20 / 120 + 0.75) / 2)

    def test_k1_descent_not_small(self):
        model = make_model({"family": "supervised", "activation": "linear"}, 200)
        trajs = [run_online_sgd(model, SGDConfig(200, 0.5, 20_000, record_stride=1, seed=1,
                                                 run_index=j)) for j in range(5)]
        res = search_descent_split(trajs, 0.3)
        assert res.excluded == 0
        assert res.median_descent_fraction() > 0.2

    def test_bad_eta(self):
        with pytest.raises(ValueError):
            search_descent_split([], 0.6)


class TestComparison:
    def test_duplicate_activation(self):
        res = same_data_comparison(["square", "square"], 64, 20.0, 0.3, seeds=4,
                                   keep_trajectories=True)
        assert np.array_equal(res.taus[:, 0], res.taus[:, 1])
        for a, b in res.trajectories:
            assert np.array_equal(a.m_values, b.m_values)

    def test_k1_pair_comparable(self):
        # the cubic's drift is ~9x the linear one but its noise is far larger;
        # the two roughly balance near delta = 0.01 at this N
        res = same_data_comparison(["linear", "cubic"], 200, 3000.0, 0.01, seeds=10, eta=0.5)
        ratio = np.maximum(res.taus[:, 0] / res.taus[:, 1], res.taus[:, 1] / res.taus[:, 0])
        assert np.mean(ratio <= 4) >= 0.8

    def test_ordering_fraction(self):
        res = same_data_comparison(["linear", "square"], 32, 1.0, 0.1, seeds=5)
        res.taus = np.array([[1, 2], [3, 2], [1, np.inf], [np.inf, np.inf], [5, 6]], float)
        assert res.ordering_fraction() == pytest.approx(3 / 5)
        assert res.ordering_fraction([1, 0]) == pytest.approx(1 / 5)

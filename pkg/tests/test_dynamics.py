import csv
import json
import math

import numpy as np
import pytest

from sphere_sgd.dynamics import (
    FixedCorrelation,
    SGDConfig,
    Trajectory,
    UniformUpperHalf,
    difference_inequality_check,
    hitting_time,
    martingale_scaling_probe,
    run_online_sgd,
    run_population_dynamics,
    sgd_step,
)
from sphere_sgd.hermite import hermite_profile, supervised_population_profile
from sphere_sgd.models import (
    CanonicalGLM,
    GaussianMixture,
    PopulationModel,
    Sample,
    SupervisedSingleLayer,
    TensorPCA,
)
from sphere_sgd.sphere import UnitVector, geodesic_point
from sphere_sgd.theory import predicted_weak_recovery_time


def linear_profile():
    return supervised_population_profile(hermite_profile("linear"))


class TestStep:
    def test_zero_gradient_sample(self):
        m = SupervisedSingleLayer(3, "linear")
        x = UnitVector([0.6, 0.8, 0.0])
        s = Sample("supervised", np.array([0.6, 0.8, 0.0]), 1.0)  # a.x == y
        x_new, diag = sgd_step(x, s, 0.7, m)
        assert np.array_equal(x_new.coords, x.coords)
        assert diag.r == 1.0

    def test_zero_step(self, rng):
        m = SupervisedSingleLayer(4, "relu")
        x = UnitVector(rng.standard_normal(4))
        x_new, _ = sgd_step(x, m.sample(rng), 0.0, m)
        assert np.array_equal(x_new.coords, x.coords)

    def test_hand_normalization(self):
        m = SupervisedSingleLayer(2, "linear")
        # gradient 2 (a.x - y) a = (0, 1) at x = e_1, and delta/N = 0.1
        s = Sample("supervised", np.array([0.0, 1.0]), -0.5)
        x_new, diag = sgd_step(UnitVector([1.0, 0.0]), s, 0.2, m)
        assert np.allclose(x_new.coords, np.array([1.0, -0.1]) / math.sqrt(1.01), atol=1e-15)
        assert x_new.coords[0] == pytest.approx(0.99503719, abs=1e-8)
        assert diag.r == pytest.approx(math.sqrt(1.01))

    def test_step_closure(self, rng):
        m = GaussianMixture(6, p=0.5)
        x = UnitVector(rng.standard_normal(6))
        m0 = x.coords[0]
        x_new, d = sgd_step(x, m.sample(rng), 0.5, m)
        assert x_new.coords[0] == pytest.approx(m0 + d.drift - d.martingale + d.radial, abs=1e-15)
        assert d.r >= 1.0 - 1e-12

    def test_dimension_mismatch(self, rng):
        m = SupervisedSingleLayer(4, "linear")
        with pytest.raises(ValueError):
            sgd_step(UnitVector([1.0, 0.0]), m.sample(rng), 0.1, m)

    def test_martingale_increments_centered(self, rng):
        m = SupervisedSingleLayer(20, "square")
        for lat in (0.1, 0.5, 0.8):
            x = geodesic_point(m.theta, lat, rng=rng)
            block = m.sample_block(rng, 10_000)
            inc = np.array([sgd_step(x, s, 0.5, m)[1].martingale for s in block])
            assert abs(inc.mean()) < 4 * inc.std(ddof=1) / math.sqrt(inc.size)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SGDConfig(1, 0.1, 10)
        with pytest.raises(ValueError):
            SGDConfig(5, -0.1, 10)
        with pytest.raises(ValueError):
            SGDConfig(5, 0.1, 10, thresholds=(0.5, 0.3))
        with pytest.raises(ValueError):
            SGDConfig(5, 0.1, 10, record_stride=0)
        with pytest.raises(ValueError):
            FixedCorrelation(1.5)

    def test_from_alpha_and_stride(self):
        cfg = SGDConfig.from_alpha(100, 0.5, 2.5)
        assert cfg.total_steps == 250 and cfg.alpha == 2.5
        assert cfg.stride == 1
        assert SGDConfig(10, 0.1, 10 ** 6).stride == 100


class TestOnline:
    def test_zero_budget(self):
        traj = run_online_sgd(SupervisedSingleLayer(8, "linear"), SGDConfig(8, 0.5, 0))
        assert list(traj.recorded_times) == [0]
        assert traj.m_values.size == 1 and traj.steps_run == 0

    def test_linear_recovers(self):
        model = SupervisedSingleLayer(500, "linear")
        finals = [run_online_sgd(model, SGDConfig.from_alpha(500, 0.5, 50, seed=11, run_index=j)).final_m
                  for j in range(20)]
        assert sum(f > 0.9 for f in finals) >= 18

    def test_deterministic(self):
        model = SupervisedSingleLayer(30, "sigmoid")
        cfg = SGDConfig(30, 0.5, 2000, record_stride=7, seed=4, run_index=2)
        a, b = run_online_sgd(model, cfg), run_online_sgd(model, cfg)
        assert np.array_equal(a.m_values, b.m_values)
        assert np.array_equal(a.final_x, b.final_x)

    @pytest.mark.parametrize("model", [
        SupervisedSingleLayer(40, "square"),
        SupervisedSingleLayer(40, "relu"),
        CanonicalGLM(40, "poisson"),
        GaussianMixture(40, p=0.5),
    ], ids=lambda m: repr(m))
    def test_engines_agree_and_close(self, model):
        # small steps: at delta ~ 0.2 the map is chaotic and rounding differences grow
        cfg = SGDConfig(40, 0.05, 3000, record_stride=10, diagnostics=True, seed=1,
                        thresholds=(0.2, 0.4))
        fast = run_online_sgd(model, cfg)
        slow = run_online_sgd(model, cfg, engine="python")
        assert np.allclose(fast.m_values, slow.m_values, atol=1e-10)
        assert fast.hitting_times == slow.hitting_times
        for traj in (fast, slow):
            dec = traj.decomposition
            recon = traj.m0 + dec["drift"] - dec["martingale"] + dec["radial"]
            assert np.max(np.abs(recon - traj.m_values)) < 1e-9
            assert np.all(dec["r_max"] >= 1.0)
        assert abs(np.linalg.norm(fast.final_x) - 1.0) < 1e-12

    def test_tensor_python_path(self):
        model = TensorPCA(6, 3)
        traj = run_online_sgd(model, SGDConfig(6, 0.2, 50, record_stride=1, diagnostics=True))
        dec = traj.decomposition
        recon = traj.m0 + dec["drift"] - dec["martingale"] + dec["radial"]
        assert np.max(np.abs(recon - traj.m_values)) < 1e-9

    def test_hitting_times_exact_between_records(self):
        model = SupervisedSingleLayer(50, "linear")
        coarse = run_online_sgd(model, SGDConfig(50, 0.5, 3000, record_stride=1000,
                                                 thresholds=(0.3, 0.6), seed=2))
        fine = run_online_sgd(model, SGDConfig(50, 0.5, 3000, record_stride=1, seed=2))
        for eta, t in coarse.hitting_times.items():
            assert t == hitting_time(fine, eta)
        assert coarse.hitting_times[0.3] <= coarse.hitting_times[0.6]

    def test_censoring_monotone(self):
        model = SupervisedSingleLayer(64, "square")
        short = run_online_sgd(model, SGDConfig(64, 0.3, 400, thresholds=(0.5,), seed=9))
        long = run_online_sgd(model, SGDConfig(64, 0.3, 4000, thresholds=(0.5,), seed=9))
        if 0.5 in short.hitting_times:
            assert short.hitting_times[0.5] == long.hitting_times[0.5]
        assert 0.5 in long.hitting_times

    def test_stop_rules(self):
        model = SupervisedSingleLayer(30, "linear")
        traj = run_online_sgd(model, SGDConfig(30, 0.5, 10 ** 5, thresholds=(0.5,),
                                               stop_at_threshold=True))
        assert traj.stop_reason == "threshold"
        assert traj.steps_run == traj.hitting_times[0.5]
        assert traj.final_m >= 0.5
        even = SupervisedSingleLayer(30, "square")
        below = run_online_sgd(even, SGDConfig(30, 0.3, 10 ** 5, init=FixedCorrelation(-0.3),
                                               stop_below=-0.6, seed=3))
        assert below.stop_reason == "below"
        assert below.final_m <= -0.6 < below.m_values[-2]

    def test_fixed_correlation_start(self):
        traj = run_online_sgd(SupervisedSingleLayer(30, "linear"),
                              SGDConfig(30, 0.5, 5, init=FixedCorrelation(0.25)))
        assert traj.m0 == pytest.approx(0.25, abs=1e-12)

    def test_csv_and_json(self, tmp_path):
        traj = run_online_sgd(SupervisedSingleLayer(10, "linear"),
                              SGDConfig(10, 0.5, 100, record_stride=10, thresholds=(0.5,),
                                        diagnostics=True))
        path = tmp_path / "t.csv"
        traj.to_csv(path)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["step", "m", "drift_cum", "martingale_cum", "radial_cum", "r_max"]
        assert len(rows) == traj.m_values.size + 1
        assert float(rows[-1][1]) == traj.m_values[-1]
        assert set(json.loads(traj.hitting_times_json())) <= {"0.5"}

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            run_online_sgd(SupervisedSingleLayer(10, "linear"), SGDConfig(11, 0.5, 10))


class TestPopulation:
    def test_equator_fixed_for_k2(self):
        prof = supervised_population_profile(hermite_profile("square"))
        traj = run_population_dynamics(prof, SGDConfig(100, 1.0, 500), 0.0)
        # quadrature leaves phi'(0) at rounding level
        assert np.max(np.abs(traj.m_values)) < 1e-14

    def test_pole_fixed(self):
        traj = run_population_dynamics(linear_profile(), SGDConfig(100, 1.0, 500), 1.0)
        assert np.all(traj.m_values == 1.0)

    def test_k1_crossing_vs_prediction(self):
        n, delta, m0 = 1000, 1.0, 0.01
        traj = run_population_dynamics(linear_profile(),
                                       SGDConfig(n, delta, 20_000, thresholds=(0.5,)), m0)
        t_pop = traj.hitting_times[0.5]
        t_star = predicted_weak_recovery_time(1, n, delta, 0.5, m0, 2.0)
        assert t_star / 8 <= t_pop <= t_star * 8

    def test_monotone_and_converges(self):
        prof = supervised_population_profile(hermite_profile("hermite3"))
        n, delta = 50, 1.0
        traj = run_population_dynamics(prof, SGDConfig(n, delta, 400_000, record_stride=100), 0.2)
        assert np.all(np.diff(traj.m_values) >= 0)
        assert traj.final_m > 1 - 1e-3

    def test_matches_zero_noise_sgd(self, rng):
        prof = linear_profile()
        cfg = SGDConfig(20, 0.5, 300, init=FixedCorrelation(0.1), record_stride=1)
        sgd = run_online_sgd(PopulationModel(20, prof), cfg)
        pop = run_population_dynamics(prof, cfg, 0.1)
        assert np.max(np.abs(sgd.m_values - pop.m_values)) < 1e-12


class TestHitting:
    def make(self, ms):
        ms = np.asarray(ms, dtype=float)
        return Trajectory(np.arange(ms.size), ms, {}, float(ms[-1]), ms.size - 1)

    def test_examples(self):
        assert hitting_time(self.make([0.0] * 10), 0.5) is None
        path = self.make(np.linspace(0.0, 1.0, 11) ** 0.5 * 0.0 + np.r_[np.linspace(0, 0.45, 7), np.linspace(0.5, 0.9, 4)])
        assert hitting_time(path, 0.5) == 7
        assert hitting_time(path, 0.3) <= hitting_time(path, 0.6)
        assert hitting_time(path, 0.0, "down") == 0

    def test_bad_args(self):
        t = self.make([0.0, 0.1])
        with pytest.raises(ValueError):
            hitting_time(t, 1.0)
        with pytest.raises(ValueError):
            hitting_time(t, 0.5, "sideways")


class TestInequality:
    def test_zero_noise_holds(self):
        prof = supervised_population_profile(hermite_profile("square"))
        n = 200
        cfg = SGDConfig(n, 0.5, 20_000, init=FixedCorrelation(1 / math.sqrt(n)),
                        record_stride=1, diagnostics=True)
        traj = run_online_sgd(PopulationModel(n, prof), cfg)
        rep = difference_inequality_check(traj, prof, eta=0.5, gamma=1.0)
        assert rep.fraction_satisfied == 1.0 and rep.holds_on_window

    def test_frozen_path_fails_for_k1(self):
        prof = linear_profile()
        n, steps = 10, 10_000
        ms = np.full(steps + 1, 0.3)
        dec = {k: np.zeros(steps + 1) for k in ("drift", "martingale", "radial", "r_max")}
        traj = Trajectory(np.arange(steps + 1), ms, {}, 0.3, steps, dec,
                          meta={"dim": n, "step_size": 1.0})
        rep = difference_inequality_check(traj, prof, eta=0.9, gamma=1.0)
        assert rep.fraction_satisfied < 0.2
        assert not rep.holds_on_window

    def test_needs_diagnostics(self):
        traj = run_online_sgd(SupervisedSingleLayer(10, "linear"), SGDConfig(10, 0.5, 10))
        with pytest.raises(ValueError):
            difference_inequality_check(traj, linear_profile(), 0.5, 1.0)


class TestMartingaleProbe:
    def test_zero_noise(self):
        prof = linear_profile()
        out = martingale_scaling_probe(PopulationModel(30, prof),
                                       SGDConfig(30, 0.5, 1, init=FixedCorrelation(0.1)),
                                       [10, 100], seeds=3)
        assert all(v == pytest.approx(0.0, abs=1e-15) for _, v in out)

    def test_linear_in_delta(self):
        model = SupervisedSingleLayer(1000, "square")
        cfg = SGDConfig(1000, 0.05, 1)
        (_, small), = martingale_scaling_probe(model, cfg, [1000], seeds=30)
        (_, big), = martingale_scaling_probe(model, SGDConfig(1000, 0.1, 1), [1000], seeds=30)
        assert 1.6 <= big / small <= 2.4

import numpy as np
import pytest

from driftmpc.errors import ConfigError
from driftmpc.harness import (EightSpec, EpisodeTrace, Scenario, case_scenario,
                              metrics_from_trace, report, run_episode,
                              scenario_from_file, scenario_to_file, tune)
from driftmpc.paths import ClothoidSpec
from driftmpc.tracking import AptParams

CIRCLE = ClothoidSpec(kappa=1 / 40, kappa_prime=0.0, length=500.0)


@pytest.fixture(scope="module")
def hold_scenario():
    # constant-radius circle, adaptive law with neutral weights and the
    # steering feedback disabled: a pure equilibrium-hold configuration
    return case_scenario(case=1, mode="apt", path=CIRCLE,
                         apt=AptParams(w_r=1.0, w_e=0.0, k=0.0))


class TestRunEpisode:
    def test_nominal_hold_drift_rmse(self, hold_scenario):
        trace, m = run_episode(hold_scenario, (-0.52, 1.0, 0.0))
        assert m.rmse_V < 1e-3
        assert m.rmse_beta < 1e-3
        assert m.rmse_r < 1e-3
        assert m.rmse_delta < 1e-3
        assert m.rmse_F < 1e-1

    def test_ppt_completes_stock_path(self):
        sc = case_scenario(case=1, mode="ppt")
        trace, m = run_episode(sc)
        assert not trace.failed
        assert len(trace) == sc.n_steps
        assert m.rmse_e < 1.0
        assert np.all(trace.columns["dep_converged"] == 1.0)

    def test_learned_weights_track_tightly(self):
        # full-learning mode at representative learned values for this
        # plant: the whole episode completes well inside the meter band
        sc = case_scenario(case=1, mode="almpc")
        trace, m = run_episode(sc, (-0.49, 0.99, 3.0))
        assert not trace.failed
        assert len(trace) == sc.n_steps
        assert m.max_abs_e < 1.0

    def test_mode_requires_theta(self):
        sc = case_scenario(case=1, mode="apt")
        with pytest.raises(ConfigError):
            run_episode(sc, None)

    def test_ppt_trace_independent_of_weights(self):
        sc = case_scenario(case=1, mode="ppt", T=3.0)
        t1, _ = run_episode(sc, (-0.52, 1.0, 0.0))
        t2, _ = run_episode(sc, (-0.52, 1.7, 2.5))
        assert np.array_equal(t1.columns["R_eq"], t2.columns["R_eq"])
        assert np.array_equal(t1.columns["delta_cmd"], t2.columns["delta_cmd"])

    def test_dep_mode_radius_independent_of_weights(self):
        sc = case_scenario(case=1, mode="dep", T=3.0)
        t1, _ = run_episode(sc, (-0.48, 0.2, -3.0))
        t2, _ = run_episode(sc, (-0.48, 1.9, 4.0))
        assert np.array_equal(t1.columns["R_eq"], t2.columns["R_eq"])

    def test_apt_radius_depends_on_weights(self):
        sc = case_scenario(case=1, mode="apt", T=3.0)
        t1, _ = run_episode(sc, (-0.52, 1.0, 0.5))
        t2, _ = run_episode(sc, (-0.52, 1.0, 2.0))
        assert not np.array_equal(t1.columns["R_eq"], t2.columns["R_eq"])

    def test_determinism_bit_for_bit(self, tmp_path):
        sc = case_scenario(case=2, mode="apt", T=5.0)
        t1, _ = run_episode(sc, (-0.52, 0.9, 2.0))
        t2, _ = run_episode(sc, (-0.52, 0.9, 2.0))
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        t1.to_csv(f1)
        t2.to_csv(f2)
        assert f1.read_bytes() == f2.read_bytes()

    def test_inputs_respect_limits_posthoc(self, tmp_path):
        sc = case_scenario(case=1, mode="ppt", T=8.0)
        trace, _ = run_episode(sc)
        f = tmp_path / "t.csv"
        trace.to_csv(f)
        loaded = EpisodeTrace.from_csv(f)
        d = loaded.columns["delta_cmd"]
        F = loaded.columns["F_xr_cmd"]
        lim = sc.limits
        assert np.all(d >= lim.delta_min - 1e-9) and np.all(d <= lim.delta_max + 1e-9)
        assert np.all(F >= lim.F_min - 1e-6) and np.all(F <= lim.F_max + 1e-6)
        assert np.all(np.abs(np.diff(d)) <= lim.d_delta_lim + 1e-9)
        assert np.all(np.abs(np.diff(F)) <= lim.d_F_lim + 1e-6)

    def test_energy_sanity(self):
        sc = case_scenario(case=1, mode="ppt")
        trace, _ = run_episode(sc)
        V = trace.columns["V"]
        assert np.all(V >= 0.1) and np.all(V <= 40.0)

    def test_failure_classified_and_penalized(self):
        # strongly positive feedback gain destabilizes this plant
        sc = case_scenario(case=2, mode="apt",
                           apt=AptParams(w_r=1.0, w_e=0.0, k=0.6))
        trace, m = run_episode(sc, (-0.52, 1.0, -4.0))
        assert trace.failed
        assert trace.failure_reason != ""
        assert m.cost_J == sc.cost.j_fail

    def test_eight_path_scenario_runs(self):
        sc = Scenario(path=EightSpec(radius=40.0), mode="apt", T=10.0)
        trace, m = run_episode(sc, (-0.52, 1.0, 2.0))
        assert len(trace) > 50  # healthy on the first lobe
        assert np.isfinite(m.cost_J)

    def test_timestamps_uniform(self):
        sc = case_scenario(case=1, mode="ppt", T=4.0)
        trace, _ = run_episode(sc)
        t = trace.columns["t"]
        assert np.allclose(np.diff(t), sc.mpc.dT)


class TestTraceCsv:
    def test_round_trip_exact(self, tmp_path):
        sc = case_scenario(case=1, mode="ppt", T=3.0)
        trace, _ = run_episode(sc)
        f = tmp_path / "trace.csv"
        trace.to_csv(f)
        loaded = EpisodeTrace.from_csv(f)
        for name, col in trace.columns.items():
            np.testing.assert_allclose(loaded.columns[name], col, rtol=1e-11,
                                       err_msg=name)

    def test_metrics_reproduce_from_csv(self, tmp_path):
        sc = case_scenario(case=1, mode="ppt", T=6.0)
        trace, metrics = run_episode(sc)
        f = tmp_path / "trace.csv"
        trace.to_csv(f)
        loaded = EpisodeTrace.from_csv(f)
        again = metrics_from_trace(loaded, sc.cost)
        for name in metrics.FIELDS:
            a, b = getattr(metrics, name), getattr(again, name)
            assert abs(a - b) <= 1e-9 * max(1.0, abs(a)), name


class TestReport:
    def test_single_trace_table(self):
        sc = case_scenario(case=1, mode="ppt", T=3.0)
        trace, _ = run_episode(sc)
        table, reports = report([trace], ["baseline"])
        lines = table.splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("baseline")
        assert len(reports) == 1

    def test_identical_traces_identical_rows(self):
        sc = case_scenario(case=1, mode="ppt", T=3.0)
        t1, _ = run_episode(sc)
        t2, _ = run_episode(sc)
        table, _ = report([t1, t2], ["a", "b"])
        rows = table.splitlines()[1:]
        assert rows[0].replace("a", "x", 1) == rows[1].replace("b", "x", 1)

    def test_mismatched_lengths_rejected(self):
        sc1 = case_scenario(case=1, mode="ppt", T=3.0)
        sc2 = case_scenario(case=1, mode="ppt", T=4.0)
        t1, _ = run_episode(sc1)
        t2, _ = run_episode(sc2)
        with pytest.raises(ConfigError):
            report([t1, t2], ["a", "b"])

    def test_csv_bundle(self, tmp_path):
        sc = case_scenario(case=1, mode="ppt", T=3.0)
        trace, _ = run_episode(sc)
        report([trace], ["run"], out_dir=tmp_path)
        assert (tmp_path / "trace_run.csv").exists()
        assert (tmp_path / "metrics.csv").exists()


class TestScenarioIo:
    def test_round_trip(self, tmp_path):
        sc = case_scenario(case=2, mode="almpc", T=6.0, seed=11)
        f = tmp_path / "scenario.json"
        scenario_to_file(sc, f)
        loaded = scenario_from_file(f)
        assert loaded == sc

    def test_eight_round_trip(self, tmp_path):
        sc = Scenario(path=EightSpec(radius=35.0), mode="ppt", T=5.0)
        f = tmp_path / "eight.json"
        scenario_to_file(sc, f)
        assert scenario_from_file(f) == sc

    def test_malformed_rejected(self, tmp_path):
        f = tmp_path / "bad.json"
        f.write_text('{"mode": "ppt"}')
        with pytest.raises(ConfigError):
            scenario_from_file(f)

    def test_invalid_mode_rejected(self):
        with pytest.raises(ConfigError):
            case_scenario(case=1, mode="zigzag")

    def test_duration_must_align(self):
        with pytest.raises(ConfigError):
            case_scenario(case=1, mode="ppt", T=1.234)


class TestTune:
    def test_smoke_and_history(self):
        sc = case_scenario(case=1, mode="dep", T=6.0)
        res = tune(sc, init=3, budget=5, seed=5)
        assert len(res.bo.costs) == 5
        assert np.all(np.diff(res.bo.best_so_far) <= 1e-15)
        assert res.history_thetas.shape == (5, 3)
        # pinned components stay at the defaults in dep mode
        assert np.allclose(res.history_thetas[:, 1], 1.0)
        assert np.allclose(res.history_thetas[:, 2], 0.0)

    def test_history_csv_deterministic(self, tmp_path):
        sc = case_scenario(case=1, mode="dep", T=6.0)
        f1, f2 = tmp_path / "h1.csv", tmp_path / "h2.csv"
        tune(sc, init=3, budget=5, seed=7).history_csv(f1)
        tune(sc, init=3, budget=5, seed=7).history_csv(f2)
        assert f1.read_bytes() == f2.read_bytes()

    def test_ppt_mode_not_tunable(self):
        sc = case_scenario(case=1, mode="ppt")
        with pytest.raises(ConfigError):
            tune(sc, init=3, budget=5)

"""Benchmark scoring: achieved objectives, MAPE capping, timing."""

from __future__ import annotations

import numpy as np
import pytest

from ncolab.datagen import record_to_instance
from ncolab.envs import ControlGrid, eval_total_cost
from ncolab.errors import ConfigError
from ncolab.evaluation import (DIVERGENCE_CAP, achieved_objective,
                               evaluate_mape, evaluate_model, speedup,
                               time_classical_solver, time_inference,
                               time_operator)
from ncolab.solvers import DirectSolverConfig
from ncolab.training import TrainConfig, build_model, train


@pytest.fixture(scope="module")
def quick_model(pendulum_records):
    model = build_model("nasm", "pendulum", pendulum_records, seed=0)
    return train(model, pendulum_records,
                 TrainConfig(epochs=300, seed=0)).model


class TestAchievedObjective:
    def test_reference_control_achieves_reference_objective(self,
                                                            pendulum_bench):
        """Replaying the stored optimal knots reproduces j_opt exactly —
        the stored objective is the rollout cost of the stored control."""
        for r in pendulum_bench:
            j = achieved_objective(r, np.array(r["u_star"]))
            assert j == r["j_opt"]

    def test_time_domain_matches_rollout_cost(self, pendulum_bench):
        r = pendulum_bench[0]
        u = np.zeros((r["n_grid"], 1))
        expected = eval_total_cost(record_to_instance(r), ControlGrid(u))
        assert achieved_objective(r, u) == expected

    def test_curve_descent_reference_near_optimum(self, brachistochrone_bench):
        """The solver's sampled curve times within a fraction of a percent
        of the analytic optimum stored as j_opt."""
        for r in brachistochrone_bench:
            ape = abs(achieved_objective(r, np.array(r["u_star"])[:, 0])
                      - r["j_opt"]) / r["j_opt"]
            assert ape <= 5e-3

    def test_crossing_reference_near_optimum(self, zermelo_bench):
        for r in zermelo_bench:
            ape = abs(achieved_objective(r, np.array(r["u_star"])[:, 0])
                      - r["j_opt"]) / abs(r["j_opt"])
            assert ape <= 5e-3


class TestEvaluateModel:
    def test_perfect_predictions_score_zero(self, pendulum_bench):
        """A lookup oracle that replays the stored control gets MAPE 0."""

        class Oracle:
            arch = "nasm"

            class encoder:
                fields = ("x_goal",)

        # bypass the network entirely: monkeypatch predict_control
        import ncolab.evaluation as ev
        lookup = {tuple(r["x_goal"]): np.array(r["u_star"])
                  for r in pendulum_bench}
        original = ev.predict_control
        ev.predict_control = lambda m, f, t: lookup[tuple(f)]
        try:
            report = evaluate_model(Oracle(), pendulum_bench)
        finally:
            ev.predict_control = original
        assert report.mape == 0.0
        assert report.n == len(pendulum_bench)
        assert report.n_diverged == 0

    def test_trained_model_beats_untrained(self, pendulum_records,
                                           pendulum_bench, quick_model):
        untrained = build_model("nasm", "pendulum", pendulum_records, seed=0)
        trained_report = evaluate_model(quick_model, pendulum_bench)
        untrained_report = evaluate_model(untrained, pendulum_bench)
        assert trained_report.mape < untrained_report.mape
        assert trained_report.env_id == "pendulum"
        assert trained_report.arch == "nasm"

    def test_divergent_prediction_capped_and_flagged(self, pendulum_records,
                                                     pendulum_bench):
        """A model whose output explodes the rollout contributes the cap,
        not an unbounded average."""
        broken = build_model("mlp", "pendulum", pendulum_records, seed=0)
        broken.nets["net"].layers[-1][1][:] = 1e300
        with np.errstate(over="ignore", invalid="ignore"):
            report = evaluate_model(broken, pendulum_bench)
        assert report.n_diverged == len(pendulum_bench)
        assert report.mape == DIVERGENCE_CAP
        assert all(report.diverged)

    def test_alias(self, pendulum_bench, quick_model):
        a = evaluate_model(quick_model, pendulum_bench)
        b = evaluate_mape(quick_model, pendulum_bench)
        assert a.apes == b.apes

    def test_empty_benchmark_rejected(self, quick_model):
        with pytest.raises(ConfigError):
            evaluate_model(quick_model, [])


class TestTiming:
    def test_operator_timing_positive(self, pendulum_bench, quick_model):
        t = time_operator(quick_model, pendulum_bench[0], repeats=5)
        assert 0 < t < 1.0

    def test_inference_time_averages_records(self, pendulum_bench,
                                             quick_model):
        t_all = time_inference(quick_model, pendulum_bench[:2], repeats=3)
        t_one = time_inference(quick_model, pendulum_bench[0], repeats=3)
        assert t_all > 0 and t_one > 0

    def test_inference_time_rejects_empty(self, quick_model):
        with pytest.raises(ConfigError):
            time_inference(quick_model, [])

    def test_repeats_validation(self, pendulum_bench, quick_model):
        with pytest.raises(ConfigError):
            time_operator(quick_model, pendulum_bench[0], repeats=0)

    def test_classical_solver_slower_than_operator(self, pendulum_bench,
                                                   quick_model):
        """Even a heavily truncated classical solve costs more wall clock
        than one operator forward pass."""
        cheap = DirectSolverConfig(n_knots=100, max_iters=100)
        ratio = speedup(quick_model, pendulum_bench[0], repeats=5,
                        direct_config=cheap)
        assert ratio > 1.0

    def test_classical_timer_runs_all_families(self, pendulum_bench,
                                               brachistochrone_bench,
                                               zermelo_bench):
        from ncolab.solvers import ZermeloConfig

        t = time_classical_solver(
            pendulum_bench[0],
            direct_config=DirectSolverConfig(n_knots=100, max_iters=20))
        assert t > 0
        t = time_classical_solver(
            brachistochrone_bench[0],
            curve_config=DirectSolverConfig(n_knots=100, max_iters=20,
                                            lr0=0.02))
        assert t > 0
        t = time_classical_solver(
            zermelo_bench[0],
            zermelo_config=ZermeloConfig(n_grid=100, max_iters=20))
        assert t > 0

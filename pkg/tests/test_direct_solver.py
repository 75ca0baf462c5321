"""Adjoint gradient exactness and direct-solver behavior."""

from __future__ import annotations

import numpy as np
import pytest

from ncolab.envs import ENV_DIMS, SYNTHETIC_ENV_IDS, make_instance
from ncolab.errors import ShapeError
from ncolab.solvers import (DirectSolverConfig, adjoint_gradient,
                            finite_diff_objective_grad, solve_direct,
                            solve_direct_batch)

FAST = DirectSolverConfig(n_knots=20, max_iters=120)


def random_instance(env_id: str, rng, n_grid: int = 100):
    d_u, d_x = ENV_DIMS[env_id]
    goal = np.asarray(make_instance(env_id).cost.x_goal) + rng.uniform(
        -0.3, 0.3, size=d_x)
    return make_instance(env_id, x_goal=goal, n_grid=n_grid)


class TestAdjointGradient:
    @pytest.mark.parametrize("env_id", SYNTHETIC_ENV_IDS)
    def test_matches_central_differences(self, env_id):
        """The reverse-sweep gradient agrees with central finite differences
        to within 1e-5 relative error on random knot vectors."""
        rng = np.random.default_rng(11)
        d_u, _ = ENV_DIMS[env_id]
        for trial in range(2):
            instance = random_instance(env_id, rng)
            knots = rng.normal(scale=0.5, size=(20, d_u))
            j_adj, g_adj = adjoint_gradient(instance, knots)
            g_fd = finite_diff_objective_grad(instance, knots)
            rel = np.linalg.norm(g_adj - g_fd) / np.linalg.norm(g_fd)
            assert rel <= 1e-5
            assert np.isfinite(j_adj) and j_adj > 0

    def test_gradient_shape_follows_knots(self):
        instance = make_instance("quadrotor")
        knots = np.zeros((7, 4))
        _, g = adjoint_gradient(instance, knots)
        assert g.shape == (7, 4)

    def test_objective_matches_cost_eval(self):
        from ncolab.envs import ControlGrid, eval_total_cost, knot_indices

        instance = make_instance("pendulum")
        rng = np.random.default_rng(12)
        knots = rng.normal(size=(20, 1))
        j, _ = adjoint_gradient(instance, knots)
        dense = knots[knot_indices(instance.n_grid, 20)]
        dense = np.vstack([dense, dense[-1:]])
        assert j == pytest.approx(
            eval_total_cost(instance, ControlGrid(dense)), rel=1e-12)


class TestSolveDirect:
    def test_improves_on_initial_control(self):
        """The returned objective never exceeds the zero-control objective."""
        rng = np.random.default_rng(13)
        for env_id in ("pendulum", "cartpole"):
            instance = random_instance(env_id, rng)
            j0, _ = adjoint_gradient(instance, np.zeros((FAST.n_knots,
                                                         ENV_DIMS[env_id][0])))
            sol = solve_direct(instance, FAST)
            assert sol.objective <= j0
            assert not sol.diverged

    def test_run_to_run_determinism(self):
        instance = make_instance("pendulum")
        a = solve_direct(instance, FAST)
        b = solve_direct(instance, FAST)
        np.testing.assert_array_equal(a.controls.values, b.controls.values)
        assert a.objective == b.objective
        assert a.n_iters == b.n_iters
        assert a.grad_norm == b.grad_norm
        assert a.converged == b.converged

    def test_batch_rows_match_single_solves(self):
        rng = np.random.default_rng(14)
        instances = [random_instance("pendulum", rng) for _ in range(3)]
        batch = solve_direct_batch(instances, FAST)
        for inst, row in zip(instances, batch):
            single = solve_direct(inst, FAST)
            np.testing.assert_array_equal(row.controls.values,
                                          single.controls.values)
            assert row.objective == single.objective

    def test_batch_split_invariance(self):
        rng = np.random.default_rng(15)
        instances = [random_instance("robot_arm", rng) for _ in range(4)]
        whole = solve_direct_batch(instances, FAST)
        parts = solve_direct_batch(instances[:2], FAST) + solve_direct_batch(
            instances[2:], FAST)
        for a, b in zip(whole, parts):
            np.testing.assert_array_equal(a.controls.values, b.controls.values)
            assert a.objective == b.objective

    def test_mixed_environment_batch_rejected(self):
        with pytest.raises(ShapeError):
            solve_direct_batch([make_instance("pendulum"),
                                make_instance("cartpole")], FAST)
        with pytest.raises(ShapeError):
            solve_direct_batch([make_instance("pendulum"),
                                make_instance("pendulum", n_grid=50)], FAST)

    def test_final_knot_inert_on_full_grid(self):
        """With n_knots == n_grid the last knot drives no Euler step, so its
        gradient is exactly zero and the solver leaves it at the initial
        value."""
        instance = make_instance("pendulum")
        cfg = DirectSolverConfig(n_knots=100, max_iters=40)
        _, g = adjoint_gradient(instance, np.zeros((100, 1)))
        np.testing.assert_array_equal(g[-1], 0.0)
        sol = solve_direct(instance, cfg)
        np.testing.assert_array_equal(sol.controls.values[-1], 0.0)

    def test_warm_start_accepted(self):
        instance = make_instance("pendulum")
        warm = solve_direct(instance, FAST)
        again = solve_direct(instance, DirectSolverConfig(n_knots=20, max_iters=30),
                             u_init=warm.controls.values)
        assert again.objective <= warm.objective + 1e-9

    def test_u_init_shape_checked(self):
        instance = make_instance("pendulum")
        with pytest.raises(ShapeError):
            solve_direct(instance, FAST, u_init=np.zeros((5, 1)))

    def test_solution_fields_populated(self):
        sol = solve_direct(make_instance("pendulum"), FAST)
        assert sol.controls.values.shape == (20, 1)
        assert sol.n_iters <= FAST.max_iters
        assert sol.solve_time > 0
        assert np.isfinite(sol.grad_norm)

    def test_convergence_flag_on_tight_budget(self):
        """A generous iteration budget reaches the gradient tolerance, and the
        flag reflects it; early stopping spends fewer than max_iters."""
        cfg = DirectSolverConfig(n_knots=10, max_iters=3000, grad_tol=1e-6)
        sol = solve_direct(make_instance("pendulum"), cfg)
        assert sol.converged
        assert sol.grad_norm <= cfg.grad_tol
        assert sol.n_iters < cfg.max_iters

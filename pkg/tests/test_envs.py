"""Environment dynamics, jacobians, rollouts, costs, and instance types."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncolab.envs import (ENV_DIMS, SYNTHETIC_ENV_IDS, ControlGrid, OcpInstance,
                         Trajectory, default_parameters, eval_dynamics,
                         eval_jacobians, eval_total_cost, knot_indices,
                         make_env, make_instance, omega_matrix,
                         quaternion_matrices, rollout_euler, rotation_matrix,
                         stage_cost)
from ncolab.envs.dynamics import quaternion_derivative
from ncolab.errors import DomainError, ShapeError, SingularityError


def default_instance(env_id: str, **overrides) -> OcpInstance:
    return make_instance(env_id, **overrides)


def random_state_control(env_id: str, rng) -> tuple[np.ndarray, np.ndarray]:
    d_u, d_x = ENV_DIMS[env_id]
    return rng.normal(scale=0.4, size=d_x), rng.normal(scale=0.4, size=d_u)


class TestDynamicsOracles:
    def test_pendulum_torque_balance(self):
        """At theta = pi/2 with no input: d(theta)/dt = rate and the
        angular acceleration is the full gravity torque over the inertia."""
        c = default_parameters("pendulum")["constants"]
        xdot = eval_dynamics(make_env("pendulum"), np.array([math.pi / 2, 1.0]),
                             np.array([0.0]))
        expected_acc = -c["m"] * c["g"] * c["l"] * math.sin(math.pi / 2) / c["I"]
        np.testing.assert_allclose(xdot, [1.0, expected_acc], rtol=1e-12)
        assert xdot[1] == pytest.approx(-30.0)

    def test_pendulum_rest_is_fixed_point(self):
        xdot = eval_dynamics(make_env("pendulum"), np.zeros(2), np.zeros(1))
        np.testing.assert_array_equal(xdot, np.zeros(2))

    def test_zermelo_drift_field(self):
        env = make_env("zermelo", {"V": 2.0, "A": 1.0, "B": 0.5, "C": -0.5, "D": 2.0})
        z = np.array([1.0, 2.0])
        beta = np.array([0.0])
        xdot = eval_dynamics(env, z, beta)
        np.testing.assert_allclose(
            xdot, [2.0 + 1.0 * 1.0 + 0.5 * 2.0, 0.0 - 0.5 * 1.0 + 2.0 * 2.0])

    def test_robot_arm_singular_inertia(self):
        env = make_env("robot_arm", {"m2": 1e-30, "I2": 1e-30})
        x, u = np.zeros(4), np.zeros(1)
        with pytest.raises(SingularityError):
            eval_dynamics(env, x, u)

    def test_batch_rows_match_singles(self):
        rng = np.random.default_rng(0)
        for env_id in ("pendulum", "robot_arm", "cartpole", "zermelo"):
            env = make_env(env_id)
            d_u, d_x = ENV_DIMS[env_id]
            x = rng.normal(scale=0.3, size=(4, d_x))
            u = rng.normal(scale=0.3, size=(4, d_u))
            batch = eval_dynamics(env, x, u)
            singles = np.stack([eval_dynamics(env, x[i], u[i]) for i in range(4)])
            np.testing.assert_array_equal(batch, singles)

    def test_quaternion_envs_return_rates(self):
        rng = np.random.default_rng(1)
        for env_id in ("quadrotor", "rocket"):
            env = make_env(env_id)
            d_u, d_x = ENV_DIMS[env_id]
            q = np.array([1.0, 0.0, 0.0, 0.0])
            xdot, qdot = eval_dynamics(env, rng.normal(size=d_x),
                                       rng.normal(size=d_u), q)
            assert xdot.shape == (d_x,) and qdot.shape == (4,)
            with pytest.raises(ShapeError):
                eval_dynamics(env, np.zeros(d_x), np.zeros(d_u))


class TestQuaternions:
    def test_matrices_trivial_cases(self):
        om, r = quaternion_matrices(np.array([1.0, 0, 0, 0]), np.zeros(3))
        np.testing.assert_array_equal(om, np.zeros((4, 4)))
        np.testing.assert_array_equal(r, np.eye(3))

    def test_rotation_about_z(self):
        q = np.array([math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4)])
        _, r = quaternion_matrices(q, np.zeros(3))
        np.testing.assert_allclose(r @ np.array([1.0, 0, 0]), [0.0, 1.0, 0.0],
                                   atol=1e-12)

    def test_non_unit_quaternion_rejected(self):
        with pytest.raises(DomainError):
            quaternion_matrices(np.array([1.0, 1.0, 0, 0]), np.zeros(3))

    def test_omega_skew_structure(self):
        w = np.array([0.3, -0.7, 1.1])
        om = omega_matrix(w)
        np.testing.assert_array_equal(om, -om.T)

    def test_derivative_matches_omega_product(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        w = rng.normal(size=3)
        np.testing.assert_allclose(quaternion_derivative(q, w),
                                   0.5 * omega_matrix(w) @ q, atol=1e-15)

    def test_rotation_is_orthonormal(self):
        rng = np.random.default_rng(3)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        r = rotation_matrix(q)
        np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-14)
        assert np.linalg.det(r) == pytest.approx(1.0)


class TestJacobians:
    def fd_jacobian(self, f, x, h=1e-6):
        cols = []
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            cols.append((f(x + e) - f(x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    @pytest.mark.parametrize("env_id", list(SYNTHETIC_ENV_IDS) + ["zermelo"])
    def test_matches_finite_differences(self, env_id):
        rng = np.random.default_rng(4)
        env = make_env(env_id)
        d_u, d_x = ENV_DIMS[env_id]
        x = rng.normal(scale=0.3, size=d_x)
        u = rng.normal(scale=0.3, size=d_u)
        if env.has_quaternion:
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            jac = eval_jacobians(env, x, u, q)
            fx = self.fd_jacobian(lambda v: eval_dynamics(env, v, u, q)[0], x)
            fu = self.fd_jacobian(lambda v: eval_dynamics(env, x, v, q)[0], u)
            fq = self.fd_jacobian(lambda v: eval_dynamics(env, x, u, v)[0], q)
            gq = self.fd_jacobian(lambda v: eval_dynamics(env, x, u, v)[1], q)
            gw = self.fd_jacobian(
                lambda v: eval_dynamics(env, np.concatenate([x[:6], v]), u, q)[1],
                x[6:9])
            np.testing.assert_allclose(jac.f_q[0], fq, rtol=1e-6, atol=1e-7)
            np.testing.assert_allclose(jac.g_q[0], gq, rtol=1e-6, atol=1e-7)
            np.testing.assert_allclose(jac.g_w[0], gw, rtol=1e-6, atol=1e-7)
        else:
            jac = eval_jacobians(env, x, u)
            fx = self.fd_jacobian(lambda v: eval_dynamics(env, v, u), x)
            fu = self.fd_jacobian(lambda v: eval_dynamics(env, x, v), u)
        np.testing.assert_allclose(jac.f_x[0], fx, rtol=1e-6, atol=1e-7)
        np.testing.assert_allclose(jac.f_u[0], fu, rtol=1e-6, atol=1e-7)


class TestKnotIndices:
    def test_full_grid_final_knot_unused(self):
        """With one knot per grid point the last knot feeds no Euler step."""
        idx = knot_indices(100, 100)
        assert idx.shape == (99,)
        assert idx.max() == 98
        np.testing.assert_array_equal(idx, np.arange(99))

    def test_coarse_knots(self):
        idx = knot_indices(100, 20)
        assert idx.min() == 0 and idx.max() == 19
        counts = np.bincount(idx)
        assert counts.sum() == 99
        assert set(counts.tolist()) <= {4, 5, 6}

    @given(st.integers(2, 400), st.integers(1, 400))
    def test_properties(self, n_grid, n_knots):
        idx = knot_indices(n_grid, n_knots)
        assert idx.shape == (n_grid - 1,)
        assert idx[0] == 0
        assert np.all(np.diff(idx) >= 0)
        assert idx.max() <= n_knots - 1


class TestRolloutAndCost:
    def test_zero_control_swingup_cost(self):
        """At rest with zero torque the state never moves, so the cost is
        tf * (10 * pi^2) exactly."""
        instance = default_instance("pendulum")
        j = eval_total_cost(instance, ControlGrid(np.zeros((100, 1))))
        assert j == pytest.approx(10.0 * math.pi ** 2, rel=1e-12)

    def test_two_point_grid_cost_by_hand(self):
        instance = default_instance("pendulum", n_grid=2, tf=0.5)
        u = ControlGrid(np.array([[2.0], [0.0]]))
        expected = 0.5 * (10.0 * math.pi ** 2 + 0.1 * 4.0)
        assert eval_total_cost(instance, u) == pytest.approx(expected, rel=1e-12)

    def test_trajectory_shapes_and_start(self):
        for env_id in SYNTHETIC_ENV_IDS:
            instance = default_instance(env_id)
            d_u, d_x = ENV_DIMS[env_id]
            traj = rollout_euler(instance, ControlGrid(np.zeros((100, d_u))))
            assert traj.states.shape == (100, d_x)
            np.testing.assert_array_equal(traj.states[0], instance.x_init)
            if instance.env.has_quaternion:
                assert traj.quaternions.shape == (100, 4)

    def test_quaternion_norm_preserved(self):
        instance = default_instance("quadrotor")
        rng = np.random.default_rng(5)
        traj = rollout_euler(instance, ControlGrid(rng.uniform(0, 4, size=(100, 4))))
        norms = np.linalg.norm(traj.quaternions, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_stage_cost_formula(self):
        instance = default_instance("pendulum")
        x = np.array([[1.0, 2.0]])
        u = np.array([[3.0]])
        expected = 10.0 * (1.0 - math.pi) ** 2 + 1.0 * 4.0 + 0.1 * 9.0
        assert stage_cost(instance.cost, x, u)[0] == pytest.approx(expected, rel=1e-14)

    def test_coarse_knots_held_constant(self):
        """Each knot value is applied over its whole sub-interval."""
        instance = default_instance("pendulum", n_grid=5, tf=1.0)
        knots = np.array([[1.0], [-1.0]])
        traj = rollout_euler(instance, ControlGrid(knots))
        dt = instance.dt
        # steps 0,1 consume knot 0; steps 2,3 consume knot 1
        theta_dot = traj.states[:, 1]
        acc0 = (theta_dot[1] - theta_dot[0]) / dt
        acc3 = (theta_dot[3] - theta_dot[2]) / dt
        assert acc0 == pytest.approx(1.0 / (1.0 / 3.0), rel=1e-9)
        assert math.copysign(1.0, acc3) == -1.0


class TestTypesValidation:
    def test_control_grid_promotes_vector(self):
        grid = ControlGrid(np.arange(4.0))
        assert grid.values.shape == (4, 1)
        assert grid.n_knots == 4 and grid.d_u == 1

    def test_control_grid_rejects_nonfinite(self):
        with pytest.raises(ShapeError):
            ControlGrid(np.array([1.0, np.nan]))

    def test_at_time_piecewise_constant(self):
        grid = ControlGrid(np.array([[0.0], [1.0], [2.0], [3.0]]))
        assert grid.at_time(0.0, 1.0)[0] == 0.0
        assert grid.at_time(0.26, 1.0)[0] == 1.0
        assert grid.at_time(1.0, 1.0)[0] == 3.0  # capped at the last knot

    def test_instance_validation(self):
        with pytest.raises(ShapeError):
            default_instance("pendulum", x_goal=[1.0, 2.0, 3.0])
        with pytest.raises(ShapeError):
            default_instance("pendulum", tf=-1.0)
        with pytest.raises(ShapeError):
            default_instance("pendulum", n_grid=1)

    def test_quaternion_instance_rules(self):
        inst = default_instance("quadrotor", q_init=[2.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(inst.q_init, [1.0, 0.0, 0.0, 0.0])
        with pytest.raises(ShapeError):
            default_instance("pendulum", q_init=[1.0, 0, 0, 0])

    def test_env_constant_validation(self):
        with pytest.raises(ShapeError):
            make_env("pendulum", {"m": -1.0})
        with pytest.raises(ShapeError):
            make_env("pendulum", {"g": math.inf})

    def test_trajectory_grid_validation(self):
        with pytest.raises(ShapeError):
            Trajectory(times=np.array([0.0, 0.5, 0.7]), states=np.zeros((3, 2)))
        with pytest.raises(ShapeError):
            Trajectory(times=np.linspace(0, 1, 4), states=np.zeros((3, 2)))

    def test_times_and_dt(self):
        inst = default_instance("pendulum", tf=2.0, n_grid=5)
        np.testing.assert_allclose(inst.times, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert inst.dt == 0.5

"""Explicit Euler rollouts and running-cost evaluation, batched over rows.

The state recursion is x[k+1] = x[k] + dt * d(x[k], u[k]) on a uniform
grid of n_grid points, dt = tf / (n_grid - 1). Controls are given as
knot arrays; Euler step k consumes knot floor(k * n_knots / (n_grid-1)).
Quaternion environments integrate the attitude alongside the state and
renormalize after every step.

The running cost uses the left-endpoint rectangle rule:
J = sum_{k=0}^{n_grid-2} dt * p(x[k], u[k]).
"""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteError, ShapeError
from .dynamics import eval_dynamics
from .types import ControlGrid, CostSpec, EnvSpec, OcpInstance, Trajectory, knot_indices

Array = np.ndarray


def _batch_dt(tf, n_grid: int, rows: int) -> Array:
    tf = np.asarray(tf, dtype=np.float64)
    if tf.ndim == 0:
        tf = np.full(rows, float(tf))
    if tf.shape != (rows,) or np.any(tf <= 0):
        raise ShapeError("tf must be positive, scalar or one per row")
    return tf / (n_grid - 1)


def rollout_controls(env: EnvSpec, x0: Array, knots: Array, tf, n_grid: int,
                     q0: Array | None = None,
                     check_finite: bool = True) -> tuple[Array, Array | None, Array | None]:
    """Batched Euler rollout.

    x0 is [B, d_x], knots is [B, n_knots, d_u], tf is scalar or [B].
    Returns (states [B, n_grid, d_x], quats [B, n_grid, 4] or None,
    qhat_norms [B, n_grid-1] or None). The norms are those of the
    pre-normalization quaternions, needed by the adjoint pass.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    knots = np.asarray(knots, dtype=np.float64)
    if x0.ndim != 2 or x0.shape[1] != env.d_x:
        raise ShapeError(f"x0 must be [B, {env.d_x}]")
    if knots.ndim != 3 or knots.shape[0] != x0.shape[0] or knots.shape[2] != env.d_u:
        raise ShapeError(f"knots must be [B, n_knots, {env.d_u}]")
    rows = x0.shape[0]
    dt = _batch_dt(tf, n_grid, rows)[:, None]
    idx = knot_indices(n_grid, knots.shape[1])

    states = np.empty((rows, n_grid, env.d_x))
    states[:, 0] = x0
    quats = None
    norms = None
    if env.has_quaternion:
        if q0 is None:
            raise ShapeError(f"{env.env_id} rollout needs q0")
        q0 = np.asarray(q0, dtype=np.float64)
        if q0.shape != (rows, 4):
            raise ShapeError("q0 must be [B, 4]")
        quats = np.empty((rows, n_grid, 4))
        quats[:, 0] = q0
        norms = np.empty((rows, n_grid - 1))
    elif q0 is not None:
        raise ShapeError(f"{env.env_id} rollout takes no quaternion")

    x = x0
    q = q0
    for k in range(n_grid - 1):
        u = knots[:, idx[k], :]
        if env.has_quaternion:
            xdot, qdot = eval_dynamics(env, x, u, q)
            qhat = q + dt * qdot
            nrm = np.sqrt(np.sum(qhat * qhat, axis=1))
            if check_finite and not (np.all(np.isfinite(qhat)) and np.all(nrm > 0)):
                raise NonFiniteError("rollout", f"quaternion degenerate at step {k}")
            q = qhat / nrm[:, None]
            quats[:, k + 1] = q
            norms[:, k] = nrm
        else:
            xdot = eval_dynamics(env, x, u)
        x = x + dt * xdot
        if check_finite and not np.all(np.isfinite(x)):
            raise NonFiniteError("rollout", f"state diverged at step {k}")
        states[:, k + 1] = x
    return states, quats, norms


def stage_cost(cost: CostSpec, x: Array, u: Array) -> Array:
    """p(x, u) = sum_i c_x[i] (x[i]-goal[i])^2 + c_u sum_j u[j]^2, per row."""
    dx = x - cost.x_goal[None, :]
    return np.sum(cost.c_x[None, :] * dx * dx, axis=1) + cost.c_u * np.sum(u * u, axis=1)


def stage_cost_gradients(cost: CostSpec, x: Array, u: Array) -> tuple[Array, Array]:
    """(dp/dx, dp/du) per row."""
    return 2.0 * cost.c_x[None, :] * (x - cost.x_goal[None, :]), 2.0 * cost.c_u * u


def total_cost(cost: CostSpec, states: Array, knots: Array, tf, n_grid: int) -> Array:
    """Left-endpoint rectangle cost per row; states [B, n_grid, d_x]."""
    rows = states.shape[0]
    dt = _batch_dt(tf, n_grid, rows)
    idx = knot_indices(n_grid, knots.shape[1])
    j = np.zeros(rows)
    for k in range(n_grid - 1):
        j = j + dt * stage_cost(cost, states[:, k], knots[:, idx[k], :])
    return j


def rollout_euler(instance: OcpInstance, controls: ControlGrid | Array) -> Trajectory:
    """Single-instance rollout returning a Trajectory."""
    knots = controls.values if isinstance(controls, ControlGrid) else np.asarray(controls, dtype=np.float64)
    if knots.ndim == 1:
        knots = knots[:, None]
    q0 = instance.q_init[None, :] if instance.env.has_quaternion else None
    states, quats, _ = rollout_controls(
        instance.env, instance.x_init[None, :], knots[None, :, :],
        instance.tf, instance.n_grid, q0=q0)
    return Trajectory(times=instance.times, states=states[0],
                      quaternions=None if quats is None else quats[0])


def eval_total_cost(instance: OcpInstance, controls: ControlGrid | Array,
                    trajectory: Trajectory | None = None) -> float:
    """Objective of one instance under the given control knots."""
    knots = controls.values if isinstance(controls, ControlGrid) else np.asarray(controls, dtype=np.float64)
    if knots.ndim == 1:
        knots = knots[:, None]
    if trajectory is None:
        trajectory = rollout_euler(instance, knots)
    return float(total_cost(instance.cost, trajectory.states[None, :, :],
                            knots[None, :, :], instance.tf, instance.n_grid)[0])

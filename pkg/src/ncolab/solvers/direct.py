"""Adjoint-based direct solver for the time-domain optimal control problems.

The control is piecewise constant on a knot grid. The objective and its
exact gradient come from the discrete adjoint of the Euler recursion:

    lam[N] = 0
    lam[k] = dt * p_x(x_k, u_k) + lam[k+1] (I + dt * f_x(x_k, u_k))
    dJ/du_k = dt * p_u(x_k, u_k) + lam[k+1] dt * f_u(x_k, u_k)

Quaternion environments carry a second multiplier through the normalized
quaternion chain: the Jacobian of q = qhat/|qhat| is (I - q q^T)/|qhat|,
so lam_qhat = (lam_q - (lam_q . q) q)/|qhat|, then

    lam_q[k]  = lam_x[k+1] dt f_q + lam_qhat (I + dt g_q)
    lam_x[k] += lam_qhat dt g_w   (angular-rate columns only)

Knots are optimized with Adam; every row of a batch follows exactly the
same arithmetic it would follow alone, so results are independent of how
instances are grouped into batches.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from ..envs import (ControlGrid, OcpInstance, eval_jacobians, knot_indices,
                    rollout_controls)
from ..errors import ConfigError, ShapeError

Array = np.ndarray


@dataclass
class DirectSolverConfig:
    """Knot count and Adam schedule for the direct solver."""

    n_knots: int = 100
    max_iters: int = 3000
    lr0: float = 0.05
    decay: float = 0.95
    decay_period: int = 200
    grad_tol: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.n_knots < 1 or self.max_iters < 1:
            raise ConfigError("n_knots and max_iters must be positive")
        if not (0 < self.lr0 and 0 < self.decay <= 1 and self.decay_period >= 1):
            raise ConfigError("invalid learning-rate schedule")


@dataclass
class Solution:
    """Best iterate found for one instance."""

    controls: ControlGrid
    objective: float
    converged: bool
    diverged: bool
    n_iters: int
    grad_norm: float
    solve_time: float


def _gather_instance_batch(instances: list[OcpInstance]):
    first = instances[0]
    env = first.env
    for inst in instances:
        if inst.env.env_id != env.env_id or inst.env.constants != env.constants:
            raise ShapeError("batched solve requires identical environments")
        if inst.n_grid != first.n_grid:
            raise ShapeError("batched solve requires a common grid size")
        if (inst.cost.c_x != first.cost.c_x).any() or inst.cost.c_u != first.cost.c_u:
            raise ShapeError("batched solve requires common cost weights")
    x0 = np.stack([inst.x_init for inst in instances])
    goals = np.stack([inst.cost.x_goal for inst in instances])
    tf = np.array([inst.tf for inst in instances])
    q0 = np.stack([inst.q_init for inst in instances]) if env.has_quaternion else None
    return env, x0, goals, tf, q0, first.cost.c_x, first.cost.c_u, first.n_grid


def adjoint_gradient_core(env, x0: Array, knots: Array, tf, n_grid: int,
                          goals: Array, c_x: Array, c_u: float,
                          q0: Array | None = None) -> tuple[Array, Array]:
    """Objective and exact gradient, batched; returns (J [B], grad [B,K,du])."""
    rows, n_knots = knots.shape[0], knots.shape[1]
    tf = np.asarray(tf, dtype=np.float64)
    if tf.ndim == 0:
        tf = np.full(rows, float(tf))
    dt = tf / (n_grid - 1)
    idx = knot_indices(n_grid, n_knots)

    with np.errstate(all="ignore"):
        states, quats, norms = rollout_controls(env, x0, knots, tf, n_grid,
                                                q0=q0, check_finite=False)
        obj = np.zeros(rows)
        for k in range(n_grid - 1):
            xk = states[:, k]
            uk = knots[:, idx[k]]
            diff = xk - goals
            obj = obj + dt * (np.sum(c_x[None, :] * diff * diff, axis=1)
                              + c_u * np.sum(uk * uk, axis=1))

        lam = np.zeros((rows, env.d_x))
        lamq = np.zeros((rows, 4)) if env.has_quaternion else None
        grad = np.zeros((rows, n_knots, env.d_u))
        dtc = dt[:, None]
        for k in range(n_grid - 2, -1, -1):
            xk = states[:, k]
            uk = knots[:, idx[k]]
            qk = quats[:, k] if env.has_quaternion else None
            jac = eval_jacobians(env, xk, uk, qk)
            p_x = 2.0 * c_x[None, :] * (xk - goals)
            p_u = 2.0 * c_u * uk
            grad[:, idx[k]] += dtc * (p_u + np.einsum("bi,bij->bj", lam, jac.f_u))
            new_lam = dtc * p_x + lam + dtc * np.einsum("bi,bij->bj", lam, jac.f_x)
            if env.has_quaternion:
                qn = quats[:, k + 1]
                lamqhat = (lamq - np.sum(lamq * qn, axis=1, keepdims=True) * qn) \
                    / norms[:, k][:, None]
                new_lamq = dtc * np.einsum("bi,bij->bj", lam, jac.f_q) \
                    + lamqhat + dtc * np.einsum("bi,bij->bj", lamqhat, jac.g_q)
                new_lam[:, 6:9] += dtc * np.einsum("bi,bij->bj", lamqhat, jac.g_w)
                lamq = new_lamq
            lam = new_lam
    return obj, grad


def adjoint_gradient(instance: OcpInstance, knots: Array) -> tuple[float, Array]:
    """Single-instance objective and gradient w.r.t. the control knots."""
    knots = np.asarray(knots, dtype=np.float64)
    if knots.ndim == 1:
        knots = knots[:, None]
    q0 = instance.q_init[None, :] if instance.env.has_quaternion else None
    obj, grad = adjoint_gradient_core(
        instance.env, instance.x_init[None, :], knots[None, :, :], instance.tf,
        instance.n_grid, instance.cost.x_goal[None, :], instance.cost.c_x,
        instance.cost.c_u, q0=q0)
    return float(obj[0]), grad[0]


def finite_diff_objective_grad(instance: OcpInstance, knots: Array,
                               h: float = 1e-6) -> Array:
    """Central-difference gradient of the rollout objective.

    Builds all 2*K*d_u perturbed knot grids and evaluates them in one
    batched rollout; the companion route to the adjoint gradient.
    """
    from ..envs import total_cost

    knots = np.asarray(knots, dtype=np.float64)
    if knots.ndim == 1:
        knots = knots[:, None]
    n_knots, d_u = knots.shape
    n_pert = n_knots * d_u
    batch = np.repeat(knots[None, :, :], 2 * n_pert, axis=0)
    for j in range(n_pert):
        k, d = divmod(j, d_u)
        batch[2 * j, k, d] += h
        batch[2 * j + 1, k, d] -= h
    rows = batch.shape[0]
    x0 = np.repeat(instance.x_init[None, :], rows, axis=0)
    q0 = np.repeat(instance.q_init[None, :], rows, axis=0) if instance.env.has_quaternion else None
    states, _, _ = rollout_controls(instance.env, x0, batch, instance.tf,
                                    instance.n_grid, q0=q0)
    obj = total_cost(instance.cost, states, batch, instance.tf, instance.n_grid)
    grad = (obj[0::2] - obj[1::2]) / (2.0 * h)
    return grad.reshape(n_knots, d_u)


def solve_direct_batch(instances: list[OcpInstance],
                       config: DirectSolverConfig | None = None,
                       u_init: Array | None = None) -> list[Solution]:
    """Solve a batch of instances sharing one environment.

    Per-row Adam with the exact adjoint gradient; rows deactivate when
    their gradient infinity-norm drops below ``grad_tol`` or they go
    non-finite, and the best finite iterate seen is returned.
    """
    if not instances:
        return []
    cfg = config or DirectSolverConfig()
    env, x0, goals, tf, q0, c_x, c_u, n_grid = _gather_instance_batch(instances)
    rows = len(instances)
    if u_init is None:
        u = np.zeros((rows, cfg.n_knots, env.d_u))
    else:
        u = np.array(u_init, dtype=np.float64)
        if u.shape != (rows, cfg.n_knots, env.d_u):
            raise ShapeError("u_init must be [B, n_knots, d_u]")

    m = np.zeros_like(u)
    v = np.zeros_like(u)
    best_u = u.copy()
    best_obj = np.full(rows, np.inf)
    best_gnorm = np.full(rows, np.inf)
    converged = np.zeros(rows, dtype=bool)
    diverged = np.zeros(rows, dtype=bool)
    end_iter = np.full(rows, cfg.max_iters)
    active = np.arange(rows)
    start = time.perf_counter()

    for it in range(cfg.max_iters + 1):
        obj, grad = adjoint_gradient_core(
            env, x0[active], u[active], tf[active], n_grid,
            goals[active], c_x, c_u, q0=None if q0 is None else q0[active])
        gnorm = np.max(np.abs(grad.reshape(len(active), -1)), axis=1)
        finite = np.isfinite(obj) & np.isfinite(gnorm)
        better = finite & (obj < best_obj[active])
        rows_better = active[better]
        best_obj[rows_better] = obj[better]
        best_u[rows_better] = u[rows_better]
        best_gnorm[rows_better] = gnorm[better]

        done = (finite & (gnorm < cfg.grad_tol)) | ~finite
        converged[active[finite & (gnorm < cfg.grad_tol)]] = True
        diverged[active[~finite]] = True
        end_iter[active[done]] = it
        if it == cfg.max_iters:
            break
        keep = ~done
        active = active[keep]
        if active.size == 0:
            break

        t = it + 1
        lr = cfg.lr0 * cfg.decay ** (it // cfg.decay_period)
        g = grad[keep]
        m[active] = cfg.beta1 * m[active] + (1.0 - cfg.beta1) * g
        v[active] = cfg.beta2 * v[active] + (1.0 - cfg.beta2) * g * g
        mhat = m[active] / (1.0 - cfg.beta1 ** t)
        vhat = v[active] / (1.0 - cfg.beta2 ** t)
        u[active] = u[active] - lr * mhat / (np.sqrt(vhat) + cfg.eps)

    elapsed = time.perf_counter() - start
    per_instance = elapsed / rows
    out = []
    for i in range(rows):
        fallback = not np.isfinite(best_obj[i])
        out.append(Solution(
            controls=ControlGrid(values=np.zeros((cfg.n_knots, env.d_u)) if fallback else best_u[i]),
            objective=float(best_obj[i]) if not fallback else float("inf"),
            converged=bool(converged[i]) and not fallback,
            diverged=bool(diverged[i]) or fallback,
            n_iters=int(end_iter[i]),
            grad_norm=float(best_gnorm[i]),
            solve_time=per_instance,
        ))
    return out


def solve_direct(instance: OcpInstance, config: DirectSolverConfig | None = None,
                 u_init: Array | None = None) -> Solution:
    """Solve one instance; thin wrapper over the batched path."""
    init = None if u_init is None else np.asarray(u_init, dtype=np.float64)[None, :, :]
    start = time.perf_counter()
    sol = solve_direct_batch([instance], config, u_init=init)[0]
    return replace(sol, solve_time=time.perf_counter() - start)

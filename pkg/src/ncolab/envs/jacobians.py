"""Analytic dynamics Jacobians, batched over rows.

These drive the discrete adjoint in the direct solver. Shapes follow
numerator layout: f_x is [B, d_x, d_x], f_u is [B, d_x, d_u]. Quaternion
environments additionally expose f_q = d(x_dot)/dq, g_q = d(q_dot)/dq,
and g_w = d(q_dot)/dw for the augmented adjoint recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, SingularityError
from .dynamics import (SINGULARITY_TOL, _as_batch, quadrotor_inertia,
                       quadrotor_torque, robot_arm_forcing,
                       robot_arm_mass_terms, rocket_torque)
from .types import EnvSpec

Array = np.ndarray


@dataclass
class DynamicsJacobians:
    f_x: Array
    f_u: Array
    f_q: Array | None = None
    g_q: Array | None = None
    g_w: Array | None = None


def pendulum_jacobians(x: Array, u: Array, c: dict[str, float]) -> DynamicsJacobians:
    x, _ = _as_batch(x, 2, "x")
    n = x.shape[0]
    m, g, l, inertia, b = c["m"], c["g"], c["l"], c["I"], c["b"]
    f_x = np.zeros((n, 2, 2))
    f_x[:, 0, 1] = 1.0
    f_x[:, 1, 0] = -m * g * l * np.cos(x[:, 0]) / inertia
    f_x[:, 1, 1] = -b / inertia
    f_u = np.zeros((n, 2, 1))
    f_u[:, 1, 0] = 1.0 / inertia
    return DynamicsJacobians(f_x, f_u)


def robot_arm_jacobians(x: Array, u: Array, c: dict[str, float]) -> DynamicsJacobians:
    x, _ = _as_batch(x, 4, "x")
    u, _ = _as_batch(u, 1, "u")
    n = x.shape[0]
    m1, m2, grav = c["m1"], c["m2"], c["G"]
    l1, r1, r2 = c["l1"], c["r1"], c["r2"]
    alpha = m2 * l1 * r2
    s2, c2 = np.sin(x[:, 1]), np.cos(x[:, 1])
    v1, v2 = x[:, 2], x[:, 3]
    m11, m12, m22, det = robot_arm_mass_terms(x, c)
    if np.any(np.abs(det) < SINGULARITY_TOL):
        raise SingularityError("mass matrix is singular")
    h = robot_arm_forcing(x, u, c)
    acc1 = (m22 * h[:, 0] - m12 * h[:, 1]) / det
    acc2 = (-m12 * h[:, 0] + m11 * h[:, 1]) / det

    s12 = np.sin(x[:, 0] + x[:, 1])
    dh = np.zeros((n, 2, 4))
    dh[:, 0, 0] = m1 * r1 * grav * np.sin(x[:, 0]) + m2 * grav * (
        r2 * s12 + l1 * np.sin(x[:, 0]))
    dh[:, 0, 1] = alpha * c2 * (2.0 * v1 * v2 + v2 * v2) + m2 * grav * r2 * s12
    dh[:, 0, 2] = alpha * s2 * 2.0 * v2
    dh[:, 0, 3] = alpha * s2 * (2.0 * v1 + 2.0 * v2)
    dh[:, 1, 0] = m2 * grav * r2 * s12
    dh[:, 1, 1] = -alpha * c2 * v1 * v1 + m2 * grav * r2 * s12
    dh[:, 1, 2] = -2.0 * alpha * s2 * v1

    # d(accel)/dx2 picks up the mass-matrix variation: M^-1 (dh - dM accel)
    dm_acc1 = -2.0 * alpha * s2 * acc1 - alpha * s2 * acc2
    dm_acc2 = -alpha * s2 * acc1
    rhs1 = dh[:, 0].copy()
    rhs2 = dh[:, 1].copy()
    rhs1[:, 1] -= dm_acc1
    rhs2[:, 1] -= dm_acc2

    f_x = np.zeros((n, 4, 4))
    f_x[:, 0, 2] = 1.0
    f_x[:, 1, 3] = 1.0
    f_x[:, 2] = (m22[:, None] * rhs1 - m12[:, None] * rhs2) / det[:, None]
    f_x[:, 3] = (-m12[:, None] * rhs1 + m11[:, None] * rhs2) / det[:, None]

    f_u = np.zeros((n, 4, 1))
    f_u[:, 2, 0] = -m12 / det
    f_u[:, 3, 0] = m11 / det
    return DynamicsJacobians(f_x, f_u)


def cartpole_jacobians(x: Array, u: Array, c: dict[str, float]) -> DynamicsJacobians:
    x, _ = _as_batch(x, 4, "x")
    u, _ = _as_batch(u, 1, "u")
    n = x.shape[0]
    mc, mp, g, l = c["m_c"], c["m_p"], c["g"], c["l"]
    s, co = np.sin(x[:, 1]), np.cos(x[:, 1])
    v4 = x[:, 3]
    tau = u[:, 0]
    den = mc + mp * s * s
    dden = mp * np.sin(2.0 * x[:, 1])
    n3 = tau + mp * s * (l * v4 * v4 + g * co)
    dn3 = mp * co * (l * v4 * v4 + g * co) - mp * g * s * s
    n4 = -tau * co - mp * l * v4 * v4 * co * s - (mc + mp) * g * s
    dn4 = tau * s - mp * l * v4 * v4 * np.cos(2.0 * x[:, 1]) - (mc + mp) * g * co

    f_x = np.zeros((n, 4, 4))
    f_x[:, 0, 2] = 1.0
    f_x[:, 1, 3] = 1.0
    f_x[:, 2, 1] = (dn3 * den - n3 * dden) / (den * den)
    f_x[:, 2, 3] = 2.0 * mp * s * l * v4 / den
    f_x[:, 3, 1] = (dn4 * den - n4 * dden) / (l * den * den)
    f_x[:, 3, 3] = -2.0 * mp * l * v4 * co * s / (l * den)

    f_u = np.zeros((n, 4, 1))
    f_u[:, 2, 0] = 1.0 / den
    f_u[:, 3, 0] = -co / (l * den)
    return DynamicsJacobians(f_x, f_u)


def _gyro_jacobian(w: Array, inertia: Array) -> Array:
    """d(w x J w)/dw for diagonal J; [B,3] -> [B,3,3]."""
    j1, j2, j3 = inertia
    n = w.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = (j3 - j2) * w[:, 2]
    out[:, 0, 2] = (j3 - j2) * w[:, 1]
    out[:, 1, 0] = (j1 - j3) * w[:, 2]
    out[:, 1, 2] = (j1 - j3) * w[:, 0]
    out[:, 2, 0] = (j2 - j1) * w[:, 1]
    out[:, 2, 1] = (j2 - j1) * w[:, 0]
    return out


def _quaternion_rate_jacobians(q: Array, w: Array) -> tuple[Array, Array]:
    """(g_q, g_w) for q_dot = 0.5 Omega(w) q."""
    n = q.shape[0]
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    w1, w2, w3 = w[:, 0], w[:, 1], w[:, 2]
    g_q = np.zeros((n, 4, 4))
    g_q[:, 0, 1], g_q[:, 0, 2], g_q[:, 0, 3] = -0.5 * w1, -0.5 * w2, -0.5 * w3
    g_q[:, 1, 0], g_q[:, 1, 2], g_q[:, 1, 3] = 0.5 * w1, 0.5 * w3, -0.5 * w2
    g_q[:, 2, 0], g_q[:, 2, 1], g_q[:, 2, 3] = 0.5 * w2, -0.5 * w3, 0.5 * w1
    g_q[:, 3, 0], g_q[:, 3, 1], g_q[:, 3, 2] = 0.5 * w3, 0.5 * w2, -0.5 * w1
    g_w = 0.5 * np.stack([
        np.stack([-q2, -q3, -q4], axis=1),
        np.stack([q1, -q4, q3], axis=1),
        np.stack([q4, q1, -q2], axis=1),
        np.stack([-q3, q2, q1], axis=1),
    ], axis=1)
    return g_q, g_w


def _rotation_gradients(q: Array) -> Array:
    """d R_ij / d q for the scalar-first quaternion; [B,4] -> [B,3,3,4]."""
    n = q.shape[0]
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    z = np.zeros_like(q1)
    g = np.empty((n, 3, 3, 4))
    g[:, 0, 0] = np.stack([z, z, -4.0 * q3, -4.0 * q4], axis=1)
    g[:, 0, 1] = 2.0 * np.stack([-q4, q3, q2, -q1], axis=1)
    g[:, 0, 2] = 2.0 * np.stack([q3, q4, q1, q2], axis=1)
    g[:, 1, 0] = 2.0 * np.stack([q4, q3, q2, q1], axis=1)
    g[:, 1, 1] = np.stack([z, -4.0 * q2, z, -4.0 * q4], axis=1)
    g[:, 1, 2] = 2.0 * np.stack([-q2, -q1, q4, q3], axis=1)
    g[:, 2, 0] = 2.0 * np.stack([-q3, q4, -q1, q2], axis=1)
    g[:, 2, 1] = 2.0 * np.stack([q2, q1, q4, q3], axis=1)
    g[:, 2, 2] = np.stack([z, -4.0 * q2, -4.0 * q3, z], axis=1)
    return g


def quadrotor_jacobians(x: Array, u: Array, q: Array, c: dict[str, float]) -> DynamicsJacobians:
    x, _ = _as_batch(x, 9, "x")
    u, _ = _as_batch(u, 4, "u")
    q, _ = _as_batch(q, 4, "q")
    n = x.shape[0]
    m = c["m"]
    inertia = quadrotor_inertia(c)
    torque = quadrotor_torque(c)
    thrust = np.sum(u, axis=1)
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r3 = np.stack([
        2.0 * (q2 * q4 - q3 * q1),
        2.0 * (q3 * q4 + q2 * q1),
        1.0 - 2.0 * (q2 * q2 + q3 * q3),
    ], axis=1)

    f_x = np.zeros((n, 9, 9))
    f_x[:, 0, 3] = f_x[:, 1, 4] = f_x[:, 2, 5] = 1.0
    f_x[:, 6:9, 6:9] = -_gyro_jacobian(x[:, 6:9], inertia) / inertia[None, :, None]

    f_u = np.zeros((n, 9, 4))
    f_u[:, 3:6, :] = r3[:, :, None] / m
    f_u[:, 6:9, :] = (torque / inertia[:, None])[None, :, :]

    z = np.zeros_like(q1)
    f_q = np.zeros((n, 9, 4))
    dr3 = np.stack([
        2.0 * np.stack([-q3, q4, -q1, q2], axis=1),
        2.0 * np.stack([q2, q1, q4, q3], axis=1),
        np.stack([z, -4.0 * q2, -4.0 * q3, z], axis=1),
    ], axis=1)
    f_q[:, 3:6, :] = thrust[:, None, None] * dr3 / m

    g_q, g_w = _quaternion_rate_jacobians(q, x[:, 6:9])
    return DynamicsJacobians(f_x, f_u, f_q=f_q, g_q=g_q, g_w=g_w)


def rocket_jacobians(x: Array, u: Array, q: Array, c: dict[str, float]) -> DynamicsJacobians:
    x, _ = _as_batch(x, 9, "x")
    u, _ = _as_batch(u, 3, "u")
    q, _ = _as_batch(q, 4, "q")
    n = x.shape[0]
    m = c["m"]
    inertia = np.array([c["J1"], c["J2"], c["J3"]])

    f_x = np.zeros((n, 9, 9))
    f_x[:, 0, 3] = f_x[:, 1, 4] = f_x[:, 2, 5] = 1.0
    f_x[:, 6:9, 6:9] = -_gyro_jacobian(x[:, 6:9], inertia) / inertia[None, :, None]

    rgrad = _rotation_gradients(q)
    f_u = np.zeros((n, 9, 3))
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r = np.empty((n, 3, 3))
    r[:, 0, 0] = 1.0 - 2.0 * (q3 * q3 + q4 * q4)
    r[:, 0, 1] = 2.0 * (q2 * q3 - q4 * q1)
    r[:, 0, 2] = 2.0 * (q2 * q4 + q3 * q1)
    r[:, 1, 0] = 2.0 * (q2 * q3 + q4 * q1)
    r[:, 1, 1] = 1.0 - 2.0 * (q2 * q2 + q4 * q4)
    r[:, 1, 2] = 2.0 * (q3 * q4 - q2 * q1)
    r[:, 2, 0] = 2.0 * (q2 * q4 - q3 * q1)
    r[:, 2, 1] = 2.0 * (q3 * q4 + q2 * q1)
    r[:, 2, 2] = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
    f_u[:, 3:6, :] = np.swapaxes(r, 1, 2) / m
    f_u[:, 6:9, :] = (rocket_torque(c) / inertia[:, None])[None, :, :]

    # d(R^T u)_i / dq = sum_j u_j dR_ji/dq
    f_q = np.zeros((n, 9, 4))
    f_q[:, 3:6, :] = np.einsum("bj,bjik->bik", u, rgrad) / m

    g_q, g_w = _quaternion_rate_jacobians(q, x[:, 6:9])
    return DynamicsJacobians(f_x, f_u, f_q=f_q, g_q=g_q, g_w=g_w)


def zermelo_jacobians(z: Array, beta: Array, c: dict[str, float]) -> DynamicsJacobians:
    z, _ = _as_batch(z, 2, "z")
    beta, _ = _as_batch(beta, 1, "beta")
    n = z.shape[0]
    v = c["V"]
    f_x = np.zeros((n, 2, 2))
    f_x[:, 0, 0], f_x[:, 0, 1] = c["A"], c["B"]
    f_x[:, 1, 0], f_x[:, 1, 1] = c["C"], c["D"]
    f_u = np.zeros((n, 2, 1))
    f_u[:, 0, 0] = -v * np.sin(beta[:, 0])
    f_u[:, 1, 0] = v * np.cos(beta[:, 0])
    return DynamicsJacobians(f_x, f_u)


def eval_jacobians(env: EnvSpec, x: Array, u: Array, q: Array | None = None) -> DynamicsJacobians:
    """Dispatch to the environment's analytic Jacobians (batched)."""
    if env.has_quaternion:
        if q is None:
            raise ShapeError(f"{env.env_id} jacobians need a quaternion")
        fn = quadrotor_jacobians if env.env_id == "quadrotor" else rocket_jacobians
        return fn(x, u, q, env.constants)
    if env.env_id == "pendulum":
        return pendulum_jacobians(x, u, env.constants)
    if env.env_id == "robot_arm":
        return robot_arm_jacobians(x, u, env.constants)
    if env.env_id == "cartpole":
        return cartpole_jacobians(x, u, env.constants)
    if env.env_id == "zermelo":
        return zermelo_jacobians(x, u, env.constants)
    raise ShapeError(f"{env.env_id} has no time-domain jacobians")

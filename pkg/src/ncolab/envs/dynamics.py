"""Continuous-time dynamics for every environment, batched over rows.

Every function accepts states/controls shaped [B, d] and returns [B, d].
All arithmetic is elementwise per row so results are independent of how
rows are grouped into batches.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, ShapeError, SingularityError
from .types import EnvSpec

Array = np.ndarray

SINGULARITY_TOL = 1e-12


def _as_batch(a: Array, d: int, name: str) -> tuple[Array, bool]:
    a = np.asarray(a, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != d:
        raise ShapeError(f"{name} must have {d} columns, got shape {a.shape}")
    return a, single


def rotation_matrix(q: Array) -> Array:
    """Rotation matrix of a scalar-first unit quaternion; [B,4] -> [B,3,3]."""
    q, single = _as_batch(q, 4, "q")
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    r[:, 0, 0] = 1.0 - 2.0 * (q3 * q3 + q4 * q4)
    r[:, 0, 1] = 2.0 * (q2 * q3 - q4 * q1)
    r[:, 0, 2] = 2.0 * (q2 * q4 + q3 * q1)
    r[:, 1, 0] = 2.0 * (q2 * q3 + q4 * q1)
    r[:, 1, 1] = 1.0 - 2.0 * (q2 * q2 + q4 * q4)
    r[:, 1, 2] = 2.0 * (q3 * q4 - q2 * q1)
    r[:, 2, 0] = 2.0 * (q2 * q4 - q3 * q1)
    r[:, 2, 1] = 2.0 * (q3 * q4 + q2 * q1)
    r[:, 2, 2] = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
    return r[0] if single else r


def omega_matrix(w: Array) -> Array:
    """Quaternion kinematics matrix Omega(w); [B,3] -> [B,4,4].

    q_dot = 0.5 * Omega(w) q.
    """
    w, single = _as_batch(w, 3, "w")
    w1, w2, w3 = w[:, 0], w[:, 1], w[:, 2]
    z = np.zeros_like(w1)
    om = np.empty((w.shape[0], 4, 4), dtype=np.float64)
    om[:, 0] = np.stack([z, -w1, -w2, -w3], axis=1)
    om[:, 1] = np.stack([w1, z, w3, -w2], axis=1)
    om[:, 2] = np.stack([w2, -w3, z, w1], axis=1)
    om[:, 3] = np.stack([w3, w2, -w1, z], axis=1)
    return om[0] if single else om


def quaternion_matrices(q: Array, w: Array) -> tuple[Array, Array]:
    """Kinematics operator Omega(w) [4x4] and rotation R(q) [3x3], one pose.

    The quaternion must already be normalized: attitude propagation keeps
    unit length only approximately, and silently renormalizing here would
    hide that drift from the caller.
    """
    q = np.asarray(q, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if q.shape != (4,) or w.shape != (3,):
        raise ShapeError("need one quaternion [4] and one angular velocity [3]")
    if abs(float(np.linalg.norm(q)) - 1.0) > 1e-9:
        raise DomainError("quaternion must be normalized to unit length")
    return omega_matrix(w), rotation_matrix(q)


def quaternion_derivative(q: Array, w: Array) -> Array:
    """q_dot = 0.5 * Omega(w) q, written out per component."""
    q, qs = _as_batch(q, 4, "q")
    w, ws = _as_batch(w, 3, "w")
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    w1, w2, w3 = w[:, 0], w[:, 1], w[:, 2]
    dq = np.stack([
        0.5 * (-w1 * q2 - w2 * q3 - w3 * q4),
        0.5 * (w1 * q1 + w3 * q3 - w2 * q4),
        0.5 * (w2 * q1 - w3 * q2 + w1 * q4),
        0.5 * (w3 * q1 + w2 * q2 - w1 * q3),
    ], axis=1)
    return dq[0] if qs and ws else dq


def pendulum_dynamics(x: Array, u: Array, c: dict[str, float]) -> Array:
    x, xs = _as_batch(x, 2, "x")
    u, _ = _as_batch(u, 1, "u")
    m, g, l, inertia, b = c["m"], c["g"], c["l"], c["I"], c["b"]
    acc = (u[:, 0] - m * g * l * np.sin(x[:, 0]) - b * x[:, 1]) / inertia
    out = np.stack([x[:, 1], acc], axis=1)
    return out[0] if xs else out


def robot_arm_mass_terms(x: Array, c: dict[str, float]) -> tuple[Array, Array, Array, Array]:
    """Mass-matrix entries (M11, M12, M22) and det(M) for [B,4] states."""
    m1, m2 = c["m1"], c["m2"]
    l1, r1, r2 = c["l1"], c["r1"], c["r2"]
    i1, i2 = c["I1"], c["I2"]
    c2 = np.cos(x[:, 1])
    m11 = m1 * r1 ** 2 + i1 + m2 * (l1 ** 2 + r2 ** 2 + 2.0 * l1 * r2 * c2)
    m12 = m2 * (r2 ** 2 + l1 * r2 * c2) + i2
    m22 = np.full_like(c2, m2 * r2 ** 2 + i2)
    det = m11 * m22 - m12 * m12
    return m11, m12, m22, det


def robot_arm_forcing(x: Array, u: Array, c: dict[str, float]) -> Array:
    """[tau; 0] - C(x, x_dot) x_dot - g(x) for [B,4] states; returns [B,2]."""
    m1, m2, grav = c["m1"], c["m2"], c["G"]
    l1, r1, r2 = c["l1"], c["r1"], c["r2"]
    alpha = m2 * l1 * r2
    s2 = np.sin(x[:, 1])
    v1, v2 = x[:, 2], x[:, 3]
    cor1 = -alpha * s2 * (2.0 * v1 * v2 + v2 * v2)
    cor2 = alpha * s2 * v1 * v1
    g1 = m1 * r1 * grav * np.cos(x[:, 0]) + m2 * grav * (
        r2 * np.cos(x[:, 0] + x[:, 1]) + l1 * np.cos(x[:, 0]))
    g2 = m2 * grav * r2 * np.cos(x[:, 0] + x[:, 1])
    h1 = -cor1 - g1
    h2 = u[:, 0] - cor2 - g2
    return np.stack([h1, h2], axis=1)


def robot_arm_dynamics(x: Array, u: Array, c: dict[str, float]) -> Array:
    x, xs = _as_batch(x, 4, "x")
    u, _ = _as_batch(u, 1, "u")
    m11, m12, m22, det = robot_arm_mass_terms(x, c)
    if np.any(np.abs(det) < SINGULARITY_TOL):
        raise SingularityError("mass matrix is singular")
    h = robot_arm_forcing(x, u, c)
    acc1 = (m22 * h[:, 0] - m12 * h[:, 1]) / det
    acc2 = (-m12 * h[:, 0] + m11 * h[:, 1]) / det
    out = np.stack([x[:, 2], x[:, 3], acc1, acc2], axis=1)
    return out[0] if xs else out


def cartpole_dynamics(x: Array, u: Array, c: dict[str, float]) -> Array:
    x, xs = _as_batch(x, 4, "x")
    u, _ = _as_batch(u, 1, "u")
    mc, mp, g, l = c["m_c"], c["m_p"], c["g"], c["l"]
    s, co = np.sin(x[:, 1]), np.cos(x[:, 1])
    v4 = x[:, 3]
    den = mc + mp * s * s
    acc_cart = (u[:, 0] + mp * s * (l * v4 * v4 + g * co)) / den
    acc_pole = (-u[:, 0] * co - mp * l * v4 * v4 * co * s
                - (mc + mp) * g * s) / (l * den)
    out = np.stack([x[:, 2], x[:, 3], acc_cart, acc_pole], axis=1)
    return out[0] if xs else out


def _body_rates(x: Array, u: Array, torque: Array, inertia: Array) -> Array:
    """w_dot = J^-1 (T u - w x J w) with diagonal J; returns [B,3]."""
    w = x[:, 6:9]
    jw = w * inertia[None, :]
    gyro = np.stack([
        w[:, 1] * jw[:, 2] - w[:, 2] * jw[:, 1],
        w[:, 2] * jw[:, 0] - w[:, 0] * jw[:, 2],
        w[:, 0] * jw[:, 1] - w[:, 1] * jw[:, 0],
    ], axis=1)
    tu = np.einsum("ij,bj->bi", torque, u)
    return (tu - gyro) / inertia[None, :]


def quadrotor_torque(c: dict[str, float]) -> Array:
    l, k = c["l"], c["c"]
    return np.array([
        [0.0, -l / 2.0, 0.0, l / 2.0],
        [-l / 2.0, 0.0, l / 2.0, 0.0],
        [k, -k, k, -k],
    ])


def rocket_torque(c: dict[str, float]) -> Array:
    l = c["l"]
    return np.array([
        [0.0, 0.0, 0.0],
        [0.0, 0.0, l / 2.0],
        [0.0, -l / 2.0, 0.0],
    ])


def quadrotor_inertia(c: dict[str, float]) -> Array:
    return np.array([c["J1"], c["J2"], c["J3"]])


def quadrotor_dynamics(x: Array, u: Array, q: Array, c: dict[str, float]) -> tuple[Array, Array]:
    """State is [p(3), v(3), w(3)]; thrust sum acts along the body z axis.

    Returns (x_dot, q_dot).
    """
    x, xs = _as_batch(x, 9, "x")
    u, _ = _as_batch(u, 4, "u")
    q, _ = _as_batch(q, 4, "q")
    m, g = c["m"], c["g"]
    thrust = np.sum(u, axis=1)
    q1, q2, q3, q4 = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    r31 = 2.0 * (q2 * q4 - q3 * q1)
    r32 = 2.0 * (q3 * q4 + q2 * q1)
    r33 = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
    vdot = np.stack([
        thrust * r31 / m,
        thrust * r32 / m,
        g + thrust * r33 / m,
    ], axis=1)
    wdot = _body_rates(x, u, quadrotor_torque(c), quadrotor_inertia(c))
    xdot = np.concatenate([x[:, 3:6], vdot, wdot], axis=1)
    qdot = quaternion_derivative(q, x[:, 6:9])
    if xs:
        return xdot[0], qdot[0]
    return xdot, qdot


def rocket_dynamics(x: Array, u: Array, q: Array, c: dict[str, float]) -> tuple[Array, Array]:
    """State is [p(3), v(3), w(3)]; the full thrust vector is rotated by R^T.

    Returns (x_dot, q_dot).
    """
    x, xs = _as_batch(x, 9, "x")
    u, _ = _as_batch(u, 3, "u")
    q, _ = _as_batch(q, 4, "q")
    m, g = c["m"], c["g"]
    r = rotation_matrix(q)
    body_force = np.einsum("bji,bj->bi", r, u)
    vdot = body_force / m
    vdot[:, 0] += g
    inertia = np.array([c["J1"], c["J2"], c["J3"]])
    wdot = _body_rates(x, u, rocket_torque(c), inertia)
    xdot = np.concatenate([x[:, 3:6], vdot, wdot], axis=1)
    qdot = quaternion_derivative(q, x[:, 6:9])
    if xs:
        return xdot[0], qdot[0]
    return xdot, qdot


def zermelo_dynamics(z: Array, beta: Array, c: dict[str, float]) -> Array:
    """Planar motion at fixed speed through a linear current field."""
    z, zs = _as_batch(z, 2, "z")
    beta, _ = _as_batch(beta, 1, "beta")
    v = c["V"]
    b = beta[:, 0]
    out = np.stack([
        v * np.cos(b) + c["A"] * z[:, 0] + c["B"] * z[:, 1],
        v * np.sin(b) + c["C"] * z[:, 0] + c["D"] * z[:, 1],
    ], axis=1)
    return out[0] if zs else out


def eval_dynamics(env: EnvSpec, x: Array, u: Array, q: Array | None = None):
    """Dispatch to the environment's dynamics.

    Quaternion environments require ``q`` and return (x_dot, q_dot);
    the rest return x_dot alone.
    """
    if env.has_quaternion:
        if q is None:
            raise ShapeError(f"{env.env_id} dynamics need a quaternion")
        fn = quadrotor_dynamics if env.env_id == "quadrotor" else rocket_dynamics
        return fn(x, u, q, env.constants)
    if q is not None:
        raise ShapeError(f"{env.env_id} dynamics take no quaternion")
    if env.env_id == "pendulum":
        return pendulum_dynamics(x, u, env.constants)
    if env.env_id == "robot_arm":
        return robot_arm_dynamics(x, u, env.constants)
    if env.env_id == "cartpole":
        return cartpole_dynamics(x, u, env.constants)
    if env.env_id == "zermelo":
        return zermelo_dynamics(x, u, env.constants)
    raise ShapeError(f"{env.env_id} has no time-domain dynamics")

"""Environment registry: canonical constants, costs, and instance factories."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from ..errors import ConfigError
from .dynamics import (eval_dynamics, omega_matrix, quaternion_matrices,
                       rotation_matrix)
from .jacobians import DynamicsJacobians, eval_jacobians
from .rollout import (eval_total_cost, rollout_controls, rollout_euler,
                      stage_cost, stage_cost_gradients, total_cost)
from .types import (ENV_DIMS, ENV_IDS, QUATERNION_ENVS, ControlGrid, CostSpec,
                    EnvSpec, OcpInstance, Trajectory, knot_indices)

__all__ = [
    "ENV_DIMS", "ENV_IDS", "QUATERNION_ENVS", "ControlGrid", "CostSpec",
    "DynamicsJacobians", "EnvSpec", "OcpInstance", "Trajectory",
    "default_parameters", "eval_dynamics", "eval_jacobians", "eval_total_cost",
    "knot_indices", "make_env", "make_instance", "omega_matrix",
    "quaternion_matrices", "rollout_controls", "rollout_euler",
    "rotation_matrix", "stage_cost", "stage_cost_gradients", "total_cost",
]

_DEFAULTS: dict[str, dict[str, Any]] = {
    "pendulum": {
        "constants": {"m": 1.0, "g": 10.0, "l": 1.0, "I": 1.0 / 3.0, "b": 0.0},
        "x_init": [0.0, 0.0],
        "x_goal": [math.pi, 0.0],
        "c_x": [10.0, 1.0],
        "c_u": 0.1,
    },
    "robot_arm": {
        "constants": {"m1": 1.0, "m2": 1.0, "G": 0.0, "l1": 1.0, "l2": 1.0,
                      "r1": 0.5, "r2": 0.5, "I1": 1.0 / 3.0, "I2": 1.0 / 3.0},
        "x_init": [math.pi / 4.0, math.pi / 2.0, 0.0, 0.0],
        "x_goal": [math.pi / 2.0, 0.0, 0.0, 0.0],
        "c_x": [0.1, 0.1, 0.1, 0.1],
        "c_u": 0.1,
    },
    "cartpole": {
        "constants": {"m_c": 0.1, "m_p": 0.1, "g": 10.0, "l": 1.0},
        "x_init": [0.0, 0.0, 0.0, 0.0],
        "x_goal": [0.0, math.pi, 0.0, 0.0],
        "c_x": [0.1, 0.6, 0.1, 0.1],
        "c_u": 0.3,
    },
    "quadrotor": {
        "constants": {"m": 1.0, "g": 10.0, "l": 0.4, "c": 0.01,
                      "J1": 1.0, "J2": 1.0, "J3": 1.0},
        "x_init": [-8.0, -6.0, 9.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "x_goal": [0.6] * 9,
        "c_x": [1.0] * 9,
        "c_u": 0.1,
        "q_init": [1.0, 0.0, 0.0, 0.0],
    },
    "rocket": {
        "constants": {"m": 1.0, "g": 10.0, "l": 1.0,
                      "J1": 0.5, "J2": 1.0, "J3": 1.0},
        "x_init": [10.0, -8.0, 5.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        "x_goal": [0.0] * 9,
        "c_x": [1.0] * 9,
        "c_u": 0.4,
        "q_init": [math.cos(0.75), 0.0, 0.0, math.sin(0.75)],
    },
    "brachistochrone": {
        "constants": {"g": 10.0, "x_start": 0.0, "x_end": 2.0},
        "x_init": [2.5],
        "x_goal": [1.5],
        "c_x": [0.0],
        "c_u": 0.0,
    },
    "zermelo": {
        "constants": {"V": 2.0, "A": 0.0, "B": 0.0, "C": 0.0, "D": 0.0},
        "x_init": [0.0, 0.0],
        "x_goal": [1.0, 1.0],
        "c_x": [0.0, 0.0],
        "c_u": 0.0,
    },
}

SYNTHETIC_ENV_IDS = ("pendulum", "robot_arm", "cartpole", "quadrotor", "rocket")


def default_parameters(env_id: str) -> dict[str, Any]:
    """Deep copy of the canonical constants/cost/initial-state table."""
    if env_id not in _DEFAULTS:
        raise ConfigError(f"unknown environment '{env_id}'")
    entry = _DEFAULTS[env_id]
    out: dict[str, Any] = {"constants": dict(entry["constants"])}
    for key in ("x_init", "x_goal", "c_x"):
        out[key] = list(entry[key])
    out["c_u"] = entry["c_u"]
    if "q_init" in entry:
        out["q_init"] = list(entry["q_init"])
    return out


def make_env(env_id: str, constants: dict[str, float] | None = None) -> EnvSpec:
    """EnvSpec with canonical constants, optionally overridden by name."""
    defaults = default_parameters(env_id)
    merged = defaults["constants"]
    if constants:
        for name, value in constants.items():
            if name not in merged:
                raise ConfigError(f"{env_id} has no constant '{name}'")
            merged[name] = float(value)
    d_u, d_x = ENV_DIMS[env_id]
    return EnvSpec(env_id=env_id, constants=merged, d_u=d_u, d_x=d_x,
                   has_quaternion=env_id in QUATERNION_ENVS)


def make_instance(env_id: str, *, x_goal=None, x_init=None,
                  constants: dict[str, float] | None = None,
                  tf: float = 1.0, n_grid: int = 100,
                  c_x=None, c_u: float | None = None,
                  q_init=None) -> OcpInstance:
    """Problem instance with canonical defaults for anything unspecified."""
    defaults = default_parameters(env_id)
    env = make_env(env_id, constants)
    cost = CostSpec(
        x_goal=np.asarray(defaults["x_goal"] if x_goal is None else x_goal, dtype=np.float64),
        c_x=np.asarray(defaults["c_x"] if c_x is None else c_x, dtype=np.float64),
        c_u=defaults["c_u"] if c_u is None else float(c_u),
    )
    if env.has_quaternion and q_init is None:
        q_init = defaults["q_init"]
    return OcpInstance(
        env=env,
        cost=cost,
        x_init=np.asarray(defaults["x_init"] if x_init is None else x_init, dtype=np.float64),
        tf=float(tf),
        n_grid=int(n_grid),
        q_init=None if q_init is None else np.asarray(q_init, dtype=np.float64),
    )

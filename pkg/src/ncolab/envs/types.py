"""Problem-instance data types shared by every environment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError

Array = np.ndarray

ENV_IDS = ("pendulum", "robot_arm", "cartpole", "quadrotor", "rocket",
           "brachistochrone", "zermelo")

# (d_u, d_x) per environment
ENV_DIMS = {
    "pendulum": (1, 2),
    "robot_arm": (1, 4),
    "cartpole": (1, 4),
    "quadrotor": (4, 9),
    "rocket": (3, 9),
    "brachistochrone": (1, 1),
    "zermelo": (1, 2),
}

QUATERNION_ENVS = ("quadrotor", "rocket")


@dataclass
class EnvSpec:
    """Environment identity plus its physical constants.

    ``constants`` maps names (masses, lengths, inertias, gravity, torque
    constants, current coefficients, speed, ...) to floats.
    ``has_quaternion`` marks systems whose attitude is integrated as an
    auxiliary quaternion alongside the state.
    """

    env_id: str
    constants: dict[str, float]
    d_u: int
    d_x: int
    has_quaternion: bool = False

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ShapeError(f"unknown env_id '{self.env_id}'")
        if (self.d_u, self.d_x) != ENV_DIMS[self.env_id]:
            raise ShapeError(f"{self.env_id}: dims ({self.d_u},{self.d_x}) do not match "
                             f"the expected {ENV_DIMS[self.env_id]}")
        if self.has_quaternion != (self.env_id in QUATERNION_ENVS):
            raise ShapeError(f"{self.env_id}: quaternion flag must be "
                             f"{self.env_id in QUATERNION_ENVS}")
        for name, value in self.constants.items():
            if not np.isfinite(value):
                raise ShapeError(f"constant '{name}' is not finite")
        for name in ("m", "m1", "m2", "m_c", "m_p", "I", "I1", "I2"):
            if name in self.constants and self.constants[name] <= 0:
                raise ShapeError(f"constant '{name}' must be strictly positive")


@dataclass
class CostSpec:
    """Quadratic tracking cost: integral of c_x.(x-x_goal)^2 + c_u*|u|^2.

    The squares are elementwise; ``terminal_h`` is 'zero' for every
    synthetic environment (no terminal cost).
    """

    x_goal: Array
    c_x: Array
    c_u: float
    terminal_h: str = "zero"

    def __post_init__(self):
        self.x_goal = np.asarray(self.x_goal, dtype=np.float64)
        self.c_x = np.asarray(self.c_x, dtype=np.float64)
        if self.x_goal.shape != self.c_x.shape:
            raise ShapeError("x_goal and c_x must have the same length")
        if np.any(self.c_x < 0) or self.c_u < 0:
            raise ShapeError("cost weights must be non-negative")
        if self.terminal_h != "zero":
            raise ShapeError(f"unsupported terminal cost '{self.terminal_h}'")


@dataclass
class OcpInstance:
    """One problem: environment, cost, initial state, and time grid.

    ``q_init`` is required exactly for quaternion environments and is
    normalized on construction. The time grid has ``n_grid`` uniform
    points on [0, tf].
    """

    env: EnvSpec
    cost: CostSpec
    x_init: Array
    tf: float
    n_grid: int = 100
    q_init: Array | None = None
    t0: float = 0.0

    def __post_init__(self):
        self.x_init = np.asarray(self.x_init, dtype=np.float64)
        if self.x_init.shape != (self.env.d_x,):
            raise ShapeError(f"x_init length {self.x_init.shape} != d_x {self.env.d_x}")
        if self.cost.x_goal.shape != (self.env.d_x,):
            raise ShapeError("cost dimensions do not match the environment")
        if not self.tf > 0:
            raise ShapeError("tf must be positive")
        if self.n_grid < 2:
            raise ShapeError("n_grid must be at least 2")
        if self.t0 != 0.0:
            raise ShapeError("t0 must be 0")
        if self.env.has_quaternion:
            if self.q_init is None:
                raise ShapeError(f"{self.env.env_id} requires q_init")
            q = np.asarray(self.q_init, dtype=np.float64)
            norm = float(np.linalg.norm(q))
            if q.shape != (4,) or norm == 0.0:
                raise ShapeError("q_init must be a nonzero quaternion")
            self.q_init = q / norm
        elif self.q_init is not None:
            raise ShapeError(f"{self.env.env_id} takes no quaternion")

    @property
    def times(self) -> Array:
        return np.linspace(0.0, self.tf, self.n_grid)

    @property
    def dt(self) -> float:
        return self.tf / (self.n_grid - 1)


@dataclass
class Trajectory:
    """States on the instance time grid; quaternions ride along when present."""

    times: Array
    states: Array
    quaternions: Array | None = None

    def __post_init__(self):
        if self.states.shape[0] != self.times.shape[0]:
            raise ShapeError("states and times disagree on grid size")
        dts = np.diff(self.times)
        if np.any(dts <= 0) or not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
            raise ShapeError("times must be strictly increasing and uniform")


@dataclass
class ControlGrid:
    """Control knots on a uniform grid over [0, tf].

    For the time-domain environments the values are interpreted as
    piecewise-constant: u(t) = values[min(floor(t/tf * n_knots), n_knots-1)].
    The curve environment reuses the container for sampled curve heights.
    """

    values: Array

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ShapeError("control grid must be [n_knots, d_u] with n_knots >= 1")
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("control grid contains non-finite values")

    @property
    def n_knots(self) -> int:
        return self.values.shape[0]

    @property
    def d_u(self) -> int:
        return self.values.shape[1]

    def at_time(self, t: float, tf: float) -> Array:
        idx = min(int(np.floor(t / tf * self.n_knots)), self.n_knots - 1)
        return self.values[max(idx, 0)]


def knot_indices(n_grid: int, n_knots: int) -> np.ndarray:
    """Knot index consumed by each Euler step k = 0..n_grid-2.

    Step k starts at t_k = k*tf/(n_grid-1); the piecewise-constant rule
    maps it to knot floor(k*n_knots/(n_grid-1)), capped at n_knots-1.
    """
    k = np.arange(n_grid - 1)
    idx = (k * n_knots) // (n_grid - 1)
    return np.minimum(idx, n_knots - 1)

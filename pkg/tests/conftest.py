"""Shared fixtures: small solved datasets and fast fabricated records."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ncolab.datagen import generate_benchmark, generate_dataset
from ncolab.envs import default_parameters


@pytest.fixture(scope="session")
def pendulum_records():
    """Two dozen solved swing-up training records."""
    return generate_dataset("pendulum", 24, 123)


@pytest.fixture(scope="session")
def pendulum_bench():
    """Small in-distribution swing-up benchmark."""
    return generate_benchmark("pendulum", 10, 123)


@pytest.fixture(scope="session")
def brachistochrone_bench():
    """Small curve-descent benchmark."""
    return generate_benchmark("brachistochrone", 4, 123)


@pytest.fixture(scope="session")
def zermelo_bench():
    """Small crossing benchmark."""
    return generate_benchmark("zermelo", 3, 123)


def make_fabricated_records(n: int, seed: int, n_grid: int = 25) -> list[dict]:
    """Cheap swing-up-shaped records with a smooth closed-form control.

    u*(t) = g0 * sin(pi t) + (g1 - default) * t depends on the goal, so a
    model has something learnable, and no solver runs.
    """
    defaults = default_parameters("pendulum")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n_grid)
    records = []
    for i in range(n):
        goal = [defaults["x_goal"][0] + rng.uniform(-0.5, 0.5),
                defaults["x_goal"][1] + rng.uniform(-0.5, 0.5)]
        u = goal[0] * np.sin(math.pi * t) + (goal[1] - defaults["x_goal"][1]) * t
        records.append({
            "env_id": "pendulum", "label": "id", "index": i,
            "tf": 1.0, "n_grid": n_grid,
            "x_init": list(defaults["x_init"]), "x_goal": goal,
            "constants": dict(defaults["constants"]),
            "u_star": u[:, None].tolist(), "j_opt": 1.0,
            "converged": True, "n_iters": 1,
        })
    return records


@pytest.fixture()
def fabricated_records():
    return make_fabricated_records(40, 7)

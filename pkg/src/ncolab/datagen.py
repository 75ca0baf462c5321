"""Dataset generation: sample instance distributions, solve, serialize.

Sampling layout
---------------
Every record draws from its own generator seeded by the tuple
``(seed, domain, label, index)``, where domain 0 = training,
1 = benchmark, 2 = validation. Records are therefore independent of
batch size, generation order, and process count: regenerating any slice
of a dataset yields byte-identical JSON lines.

Instance distributions
----------------------
Time-domain environments perturb each goal coordinate by a uniform
offset: U(-0.5, 0.5) in distribution, U(-0.7, -0.5) out of
distribution, and three increasingly distant bands U(-1.0, -0.8),
U(-1.3, -1.1), U(-1.6, -1.4); the horizon is drawn from U(1, 1.01).
The curve-descent environment perturbs its end height the same way.
The crossing environment adds U(0, 1) (in distribution) or U(1, 2)
(out) to all seven of (x2, y2, V, A, B, C, D). The "more_vars" mode
additionally perturbs the initial state (additively) and every model
constant (multiplicatively, keeping signs) with the same offset band.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .envs import (ENV_DIMS, ENV_IDS, SYNTHETIC_ENV_IDS, OcpInstance,
                   default_parameters, make_instance)
from .errors import ConfigError, DataFormatError
from .solvers import (DirectSolverConfig, ZermeloConfig, brachistochrone_analytic,
                      solve_curve_batch, solve_direct_batch, solve_zermelo_batch)

Array = np.ndarray

DOMAIN_TRAIN = 0
DOMAIN_BENCHMARK = 1
DOMAIN_VALIDATION = 2
DOMAIN_MODEL = 3  # model initialization / batch schedule streams (training)

LABELS = {"id": 0, "ood": 1, "ood1": 2, "ood2": 3, "ood3": 4}

GOAL_OFFSETS = {
    "id": (-0.5, 0.5),
    "ood": (-0.7, -0.5),
    "ood1": (-1.0, -0.8),
    "ood2": (-1.3, -1.1),
    "ood3": (-1.6, -1.4),
}
ZERMELO_OFFSETS = {"id": (0.0, 1.0), "ood": (1.0, 2.0)}
TF_RANGE = (1.0, 1.01)

BRACH_SPAN = 2.0
BRACH_G = 10.0

MODES = ("goal", "more_vars")

RECORD_KEYS = ("env_id", "label", "index", "tf", "n_grid", "x_init", "x_goal",
               "constants", "u_star", "j_opt", "converged", "n_iters")


def rng_for(seed: int, domain: int, label: str, index: int) -> np.random.Generator:
    """Per-record generator; the tuple seeding makes records order-free."""
    if label not in LABELS:
        raise ConfigError(f"unknown distribution label '{label}'")
    return np.random.default_rng(
        np.random.SeedSequence((int(seed), int(domain), LABELS[label], int(index))))


def _offset_band(env_id: str, label: str) -> tuple[float, float]:
    if env_id == "zermelo":
        if label not in ZERMELO_OFFSETS:
            raise ConfigError(f"the crossing environment has no '{label}' band")
        return ZERMELO_OFFSETS[label]
    if label not in GOAL_OFFSETS:
        raise ConfigError(f"unknown distribution label '{label}'")
    return GOAL_OFFSETS[label]


def sample_record_params(env_id: str, label: str, rng: np.random.Generator,
                         mode: str = "goal") -> dict[str, Any]:
    """Draw one instance's parameters (plain python values, fixed order)."""
    if env_id not in ENV_IDS:
        raise ConfigError(f"unknown environment '{env_id}'")
    if mode not in MODES:
        raise ConfigError(f"unknown sampling mode '{mode}'")
    defaults = default_parameters(env_id)
    lo, hi = _offset_band(env_id, label)
    out: dict[str, Any] = {"constants": dict(defaults["constants"]),
                           "x_init": list(defaults["x_init"])}

    if env_id == "zermelo":
        base = [defaults["x_goal"][0], defaults["x_goal"][1],
                defaults["constants"]["V"], defaults["constants"]["A"],
                defaults["constants"]["B"], defaults["constants"]["C"],
                defaults["constants"]["D"]]
        drawn = [b + rng.uniform(lo, hi) for b in base]
        out["x_goal"] = drawn[:2]
        for name, value in zip(("V", "A", "B", "C", "D"), drawn[2:]):
            out["constants"][name] = value
        out["tf"] = None
        return out

    out["x_goal"] = [g + rng.uniform(lo, hi) for g in defaults["x_goal"]]
    out["tf"] = None if env_id == "brachistochrone" else float(rng.uniform(*TF_RANGE))
    if mode == "more_vars":
        out["x_init"] = [x + rng.uniform(lo, hi) for x in defaults["x_init"]]
        for name in sorted(out["constants"]):
            out["constants"][name] *= 1.0 + rng.uniform(lo, hi)
    return out


@dataclass(frozen=True)
class DistributionSpec:
    """Sampling recipe: environment, offset band label, and varied-field mode."""

    env_id: str
    label: str = "id"
    mode: str = "goal"

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ConfigError(f"unknown environment '{self.env_id}'")
        if self.mode not in MODES:
            raise ConfigError(f"unknown sampling mode '{self.mode}'")
        _offset_band(self.env_id, self.label)


def sample_instance(dist: DistributionSpec, rng: np.random.Generator) -> OcpInstance:
    """Draw one time-domain problem instance from a sampling recipe.

    The curve-descent and crossing families are parameter tuples rather
    than time-domain instances; sample their records via
    :func:`generate_dataset` instead.
    """
    if dist.env_id not in SYNTHETIC_ENV_IDS:
        raise ConfigError(f"'{dist.env_id}' does not build a time-domain instance")
    params = sample_record_params(dist.env_id, dist.label, rng, dist.mode)
    return make_instance(dist.env_id, x_goal=params["x_goal"],
                         x_init=params["x_init"], constants=params["constants"],
                         tf=params["tf"], n_grid=100)


def record_to_instance(record: dict) -> OcpInstance:
    """Rebuild the problem instance a time-domain record describes."""
    env_id = record["env_id"]
    if env_id not in SYNTHETIC_ENV_IDS:
        raise ConfigError(f"'{env_id}' records do not describe a time-domain instance")
    return make_instance(env_id, x_goal=record["x_goal"], x_init=record["x_init"],
                         constants=record["constants"], tf=record["tf"],
                         n_grid=record["n_grid"], c_x=record.get("c_x"),
                         c_u=record.get("c_u"), q_init=record.get("q_init"))


def _solve_synthetic(env_id: str, params: list[dict], n_grid: int,
                     config: DirectSolverConfig | None) -> list[dict]:
    config = config or DirectSolverConfig(n_knots=n_grid)
    instances = [record_to_instance({**p, "env_id": env_id, "n_grid": n_grid})
                 for p in params]
    solutions = solve_direct_batch(instances, config)
    rows = []
    for p, sol in zip(params, solutions):
        rows.append({
            "u_star": [[float(v) for v in knot] for knot in sol.controls.values],
            "j_opt": float(sol.objective),
            "converged": bool(sol.converged and not sol.diverged),
            "n_iters": int(sol.n_iters),
        })
    return rows


def _solve_brachistochrone(params: list[dict], n_grid: int,
                           config: DirectSolverConfig | None) -> list[dict]:
    config = config or DirectSolverConfig(n_knots=n_grid, max_iters=2000,
                                          lr0=0.02, grad_tol=1e-9)
    y1 = np.array([p["x_init"][0] for p in params])
    y2 = np.array([p["x_goal"][0] for p in params])
    heights, times, converged, n_iters = solve_curve_batch(
        y1, y2, span=BRACH_SPAN, g=BRACH_G, config=config)
    rows = []
    for k, p in enumerate(params):
        analytic = brachistochrone_analytic(BRACH_SPAN, y1[k] - y2[k], BRACH_G)
        rows.append({
            "u_star": [[float(v)] for v in heights[k]],
            "j_opt": float(analytic.travel_time),
            "dm_time": float(times[k]),
            "converged": bool(converged[k]),
            "n_iters": int(n_iters[k]),
        })
    return rows


def _solve_zermelo(params: list[dict], n_grid: int,
                   config: ZermeloConfig | None) -> list[dict]:
    config = config or ZermeloConfig(n_grid=n_grid)
    mat = np.array([[p["x_goal"][0], p["x_goal"][1], p["constants"]["V"],
                     p["constants"]["A"], p["constants"]["B"], p["constants"]["C"],
                     p["constants"]["D"]] for p in params])
    beta, t_best, miss, score, converged, n_iters = solve_zermelo_batch(mat, config)
    rows = []
    for k in range(len(params)):
        rows.append({
            "u_star": [[float(v)] for v in beta[k]],
            "j_opt": float(score[k]),
            "t_star": float(t_best[k]),
            "miss": float(miss[k]),
            "converged": bool(converged[k]),
            "n_iters": int(n_iters[k]),
        })
    return rows


def generate_dataset(env_id: str, n: int, seed: int, *, label: str = "id",
                     domain: int = DOMAIN_TRAIN, mode: str = "goal",
                     n_grid: int = 100, chunk_size: int = 256,
                     direct_config: DirectSolverConfig | None = None,
                     curve_config: DirectSolverConfig | None = None,
                     zermelo_config: ZermeloConfig | None = None) -> list[dict]:
    """Sample and solve ``n`` instances; returns JSON-ready records.

    ``chunk_size`` only controls solver batching; outputs are identical
    for any value because rows never interact.
    """
    if n < 1:
        raise ConfigError("dataset size must be at least 1")
    if chunk_size < 1:
        raise ConfigError("chunk size must be at least 1")
    # u_star is recorded on the dataset grid, so a custom solver config
    # must agree with it.
    if (env_id in SYNTHETIC_ENV_IDS and direct_config is not None
            and direct_config.n_knots != n_grid):
        raise ConfigError("direct_config.n_knots must equal the dataset n_grid")
    if (env_id == "brachistochrone" and curve_config is not None
            and curve_config.n_knots != n_grid):
        raise ConfigError("curve_config.n_knots must equal the dataset n_grid")
    if (env_id == "zermelo" and zermelo_config is not None
            and zermelo_config.n_grid != n_grid):
        raise ConfigError("zermelo_config.n_grid must equal the dataset n_grid")
    sampled = [sample_record_params(env_id, label, rng_for(seed, domain, label, i), mode)
               for i in range(n)]
    records: list[dict] = []
    for start in range(0, n, chunk_size):
        chunk = sampled[start:start + chunk_size]
        if env_id == "brachistochrone":
            solved = _solve_brachistochrone(chunk, n_grid, curve_config)
        elif env_id == "zermelo":
            solved = _solve_zermelo(chunk, n_grid, zermelo_config)
        else:
            if mode == "more_vars":
                # Perturbed constants differ per row, so solve row-by-row;
                # the batched path requires one shared environment.
                solved = []
                for p in chunk:
                    solved.extend(_solve_synthetic(env_id, [p], n_grid, direct_config))
            else:
                solved = _solve_synthetic(env_id, chunk, n_grid, direct_config)
        defaults = default_parameters(env_id)
        for offset, (p, s) in enumerate(zip(chunk, solved)):
            record = {
                "env_id": env_id,
                "label": label,
                "index": start + offset,
                "tf": p["tf"],
                "n_grid": n_grid,
                "x_init": [float(v) for v in p["x_init"]],
                "x_goal": [float(v) for v in p["x_goal"]],
                "constants": {k: float(v) for k, v in p["constants"].items()},
            }
            if env_id in SYNTHETIC_ENV_IDS:
                record["c_x"] = [float(v) for v in defaults["c_x"]]
                record["c_u"] = float(defaults["c_u"])
                if "q_init" in defaults:
                    record["q_init"] = [float(v) for v in defaults["q_init"]]
            record.update(s)
            records.append(record)
    return records


def generate_benchmark(env_id: str, n: int, seed: int, **kwargs) -> list[dict]:
    """Benchmark-stream variant of :func:`generate_dataset`."""
    return generate_dataset(env_id, n, seed, domain=DOMAIN_BENCHMARK, **kwargs)


def validate_record(record: dict, line: int = 0) -> dict:
    """Check one parsed record's schema; returns it unchanged."""
    for key in RECORD_KEYS:
        if key not in record:
            raise DataFormatError(line, f"record is missing '{key}'")
    env_id = record["env_id"]
    if env_id not in ENV_IDS:
        raise DataFormatError(line, f"unknown environment '{env_id}'")
    d_u = ENV_DIMS[env_id][0]
    u = record["u_star"]
    if len(u) != record["n_grid"] or any(len(row) != d_u for row in u):
        raise DataFormatError(line, f"u_star must be [{record['n_grid']} x {d_u}]")
    if not all(math.isfinite(v) for row in u for v in row):
        raise DataFormatError(line, "u_star contains non-finite values")
    if not math.isfinite(record["j_opt"]):
        raise DataFormatError(line, "j_opt is not finite")
    if env_id == "zermelo" and "t_star" not in record:
        raise DataFormatError(line, "crossing records need a 't_star' arrival time")
    return record


def write_records(path: str, records: Sequence[dict]) -> None:
    """One sorted-key JSON object per line; rejects non-finite floats."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, allow_nan=False) + "\n")


def read_records(path: str) -> list[dict]:
    """Parse and validate a JSONL dataset; errors carry 1-based line numbers."""
    records = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataFormatError(0, f"cannot read dataset: {exc}") from exc
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(i, f"line is not valid JSON: {exc.msg}") from exc
        records.append(validate_record(record, line=i))
    return records

"""Benchmark evaluation: objective-gap accuracy (MAPE) and timing.

A model is scored on what its predicted control achieves, not on how
closely it imitates the reference control: the prediction is evaluated
on the instance's own objective and compared with the stored optimum,

    ape = |J_sol - J_opt| / |J_opt|,

averaged over the benchmark. Predictions whose rollout diverges or
produces a non-finite objective contribute a capped penalty of 10
(1000%) and are flagged, so one blow-up cannot dominate silently.

Per environment family, the achieved objective is:

* time-domain environments — the rollout cost of the predicted knots
  on the instance's own grid;
* curve descent — the exact bead-on-polyline descent time of the
  predicted heights (endpoints pinned);
* crossing — the best fixed-penalty score the predicted headings can
  reach over the arrival time, searched around the reference time.

Timing helpers measure wall-clock seconds per instance for both the
operator (one forward pass over the full control grid) and the
classical solver, in the same process.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import BRACH_G, BRACH_SPAN, record_to_instance
from .envs import ControlGrid, eval_total_cost
from .errors import (ConfigError, DivergenceError, NonFiniteError, NumericalError,
                     ShapeError, SingularityError)
from .operator import OperatorModel, predict_control, record_features
from .solvers import (DirectSolverConfig, ZermeloConfig, best_time_score,
                      solve_curve_batch, solve_direct, solve_zermelo_batch,
                      travel_time)

Array = np.ndarray

DIVERGENCE_CAP = 10.0


@dataclass
class EvalReport:
    """Aggregate accuracy of one model over one benchmark."""

    env_id: str
    arch: str
    n: int
    mape: float
    apes: list[float] = field(default_factory=list)
    diverged: list[bool] = field(default_factory=list)

    @property
    def n_diverged(self) -> int:
        return sum(self.diverged)


def _zermelo_params(record: dict) -> Array:
    c = record["constants"]
    return np.array([record["x_goal"][0], record["x_goal"][1],
                     c["V"], c["A"], c["B"], c["C"], c["D"]])


def achieved_objective(record: dict, u_pred: Array) -> float:
    """Objective the predicted control attains on this record's instance.

    May return inf or raise a numerical error for divergent predictions;
    :func:`evaluate_model` handles both via the cap.
    """
    env_id = record["env_id"]
    u_pred = np.asarray(u_pred, dtype=np.float64)
    if env_id == "brachistochrone":
        y1, y2 = record["x_init"][0], record["x_goal"][0]
        t = travel_time(u_pred.reshape(1, -1), np.array([y1]), np.array([y2]),
                        span=BRACH_SPAN, g=BRACH_G)
        return float(t[0])
    if env_id == "zermelo":
        score = best_time_score(_zermelo_params(record)[None, :],
                                u_pred.reshape(1, -1),
                                np.array([record["t_star"]]))
        return float(score[0])
    instance = record_to_instance(record)
    return eval_total_cost(instance, ControlGrid(u_pred))


def evaluate_model(model: OperatorModel, records: list[dict]) -> EvalReport:
    """MAPE of a model over benchmark records, with divergence capping."""
    if not records:
        raise ConfigError("cannot evaluate on an empty benchmark")
    t_grid = np.linspace(0.0, 1.0, records[0]["n_grid"])
    apes: list[float] = []
    diverged: list[bool] = []
    for record in records:
        feats = record_features(model.encoder.fields, record)
        j_opt = record["j_opt"]
        try:
            u_pred = predict_control(model, feats, t_grid)
            j_sol = achieved_objective(record, u_pred)
            ape = abs(j_sol - j_opt) / abs(j_opt)
            bad = not np.isfinite(ape)
        except (NonFiniteError, DivergenceError, SingularityError,
                NumericalError, ShapeError):
            bad = True
        if bad:
            apes.append(DIVERGENCE_CAP)
            diverged.append(True)
        else:
            apes.append(min(float(ape), DIVERGENCE_CAP))
            diverged.append(False)
    return EvalReport(env_id=records[0]["env_id"], arch=model.arch, n=len(records),
                      mape=float(np.mean(apes)), apes=apes, diverged=diverged)


def evaluate_mape(model: OperatorModel, records: list[dict]) -> EvalReport:
    """Alias of :func:`evaluate_model`."""
    return evaluate_model(model, records)


# ---- timing -----------------------------------------------------------------


def time_operator(model: OperatorModel, record: dict, repeats: int = 25) -> float:
    """Median seconds for one full-grid control prediction of one instance."""
    if repeats < 1:
        raise ConfigError("repeats must be at least 1")
    t_grid = np.linspace(0.0, 1.0, record["n_grid"])
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        feats = record_features(model.encoder.fields, record)
        predict_control(model, feats, t_grid)
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def time_inference(model: OperatorModel, records, repeats: int = 25) -> float:
    """Mean per-instance prediction time over a benchmark (or one record)."""
    recs = records if isinstance(records, list) else [records]
    if not recs:
        raise ConfigError("cannot time an empty benchmark")
    return float(np.mean([time_operator(model, r, repeats) for r in recs]))


def time_classical_solver(record: dict, *,
                          direct_config: DirectSolverConfig | None = None,
                          curve_config: DirectSolverConfig | None = None,
                          zermelo_config: ZermeloConfig | None = None) -> float:
    """Seconds for one from-scratch classical solve of this record's instance."""
    env_id = record["env_id"]
    n_grid = record["n_grid"]
    if env_id == "brachistochrone":
        cfg = curve_config or DirectSolverConfig(n_knots=n_grid, max_iters=2000,
                                                 lr0=0.02, grad_tol=1e-9)
        start = time.perf_counter()
        solve_curve_batch(np.array([record["x_init"][0]]),
                          np.array([record["x_goal"][0]]),
                          span=BRACH_SPAN, g=BRACH_G, config=cfg)
        return time.perf_counter() - start
    if env_id == "zermelo":
        cfg = zermelo_config or ZermeloConfig(n_grid=n_grid)
        start = time.perf_counter()
        solve_zermelo_batch(_zermelo_params(record)[None, :], cfg,
                            raise_infeasible=False)
        return time.perf_counter() - start
    cfg = direct_config or DirectSolverConfig(n_knots=n_grid)
    instance = record_to_instance(record)
    start = time.perf_counter()
    solve_direct(instance, cfg)
    return time.perf_counter() - start


def speedup(model: OperatorModel, record: dict, repeats: int = 25, **solver_kwargs) -> float:
    """Classical-solver seconds divided by operator seconds, same instance."""
    t_op = time_operator(model, record, repeats=repeats)
    t_dm = time_classical_solver(record, **solver_kwargs)
    return t_dm / t_op

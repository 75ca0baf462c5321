"""Minimum-time navigation through a linear current field.

A vessel moves at fixed speed V with heading beta(t) through the drift
field (A x + B y, C x + D y), from the origin to a target (x2, y2):

    x' = V cos(beta) + A x + B y
    y' = V sin(beta) + C x + D y

The free final time is handled by a quadratic penalty: minimize

    J(beta, T; rho) = T + rho * |z(T) - target|^2

over heading knots and T jointly, with rho starting at 1e3 and doubling
whenever the terminal miss plateaus. Iterates are ranked by the score at
the fixed base weight rho0 so reported objectives are comparable across
instances regardless of how far rho grew.

Along an optimal heading the multiplier dynamics imply the closed-form
heading rate

    dbeta/dt = sin^2(beta) C + sin(beta) cos(beta) (A - D) - cos^2(beta) B,

which serves as an independent correctness probe for solved headings.

Instance parameters are ordered (x2, y2, V, A, B, C, D).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InfeasibleError, ShapeError

Array = np.ndarray

RHO_BASE = 1e3
PARAM_NAMES = ("x2", "y2", "V", "A", "B", "C", "D")


@dataclass
class ZermeloConfig:
    """Grid, Adam schedule, and penalty schedule for the navigation solver."""

    n_grid: int = 100
    max_iters: int = 3000
    lr0: float = 0.02
    decay: float = 0.95
    decay_period: int = 200
    grad_tol: float = 1e-8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho0: float = RHO_BASE
    rho_growth: float = 2.0
    rho_cap: float = 1e9
    plateau_every: int = 250
    plateau_factor: float = 0.9
    t_min: float = 0.01
    miss_tol: float = 1e-3
    polish_iters: int = 30

    def __post_init__(self):
        if self.n_grid < 2 or self.max_iters < 1:
            raise ConfigError("n_grid and max_iters must be positive")
        if self.rho0 <= 0 or self.rho_growth < 1 or self.rho_cap < self.rho0:
            raise ConfigError("invalid penalty schedule")


@dataclass
class ZermeloSolution:
    """Solved headings on the full time grid plus the arrival time."""

    beta: Array
    travel_time: float
    miss: float
    score: float
    converged: bool
    n_iters: int
    solve_time: float


def _check_params(params: Array) -> Array:
    params = np.asarray(params, dtype=np.float64)
    single = params.ndim == 1
    if single:
        params = params[None, :]
    if params.ndim != 2 or params.shape[1] != 7:
        raise ShapeError("params must be [B, 7]: (x2, y2, V, A, B, C, D)")
    if np.any(params[:, 2] <= 0):
        raise ShapeError("speed V must be positive")
    return params


def navigation_rate(beta: Array, a, b, c, d) -> Array:
    """Closed-form heading rate along an optimal trajectory."""
    s, co = np.sin(beta), np.cos(beta)
    return s * s * c + s * co * (a - d) - co * co * b


def zermelo_rollout(params: Array, beta: Array, t_final: Array,
                    n_grid: int) -> tuple[Array, Array]:
    """Euler rollout from the origin; returns (states [B,n,2], rates [B,n-1,2]).

    Only the first n_grid - 1 heading knots are consumed.
    """
    params = _check_params(params)
    rows = params.shape[0]
    v, a, b, c, d = (params[:, i] for i in range(2, 7))
    dt = (np.asarray(t_final, dtype=np.float64) / (n_grid - 1))[:, None]
    states = np.empty((rows, n_grid, 2))
    rates = np.empty((rows, n_grid - 1, 2))
    z = np.zeros((rows, 2))
    states[:, 0] = z
    for k in range(n_grid - 1):
        bk = beta[:, k]
        f = np.stack([v * np.cos(bk) + a * z[:, 0] + b * z[:, 1],
                      v * np.sin(bk) + c * z[:, 0] + d * z[:, 1]], axis=1)
        rates[:, k] = f
        z = z + dt * f
        states[:, k + 1] = z
    return states, rates


def penalty_objective_grad(params: Array, beta: Array, t_final: Array,
                           rho: Array) -> tuple[Array, Array, Array, Array]:
    """Penalty objective and exact gradients w.r.t. heading knots and T.

    Returns (score [B], miss [B], g_beta [B, n-1], g_T [B]) where miss is
    the Euclidean distance from the endpoint to the target and score uses
    the per-row penalty weight rho.
    """
    params = _check_params(params)
    rows, n_steps = beta.shape
    n_grid = n_steps + 1
    t_final = np.asarray(t_final, dtype=np.float64)
    states, rates = zermelo_rollout(params, beta, t_final, n_grid)
    target = params[:, 0:2]
    v, a, b, c, d = (params[:, i] for i in range(2, 7))
    dt = (t_final / (n_grid - 1))[:, None]

    err = states[:, -1] - target
    miss2 = np.sum(err * err, axis=1)
    score = t_final + rho * miss2

    lam = 2.0 * rho[:, None] * err
    g_beta = np.empty_like(beta)
    g_t = np.ones(rows)
    for k in range(n_grid - 2, -1, -1):
        bk = beta[:, k]
        g_beta[:, k] = np.sum(lam * np.stack([-v * np.sin(bk), v * np.cos(bk)],
                                             axis=1), axis=1) * dt[:, 0]
        g_t = g_t + np.sum(lam * rates[:, k], axis=1) / (n_grid - 1)
        lam = lam + dt * np.stack([lam[:, 0] * a + lam[:, 1] * c,
                                   lam[:, 0] * b + lam[:, 1] * d], axis=1)
    return score, np.sqrt(miss2), g_beta, g_t


def _stationary_headings(params: Array, phi: Array, t_final: Array,
                         n_grid: int) -> Array:
    """Headings induced by a terminal costate direction phi.

    The multiplier obeys the linear backward recursion
    lam_k = lam_{k+1} (I + dt f_z); a stationary heading points opposite
    the multiplier, beta_k = atan2(-lam_y, -lam_x), and only the
    direction of the terminal costate matters, so the whole stationary
    heading field has two unknowns: phi and the arrival time.
    """
    rows = params.shape[0]
    a, b, c, d = (params[:, i] for i in range(3, 7))
    dt = (t_final / (n_grid - 1))[:, None]
    lam = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    beta = np.empty((rows, n_grid - 1))
    for k in range(n_grid - 2, -1, -1):
        beta[:, k] = np.arctan2(-lam[:, 1], -lam[:, 0])
        lam = lam + dt * np.stack([lam[:, 0] * a + lam[:, 1] * c,
                                   lam[:, 0] * b + lam[:, 1] * d], axis=1)
    return beta


def _shooting_polish(params: Array, beta: Array, t_final: Array,
                     cfg: ZermeloConfig) -> tuple[Array, Array, Array]:
    """Newton shooting on (terminal costate angle, arrival time).

    Squeezes out the heading dither the penalty phase leaves behind:
    with headings forced to their stationary form, the endpoint is a
    smooth map of two unknowns, and Newton drives it onto the target.
    Returns (beta, T, miss); rows whose Newton step would be singular
    keep their previous iterate.
    """
    rows, n_steps = beta.shape
    n_grid = n_steps + 1
    target = params[:, 0:2]

    states, _ = zermelo_rollout(params, beta, t_final, n_grid)
    err = states[:, -1] - target
    phi = np.arctan2(err[:, 1], err[:, 0])
    t_cur = t_final.copy()

    def endpoint_err(phi_v, t_v):
        bb = _stationary_headings(params, phi_v, t_v, n_grid)
        st, _ = zermelo_rollout(params, bb, t_v, n_grid)
        return st[:, -1] - target

    h = 1e-6
    for _ in range(cfg.polish_iters):
        f0 = endpoint_err(phi, t_cur)
        d_phi = (endpoint_err(phi + h, t_cur) - endpoint_err(phi - h, t_cur)) / (2 * h)
        d_t = (endpoint_err(phi, t_cur + h) - endpoint_err(phi, t_cur - h)) / (2 * h)
        det = d_phi[:, 0] * d_t[:, 1] - d_phi[:, 1] * d_t[:, 0]
        ok = np.abs(det) > 1e-14
        safe_det = np.where(ok, det, 1.0)
        step_phi = (f0[:, 0] * d_t[:, 1] - f0[:, 1] * d_t[:, 0]) / safe_det
        step_t = (d_phi[:, 0] * f0[:, 1] - d_phi[:, 1] * f0[:, 0]) / safe_det
        step_mag = np.maximum(np.maximum(np.abs(step_phi), np.abs(step_t)), 1e-300)
        scale = np.minimum(1.0, 0.5 / step_mag)
        phi = np.where(ok, phi - scale * step_phi, phi)
        t_cur = np.where(ok, np.maximum(t_cur - scale * step_t, cfg.t_min), t_cur)

    beta_new = _stationary_headings(params, phi, t_cur, n_grid)
    err = endpoint_err(phi, t_cur)
    return beta_new, t_cur, np.sqrt(np.sum(err * err, axis=1))


def solve_zermelo_batch(params: Array, config: ZermeloConfig | None = None,
                        raise_infeasible: bool = True):
    """Solve a batch of navigation instances.

    Returns (beta [B, n_grid], T [B], miss [B], score [B], converged [B],
    n_iters [B]). Headings start aimed at the target with the straight-
    line crossing time; the last knot, which no Euler step consumes, is
    filled after the solve with one step of the closed-form heading rate.
    Rows whose best miss exceeds the tolerance raise InfeasibleError
    unless raise_infeasible is False.
    """
    cfg = config or ZermeloConfig()
    params = _check_params(params)
    rows = params.shape[0]
    n_steps = cfg.n_grid - 1
    dist = np.sqrt(np.sum(params[:, 0:2] ** 2, axis=1))
    beta = np.repeat(np.arctan2(params[:, 1], params[:, 0])[:, None], n_steps, axis=1)
    t_final = np.maximum(dist / params[:, 2], cfg.t_min)

    theta = np.concatenate([beta, t_final[:, None]], axis=1)
    m = np.zeros_like(theta)
    v_state = np.zeros_like(theta)
    rho = np.full(rows, cfg.rho0)
    rho_fixed = np.full(rows, cfg.rho0)
    miss_at_check = np.full(rows, np.inf)
    best_theta = theta.copy()
    best_score = np.full(rows, np.inf)
    best_miss = np.full(rows, np.inf)
    converged = np.zeros(rows, dtype=bool)
    end_iter = np.full(rows, cfg.max_iters)
    active = np.arange(rows)

    for it in range(cfg.max_iters + 1):
        beta_act = theta[active, :n_steps]
        t_act = theta[active, n_steps]
        score, miss, g_beta, g_t = penalty_objective_grad(
            params[active], beta_act, t_act, rho[active])
        score_fixed = t_act + rho_fixed[active] * miss * miss

        better = score_fixed < best_score[active]
        rows_better = active[better]
        best_score[rows_better] = score_fixed[better]
        best_theta[rows_better] = theta[rows_better]
        best_miss[rows_better] = miss[better]

        grad = np.concatenate([g_beta, g_t[:, None]], axis=1)
        gnorm = np.max(np.abs(grad), axis=1)
        done = (gnorm < cfg.grad_tol) & (miss <= cfg.miss_tol)
        converged[active[done]] = True
        end_iter[active[done]] = it
        if it == cfg.max_iters:
            break
        keep = ~done
        active = active[keep]
        if active.size == 0:
            break
        grad = grad[keep]
        miss = miss[keep]

        if it > 0 and it % cfg.plateau_every == 0:
            stalled = (miss > cfg.miss_tol) & (miss > cfg.plateau_factor * miss_at_check[active])
            rho[active[stalled]] = np.minimum(rho[active[stalled]] * cfg.rho_growth,
                                              cfg.rho_cap)
            miss_at_check[active] = miss

        t = it + 1
        lr = cfg.lr0 * cfg.decay ** (it // cfg.decay_period)
        m[active] = cfg.beta1 * m[active] + (1.0 - cfg.beta1) * grad
        v_state[active] = cfg.beta2 * v_state[active] + (1.0 - cfg.beta2) * grad * grad
        mhat = m[active] / (1.0 - cfg.beta1 ** t)
        vhat = v_state[active] / (1.0 - cfg.beta2 ** t)
        theta[active] = theta[active] - lr * mhat / (np.sqrt(vhat) + cfg.eps)
        theta[active, n_steps] = np.maximum(theta[active, n_steps], cfg.t_min)

    beta_best = best_theta[:, :n_steps]
    t_best = np.maximum(best_theta[:, n_steps], cfg.t_min)
    if cfg.polish_iters > 0:
        beta_pol, t_pol, miss_pol = _shooting_polish(params, beta_best, t_best, cfg)
        score_pol = t_pol + rho_fixed * miss_pol * miss_pol
        take = (miss_pol <= cfg.miss_tol) | (miss_pol <= best_miss)
        beta_best = np.where(take[:, None], beta_pol, beta_best)
        t_best = np.where(take, t_pol, t_best)
        best_miss = np.where(take, miss_pol, best_miss)
        best_score = np.where(take, score_pol, best_score)

    # heading stationarity plus feasibility; the arrival time is optimal in
    # the constrained sense once the endpoint sits on the target, where the
    # penalty derivative w.r.t. T is 1 by construction
    _, _, g_b, _ = penalty_objective_grad(params, beta_best, t_best, rho_fixed)
    converged = (best_miss <= cfg.miss_tol) & (np.max(np.abs(g_b), axis=1) < 1e-4)

    if raise_infeasible and np.any(best_miss > cfg.miss_tol):
        bad = np.flatnonzero(best_miss > cfg.miss_tol)
        raise InfeasibleError(f"navigation miss above {cfg.miss_tol} for rows {bad.tolist()}")

    beta_full = np.empty((rows, cfg.n_grid))
    beta_full[:, :n_steps] = beta_best
    dt_last = t_best / (cfg.n_grid - 1)
    last = beta_best[:, n_steps - 1]
    beta_full[:, n_steps] = last + dt_last * navigation_rate(
        last, params[:, 3], params[:, 4], params[:, 5], params[:, 6])
    beta_full = np.unwrap(beta_full, axis=1)
    return beta_full, t_best, best_miss, best_score, converged, end_iter


def solve_zermelo(params, config: ZermeloConfig | None = None) -> ZermeloSolution:
    """Solve one instance given (x2, y2, V, A, B, C, D)."""
    start = time.perf_counter()
    beta, t_best, miss, score, conv, iters = solve_zermelo_batch(
        np.asarray(params, dtype=np.float64)[None, :], config)
    return ZermeloSolution(beta=beta[0], travel_time=float(t_best[0]),
                           miss=float(miss[0]), score=float(score[0]),
                           converged=bool(conv[0]), n_iters=int(iters[0]),
                           solve_time=time.perf_counter() - start)


def zermelo_solve(params, config: ZermeloConfig | None = None) -> tuple[Array, float]:
    """Headings and arrival time for one instance: (beta [n_grid], T).

    Thin wrapper over :func:`solve_zermelo` for callers that only need
    the control and the time.
    """
    sol = solve_zermelo(params, config)
    return sol.beta, sol.travel_time


def heading_rate_residual(beta: Array, params: Array, t_final) -> Array:
    """RMS mismatch between knot differences and the closed-form rate.

    Compares (beta[k+1] - beta[k]) / dt with the rate at the interval
    midpoint heading, averaged over all intervals; beta is [B, n_grid].
    """
    beta = np.asarray(beta, dtype=np.float64)
    single = beta.ndim == 1
    if single:
        beta = beta[None, :]
    if beta.ndim != 2 or beta.shape[1] < 2:
        raise ShapeError("beta must be [n_grid] or [B, n_grid] with n_grid >= 2")
    params = _check_params(params)
    t_final = np.atleast_1d(np.asarray(t_final, dtype=np.float64))
    dt = (t_final / (beta.shape[1] - 1))[:, None]
    diff = (beta[:, 1:] - beta[:, :-1]) / dt
    mid = 0.5 * (beta[:, 1:] + beta[:, :-1])
    rate = navigation_rate(mid, params[:, 3:4], params[:, 4:5],
                           params[:, 5:6], params[:, 6:7])
    rms = np.sqrt(np.mean((diff - rate) ** 2, axis=1))
    return rms[0] if single else rms


def zermelo_formula_residual(beta: Array, params: Array, t_final) -> Array:
    """Alias of :func:`heading_rate_residual`."""
    return heading_rate_residual(beta, params, t_final)


def best_time_score(params: Array, beta: Array, t_ref: Array,
                    rho0: float = RHO_BASE,
                    n_scan: int = 64, refine_iters: int = 60) -> Array:
    """Best achievable fixed-rho score of given headings over the arrival time.

    For each row, scans T over a bracket around t_ref and refines with a
    fixed-iteration golden-section search, so the result is a
    deterministic function of the inputs. beta is [B, n_grid]; only the
    first n_grid - 1 knots steer the rollout.
    """
    params = _check_params(params)
    beta = np.asarray(beta, dtype=np.float64)
    rows, n_grid = beta.shape
    t_ref = np.atleast_1d(np.asarray(t_ref, dtype=np.float64))

    def score_at(tv: Array) -> Array:
        states, _ = zermelo_rollout(params, beta[:, :n_grid - 1], tv, n_grid)
        err = states[:, -1] - params[:, 0:2]
        return tv + rho0 * np.sum(err * err, axis=1)

    lo = np.maximum(0.25 * t_ref, 1e-3)
    hi = 2.0 * t_ref
    grid = np.linspace(0.0, 1.0, n_scan)
    scores = np.empty((rows, n_scan))
    tvals = lo[:, None] + (hi - lo)[:, None] * grid[None, :]
    for j in range(n_scan):
        scores[:, j] = score_at(tvals[:, j])
    ibest = np.argmin(scores, axis=1)
    left = tvals[np.arange(rows), np.maximum(ibest - 1, 0)]
    right = tvals[np.arange(rows), np.minimum(ibest + 1, n_scan - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = right - invphi * (right - left)
    d = left + invphi * (right - left)
    fc = score_at(c)
    fd = score_at(d)
    for _ in range(refine_iters):
        shrink_right = fc < fd
        right = np.where(shrink_right, d, right)
        left = np.where(shrink_right, left, c)
        c_new = right - invphi * (right - left)
        d_new = left + invphi * (right - left)
        fc_keep = score_at(c_new)
        fd_keep = score_at(d_new)
        c, d, fc, fd = c_new, d_new, fc_keep, fd_keep
    t_star = 0.5 * (left + right)
    return score_at(t_star)

"""Fastest-descent curve problem: analytic cycloid and a direct optimizer.

Travel time along a height profile u(x) from (0, y1) to (span, y2) is

    T = (1 / sqrt(2 g)) * integral sqrt((1 + u'(x)^2) / (y1 - u(x))) dx.

The optimum is a cycloid x = k (theta - sin theta), u = y1 - k (1 - cos theta);
its opening angle solves (Theta - sin Theta)/(1 - cos Theta) = span/drop,
which is monotone on (0, 2 pi) and found by bisection.

The integrand is singular at the start where u -> y1, so naive
quadrature is badly biased there and, worse, an optimizer can exploit
it. The discrete functional used here is instead the exact descent time
of a bead on the polyline through the grid points: with energy speeds
v_i = sqrt(2 g (y1 - u_i)) and segment lengths L_i, each segment takes
t_i = 2 L_i / (v_i + v_{i+1}), which is finite at the start (v_0 = 0),
exact for the discrete curve class, and bounded below by the cycloid
time, so minimizing it cannot undercut the true optimum. Its bias on
sampled cycloids is about 0.1% at 100 points.

The direct optimizer parameterizes interior heights as
u_i = y1 - (w_i^2 + 1e-12), which keeps every iterate strictly below the
start height with no clamping, and runs Adam on w via reverse-mode
differentiation of the discrete time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..autodiff import GradTape
from ..errors import ConfigError, DomainError
from .direct import DirectSolverConfig

Array = np.ndarray

_W_FLOOR = 1e-12
_BISECT_ITERS = 200


@dataclass
class CycloidSolution:
    """Optimal cycloid for one geometry."""

    theta_max: float
    k: float
    travel_time: float


def brachistochrone_analytic(span: float, drop: float, g: float = 10.0) -> CycloidSolution:
    """Exact optimum for horizontal span and vertical drop, both positive."""
    if not (span > 0 and drop > 0 and g > 0):
        raise DomainError("span, drop, and g must be positive")
    target = span / drop

    def ratio(theta):
        return (theta - np.sin(theta)) / (1.0 - np.cos(theta))

    lo, hi = 1e-6, 2.0 * np.pi - 1e-6
    if target <= ratio(lo) or target >= ratio(hi):
        raise DomainError("geometry outside the cycloid family")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < target:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    k = drop / (1.0 - np.cos(theta))
    return CycloidSolution(theta_max=float(theta), k=float(k),
                           travel_time=float(theta * np.sqrt(k / g)))


def cycloid_heights(y1, y2, span: float = 2.0, g: float = 10.0,
                    n_points: int = 100) -> tuple[Array, Array]:
    """Optimal height profiles on the uniform x grid; batched over rows.

    y1, y2 are scalars or [B]; returns (heights [B, n_points], T [B]).
    The parameter angle for each grid abscissa is found by bisection on
    the monotone map x(theta), run a fixed number of iterations so the
    result is bit-reproducible.
    """
    y1 = np.atleast_1d(np.asarray(y1, dtype=np.float64))
    y2 = np.atleast_1d(np.asarray(y2, dtype=np.float64))
    if y1.shape != y2.shape or y1.ndim != 1:
        raise DomainError("y1 and y2 must be scalars or equal-length vectors")
    rows = y1.shape[0]
    theta_max = np.empty(rows)
    kk = np.empty(rows)
    tt = np.empty(rows)
    for i in range(rows):
        sol = brachistochrone_analytic(span, float(y1[i] - y2[i]), g)
        theta_max[i], kk[i], tt[i] = sol.theta_max, sol.k, sol.travel_time

    xg = np.linspace(0.0, span, n_points)
    targets = np.broadcast_to(xg[None, :], (rows, n_points))
    lo = np.zeros((rows, n_points))
    hi = np.broadcast_to(theta_max[:, None], (rows, n_points)).copy()
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        xmid = kk[:, None] * (mid - np.sin(mid))
        below = xmid < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    theta = 0.5 * (lo + hi)
    heights = y1[:, None] - kk[:, None] * (1.0 - np.cos(theta))
    heights[:, 0] = y1
    heights[:, -1] = y2
    return heights, tt


def travel_time(heights: Array, y1, y2, span: float = 2.0,
                g: float = 10.0) -> Array:
    """Exact bead-on-polyline descent time of height profiles; batched.

    Endpoints are pinned to (y1, y2) regardless of the supplied values.
    Segments at or above the start height have zero speed; a profile
    whose bead stalls mid-course yields an infinite time.
    """
    heights = np.asarray(heights, dtype=np.float64)
    single = heights.ndim == 1
    if single:
        heights = heights[None, :]
    y1 = np.broadcast_to(np.asarray(y1, dtype=np.float64), heights.shape[:1]).astype(np.float64)
    y2 = np.broadcast_to(np.asarray(y2, dtype=np.float64), heights.shape[:1]).astype(np.float64)
    u = heights.copy()
    u[:, 0] = y1
    u[:, -1] = y2
    n = u.shape[1]
    dx = span / (n - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        speed = np.sqrt(np.maximum(2.0 * g * (y1[:, None] - u), 0.0))
        seg = np.sqrt(dx * dx + np.square(u[:, 1:] - u[:, :-1]))
        total = np.sum(2.0 * seg / (speed[:, :-1] + speed[:, 1:]), axis=1)
    return total[0] if single else total


def brachistochrone_time(heights: Array, y1: float, g: float = 10.0,
                         span: float = 2.0) -> float:
    """Descent time of one sampled height profile starting at (0, y1).

    The profile must stay strictly below the start height after the
    first sample; its last sample is the end height. Thin single-curve
    wrapper over :func:`travel_time`.
    """
    heights = np.asarray(heights, dtype=np.float64)
    if heights.ndim != 1 or heights.shape[0] < 3:
        raise DomainError("need a height profile of at least 3 samples")
    if np.any(heights[1:] >= y1):
        raise DomainError("profile must stay strictly below the start height")
    return float(travel_time(heights, y1, heights[-1], span=span, g=g))


def _time_on_tape(tape: GradTape, w, y1: Array, y2: Array, span: float, g: float):
    """Polyline descent time of u = y1 - (w^2 + floor), endpoints pinned; [B] Var."""
    rows, n_int = w.value.shape
    dx = span / (n_int + 1)
    zero_col = tape.constant(np.zeros((rows, 1)))
    end_drop = (y1 - y2)[:, None]
    sq = w * w + _W_FLOOR
    # depth below the start height: 0 at the start, y1 - y2 at the end
    depth = tape.concat([zero_col, sq, tape.constant(end_drop)], axis=1)
    speed = tape.concat([zero_col, tape.sqrt(sq * (2.0 * g)),
                         tape.constant(np.sqrt(2.0 * g * end_drop))], axis=1)
    drop = depth[:, 1:] - depth[:, :-1]
    seg = tape.sqrt(drop * drop + dx * dx)
    return tape.sum(seg * 2.0 / (speed[:, :-1] + speed[:, 1:]), axis=1)


def solve_curve_batch(y1, y2, span: float = 2.0, g: float = 10.0,
                      config: DirectSolverConfig | None = None):
    """Optimize height profiles for a batch of geometries.

    Returns (heights [B, n_points], times [B], converged [B], n_iters [B]).
    Every row follows the same arithmetic it would follow alone.
    """
    cfg = config or DirectSolverConfig(n_knots=100, max_iters=2000, lr0=0.02,
                                       grad_tol=1e-9)
    y1 = np.atleast_1d(np.asarray(y1, dtype=np.float64))
    y2 = np.atleast_1d(np.asarray(y2, dtype=np.float64))
    if y1.shape != y2.shape or np.any(y1 <= y2):
        raise DomainError("need y1 > y2 for every geometry")
    rows = y1.shape[0]
    n_points = cfg.n_knots
    if n_points < 3:
        raise ConfigError("need at least 3 grid points")
    n_int = n_points - 2

    frac = np.arange(1, n_points - 1) / (n_points - 1)
    line_drop = (y1 - y2)[:, None] * frac[None, :]
    w = np.sqrt(np.maximum(line_drop - _W_FLOOR, 0.0))

    m = np.zeros_like(w)
    v = np.zeros_like(w)
    best_w = w.copy()
    best_t = np.full(rows, np.inf)
    converged = np.zeros(rows, dtype=bool)
    end_iter = np.full(rows, cfg.max_iters)
    active = np.arange(rows)

    for it in range(cfg.max_iters + 1):
        tape = GradTape()
        wvar = tape.leaf(w[active], op="w")
        t_rows = _time_on_tape(tape, wvar, y1[active], y2[active], span, g)
        tape.backward(tape.sum(t_rows))
        tvals = t_rows.value
        grad = tape.grad(wvar)
        gnorm = np.max(np.abs(grad), axis=1)

        better = tvals < best_t[active]
        rows_better = active[better]
        best_t[rows_better] = tvals[better]
        best_w[rows_better] = w[rows_better]

        done = gnorm < cfg.grad_tol
        converged[active[done]] = True
        end_iter[active[done]] = it
        if it == cfg.max_iters:
            break
        active = active[~done]
        if active.size == 0:
            break

        t = it + 1
        lr = cfg.lr0 * cfg.decay ** (it // cfg.decay_period)
        g_act = grad[~done] if done.any() else grad
        m[active] = cfg.beta1 * m[active] + (1.0 - cfg.beta1) * g_act
        v[active] = cfg.beta2 * v[active] + (1.0 - cfg.beta2) * g_act * g_act
        mhat = m[active] / (1.0 - cfg.beta1 ** t)
        vhat = v[active] / (1.0 - cfg.beta2 ** t)
        w[active] = w[active] - lr * mhat / (np.sqrt(vhat) + cfg.eps)

    heights = np.empty((rows, n_points))
    heights[:, 0] = y1
    heights[:, -1] = y2
    heights[:, 1:-1] = y1[:, None] - (best_w * best_w + _W_FLOOR)
    return heights, best_t, converged, end_iter


def solve_curve(y1: float, y2: float, span: float = 2.0, g: float = 10.0,
                config: DirectSolverConfig | None = None):
    """Single-geometry curve optimization; returns (heights, T, converged, time)."""
    start = time.perf_counter()
    heights, t_best, conv, _ = solve_curve_batch([y1], [y2], span, g, config)
    return heights[0], float(t_best[0]), bool(conv[0]), time.perf_counter() - start

"""Adaptive basis families for control-function reconstruction.

A basis has p terms: a constant plus p - 1 adaptive terms, each owning
two shape parameters, so theta has 2 (p - 1) entries. Shape parameters
are bounded to |theta| <= 0.5 by construction (0.5 tanh of a raw value).

Fourier family (1-based term j, frequency multiplier m = ceil(j / 2)):

    b_0 = 1
    b_j = sin(m pi [(1 + theta_{2j-1}) t + theta_{2j}])   for odd j
    b_j = cos(m pi [(1 + theta_{2j-1}) t + theta_{2j}])   for even j

At theta = 0 this is the fixed band-limited family {1, sin(pi t),
cos(pi t), sin(2 pi t), ...}.

Chebyshev family: term j warps the abscissa s_j = (2t - 1)(1 + theta_{2j-1})
+ theta_{2j}, hard-clipped to [-1, 1], and evaluates the degree-j
polynomial through the three-term recurrence T_0 = 1, T_1 = s,
T_j = 2 s T_{j-1} - T_{j-2}.

Times are normalized to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import GradTape, Var
from ..errors import ConfigError, ShapeError

Array = np.ndarray

BASIS_KINDS = ("fourier", "chebyshev")


@dataclass(frozen=True)
class BasisSpec:
    """Family and term count; n_theta = 2 (p - 1)."""

    kind: str = "fourier"
    p: int = 11

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ConfigError(f"unknown basis kind '{self.kind}'")
        if self.p < 1:
            raise ConfigError("basis needs at least the constant term")

    @property
    def n_theta(self) -> int:
        return 2 * (self.p - 1)


def clamp_theta(raw: Array) -> Array:
    """Map raw network outputs into the admissible box |theta| <= 0.5."""
    return 0.5 * np.tanh(raw)


def eval_basis(spec: BasisSpec, t: Array, theta: Array) -> Array:
    """Basis values; t is [N], theta is [N, n_theta]; returns [N, p]."""
    t = np.asarray(t, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if t.ndim != 1 or theta.shape != (t.shape[0], spec.n_theta):
        raise ShapeError(f"need t [N] and theta [N, {spec.n_theta}]")
    cols = [np.ones_like(t)]
    if spec.kind == "fourier":
        for j in range(1, spec.p):
            m = (j + 1) // 2
            arg = m * np.pi * ((1.0 + theta[:, 2 * j - 2]) * t + theta[:, 2 * j - 1])
            cols.append(np.sin(arg) if j % 2 == 1 else np.cos(arg))
    else:
        s_base = 2.0 * t - 1.0
        for j in range(1, spec.p):
            s = np.clip(s_base * (1.0 + theta[:, 2 * j - 2]) + theta[:, 2 * j - 1],
                        -1.0, 1.0)
            t_prev, t_cur = np.ones_like(s), s
            for _ in range(j - 1):
                t_prev, t_cur = t_cur, 2.0 * s * t_cur - t_prev
            cols.append(t_cur)
    return np.stack(cols, axis=1)


def eval_basis_tape(tape: GradTape, spec: BasisSpec, t: Array, theta: Var) -> Var:
    """Reverse-mode twin of eval_basis; t is constant, theta carries grads."""
    t = np.asarray(t, dtype=np.float64)
    n = t.shape[0]
    cols = [tape.constant(np.ones((n, 1)))]
    tcol = t[:, None]
    if spec.kind == "fourier":
        for j in range(1, spec.p):
            m = (j + 1) // 2
            arg = ((theta[:, 2 * j - 2:2 * j - 1] + 1.0) * tcol
                   + theta[:, 2 * j - 1:2 * j]) * (m * np.pi)
            cols.append(tape.sin(arg) if j % 2 == 1 else tape.cos(arg))
    else:
        s_base = 2.0 * tcol - 1.0
        for j in range(1, spec.p):
            s = tape.clip(theta[:, 2 * j - 2:2 * j - 1] * s_base + s_base
                          + theta[:, 2 * j - 1:2 * j], -1.0, 1.0)
            t_prev: Var | float = 1.0
            t_cur: Var = s
            for _ in range(j - 1):
                t_prev, t_cur = t_cur, s * t_cur * 2.0 - t_prev
            cols.append(t_cur)
    return tape.concat(cols, axis=1)


def fixed_basis_matrix(spec: BasisSpec, t: Array) -> Array:
    """Basis values at theta = 0 for a vector of times."""
    t = np.asarray(t, dtype=np.float64)
    return eval_basis(spec, t, np.zeros((t.shape[0], spec.n_theta)))


def interpolate_band_limited(t_sample: Array, values: Array, t_query: Array,
                             spec: BasisSpec | None = None) -> Array:
    """Least-squares fit of the fixed Fourier family, evaluated elsewhere.

    Functions inside the family's span are reproduced to round-off;
    out-of-band content aliases and large query errors reveal it.
    values may be [N] or [N, d].
    """
    spec = spec or BasisSpec()
    t_sample = np.asarray(t_sample, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    single = values.ndim == 1
    design = fixed_basis_matrix(spec, t_sample)
    coef, _, _, _ = np.linalg.lstsq(design, values if not single else values[:, None],
                                    rcond=None)
    out = fixed_basis_matrix(spec, np.asarray(t_query, dtype=np.float64)) @ coef
    return out[:, 0] if single else out

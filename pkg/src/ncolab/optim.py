"""Adam optimizer with a stepped learning-rate decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

Array = np.ndarray


@dataclass
class AdamState:
    """Moment accumulators plus the decay schedule.

    The effective learning rate at a given epoch is
    lr0 * decay ** floor(epoch / decay_period).
    """

    m: list[Array]
    v: list[Array]
    step: int = 0
    lr0: float = 0.01
    decay: float = 0.9
    decay_period: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: list[Array], lr0: float = 0.01, decay: float = 0.9,
                   decay_period: int = 1000, **kwargs) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   lr0=lr0, decay=decay, decay_period=decay_period, **kwargs)

    def effective_lr(self, epoch: int) -> float:
        return self.lr0 * self.decay ** (epoch // self.decay_period)


def adam_step(state: AdamState, params: list[Array], grads: list[Array],
              epoch: int = 0) -> tuple[list[Array], AdamState]:
    """One bias-corrected Adam update; purely functional.

    Returns fresh parameter and state lists; inputs are not mutated.
    A zero gradient with zero moments leaves parameters bit-identical.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("params/grads/state length mismatch")
    for k, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"entry {k}: param shape {p.shape} != grad shape {g.shape}")
    lr = state.effective_lr(epoch)
    t = state.step + 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m2 = b1 * m + (1.0 - b1) * g
        v2 = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m2 / (1.0 - b1 ** t)
        v_hat = v2 / (1.0 - b2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m2)
        new_v.append(v2)
    next_state = AdamState(m=new_m, v=new_v, step=t, lr0=state.lr0, decay=state.decay,
                           decay_period=state.decay_period, beta1=b1, beta2=b2, eps=eps)
    return new_params, next_state

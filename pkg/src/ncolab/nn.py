"""Dense feed-forward networks with paired numpy and taped forward passes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import GradTape, Var
from .errors import ShapeError

Array = np.ndarray

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass
class MlpParams:
    """Layer weights for a dense network.

    ``layers`` is a list of (weight, bias) pairs with weight shaped
    [out, in] and bias shaped [out]. ``activation`` applies to every
    layer except the last, which is always linear.
    """

    layers: list[tuple[Array, Array]]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation '{self.activation}'")
        for k, (w, b) in enumerate(self.layers):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"mlp layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k > 0 and w.shape[1] != self.layers[k - 1][0].shape[0]:
                raise ShapeError(
                    f"mlp layer {k}: input dim {w.shape[1]} != "
                    f"previous output dim {self.layers[k - 1][0].shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ShapeError(f"mlp layer {k}: non-finite entries")

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    def arrays(self) -> list[Array]:
        """Flat list [W0, b0, W1, b1, ...] referencing the live arrays."""
        out = []
        for w, b in self.layers:
            out.append(w)
            out.append(b)
        return out

    def with_arrays(self, arrays: list[Array]) -> "MlpParams":
        """New MlpParams taking weights from a flat [W0, b0, ...] list."""
        if len(arrays) != 2 * len(self.layers):
            raise ShapeError("array list length does not match layer count")
        pairs = [(arrays[2 * k], arrays[2 * k + 1]) for k in range(len(self.layers))]
        return MlpParams(pairs, self.activation)

    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)


def init_mlp(sizes: list[int], rng: np.random.Generator, activation: str = "tanh") -> MlpParams:
    """Glorot-uniform initialization: U(-r, r) with r = sqrt(6/(fan_in+fan_out))."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-r, r, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        layers.append((w, b))
    return MlpParams(layers, activation)


def _apply_activation(x: Array, activation: str) -> Array:
    if activation == "tanh":
        return np.tanh(x)
    if activation == "relu":
        return np.maximum(x, 0.0)
    return x


def mlp_forward(params: MlpParams, x: Array) -> Array:
    """Forward pass for a single input [in] or a batch [n, in].

    The last layer has no activation. Dimension mismatches raise a
    :class:`ShapeError` naming the offending layer.
    """
    x = np.asarray(x, dtype=np.float64)
    out = x
    last = len(params.layers) - 1
    for k, (w, b) in enumerate(params.layers):
        if out.shape[-1] != w.shape[1]:
            raise ShapeError(f"mlp layer {k}: input dim {out.shape[-1]} != {w.shape[1]}")
        out = out @ w.T + b
        if k != last:
            out = _apply_activation(out, params.activation)
    return out


def mlp_forward_tape(tape: GradTape, layer_vars: list[tuple[Var, Var]],
                     x: Var, activation: str) -> Var:
    """Taped twin of :func:`mlp_forward` over a batch [n, in].

    ``layer_vars`` holds (weight, bias) Vars in layer order; performs the
    same numpy operations in the same order as the plain forward pass.
    """
    out = x
    last = len(layer_vars) - 1
    for k, (w, b) in enumerate(layer_vars):
        if out.value.shape[-1] != w.value.shape[1]:
            raise ShapeError(f"mlp layer {k}: input dim {out.value.shape[-1]} != {w.value.shape[1]}")
        out = out @ _transpose(tape, w) + b
        if k != last:
            if activation == "tanh":
                out = tape.tanh(out)
            elif activation == "relu":
                out = tape.relu(out)
    return out


def _transpose(tape: GradTape, a: Var) -> Var:
    return tape._unary("transpose", a, lambda x: x.T, lambda g, x: g.T)

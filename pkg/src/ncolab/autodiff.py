"""Reverse-mode automatic differentiation on numpy arrays.

A :class:`GradTape` records every primitive as it executes. Calling
:meth:`GradTape.backward` on a scalar output walks the recording in
reverse and accumulates exact gradients for every recorded variable.
The recording also keeps each primitive's forward recipe, so
:meth:`GradTape.replay` can re-execute the whole computation and verify
bit-for-bit agreement with the recorded values.

Only the primitives this package needs are provided: affine maps,
elementwise arithmetic, tanh/relu/sin/cos/sqrt/clip, reductions,
concatenation, reshape, and basic indexing. This is deliberately not a
general autodiff framework.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError, ShapeError

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``grad`` down to ``shape``, inverting numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """One recorded array value; leaves carry parameters or inputs."""

    __slots__ = ("tape", "value", "op", "parents", "grad", "_forward", "_backward")

    def __init__(self, tape, value, op, parents, forward, backward):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = parents
        self.grad = None
        self._forward = forward
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def _lift(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return self.tape._binary("add", self, self._lift(other), lambda a, b: a + b,
                                 lambda g, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape._binary("sub", self, self._lift(other), lambda a, b: a - b,
                                 lambda g, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))

    def __rsub__(self, other):
        return self._lift(other).__sub__(self)

    def __mul__(self, other):
        return self.tape._binary("mul", self, self._lift(other), lambda a, b: a * b,
                                 lambda g, a, b: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.tape._binary("div", self, self._lift(other), lambda a, b: a / b,
                                 lambda g, a, b: (_unbroadcast(g / b, a.shape),
                                                  _unbroadcast(-g * a / (b * b), b.shape)))

    def __rtruediv__(self, other):
        return self._lift(other).__truediv__(self)

    def __neg__(self):
        return self.tape._unary("neg", self, lambda a: -a, lambda g, a: -g)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise ShapeError("pow exponent must be a plain number")
        e = float(exponent)
        return self.tape._unary("pow", self, lambda a: a ** e,
                                lambda g, a: g * e * a ** (e - 1.0))

    def __matmul__(self, other):
        other = self._lift(other)

        def backward(g, a, b):
            if a.ndim == 1 and b.ndim == 2:
                return g @ b.T, np.outer(a, g)
            if a.ndim == 2 and b.ndim == 1:
                return np.outer(g, b), a.T @ g
            return g @ b.T, a.T @ g

        return self.tape._binary("matmul", self, other, lambda a, b: a @ b, backward)

    def __getitem__(self, idx):
        def backward(g, a):
            out = np.zeros_like(a)
            np.add.at(out, idx, g)
            return out

        return self.tape._unary("getitem", self, lambda a: a[idx], backward)


class GradTape:
    """Records primitives during the forward pass; replays them in reverse.

    Parameters
    ----------
    check_finite : bool
        When True (default) every primitive output is checked and a
        :class:`NonFiniteError` naming the first offending op is raised
        as soon as a NaN or Inf appears.
    """

    def __init__(self, check_finite: bool = True):
        self.nodes: list[Var] = []
        self.check_finite = check_finite

    def _register(self, value, op, parents, forward, backward) -> Var:
        value = np.asarray(value, dtype=np.float64)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise NonFiniteError(op)
        node = Var(self, value, op, parents, forward, backward)
        self.nodes.append(node)
        return node

    def leaf(self, value, op: str = "leaf") -> Var:
        return self._register(np.array(value, dtype=np.float64, copy=True), op, (), None, None)

    def constant(self, value) -> Var:
        return self.leaf(value, op="const")

    def _unary(self, op, a: Var, forward, backward) -> Var:
        node = self._register(forward(a.value), op, (a,), forward, None)
        node._backward = lambda g: (backward(g, a.value),)
        return node

    def _binary(self, op, a: Var, b: Var, forward, backward) -> Var:
        node = self._register(forward(a.value, b.value), op, (a, b), forward, None)
        node._backward = lambda g: backward(g, a.value, b.value)
        return node

    # ---- primitives beyond operators -------------------------------------

    def tanh(self, a: Var) -> Var:
        out = self._unary("tanh", a, np.tanh, lambda g, x: g * (1.0 - np.tanh(x) ** 2))
        return out

    def relu(self, a: Var) -> Var:
        return self._unary("relu", a, lambda x: np.maximum(x, 0.0),
                           lambda g, x: g * (x > 0.0))

    def sin(self, a: Var) -> Var:
        return self._unary("sin", a, np.sin, lambda g, x: g * np.cos(x))

    def cos(self, a: Var) -> Var:
        return self._unary("cos", a, np.cos, lambda g, x: g * -np.sin(x))

    def sqrt(self, a: Var) -> Var:
        return self._unary("sqrt", a, np.sqrt, lambda g, x: g * 0.5 / np.sqrt(x))

    def clip(self, a: Var, lo: float, hi: float) -> Var:
        return self._unary("clip", a, lambda x: np.clip(x, lo, hi),
                           lambda g, x: g * ((x >= lo) & (x <= hi)))

    def sum(self, a: Var, axis=None, keepdims: bool = False) -> Var:
        def backward(g, x):
            if axis is None:
                return np.broadcast_to(g, x.shape).copy()
            gg = g if keepdims else np.expand_dims(g, axis)
            return np.broadcast_to(gg, x.shape).copy()

        return self._unary("sum", a, lambda x: np.sum(x, axis=axis, keepdims=keepdims), backward)

    def mean(self, a: Var) -> Var:
        return self._unary("mean", a, np.mean,
                           lambda g, x: np.broadcast_to(g / x.size, x.shape).copy())

    def reshape(self, a: Var, shape) -> Var:
        return self._unary("reshape", a, lambda x: np.reshape(x, shape),
                           lambda g, x: np.reshape(g, x.shape))

    def concat(self, parts: Sequence[Var], axis: int = 0) -> Var:
        parts = tuple(parts)
        sizes = [p.value.shape[axis] for p in parts]

        def forward(*values):
            return np.concatenate(values, axis=axis)

        def backward(g):
            return tuple(np.take(g, indices, axis=axis)
                         for indices in _split_indices(sizes))

        node = self._register(forward(*[p.value for p in parts]), "concat", parts, forward, None)
        node._backward = backward
        return node

    # ---- gradient and replay ----------------------------------------------

    def backward(self, out: Var) -> None:
        """Accumulate gradients of scalar ``out`` into every recorded node."""
        if out.value.size != 1:
            raise ShapeError("backward requires a scalar output")
        for node in self.nodes:
            node.grad = None
        out.grad = np.ones_like(out.value)
        for node in reversed(self.nodes):
            if node.grad is None or not node.parents:
                continue
            for parent, g in zip(node.parents, node._backward(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    def grad(self, var: Var) -> Array:
        """Gradient of the last backward() target w.r.t. ``var`` (zeros if untouched)."""
        if var.grad is None:
            return np.zeros_like(var.value)
        return var.grad

    def replay(self) -> bool:
        """Re-execute the recording and verify values bit-for-bit.

        Returns True on success; raises :class:`NonFiniteError`-free
        AssertionError naming the first mismatching op otherwise.
        """
        replayed: dict[int, Array] = {}
        for node in self.nodes:
            if not node.parents:
                replayed[id(node)] = node.value
                continue
            value = np.asarray(node._forward(*[replayed[id(p)] for p in node.parents]),
                               dtype=np.float64)
            if value.tobytes() != node.value.tobytes():
                raise AssertionError(f"replay mismatch at op '{node.op}'")
            replayed[id(node)] = value
        return True


def _split_indices(sizes: list[int]):
    start = 0
    for s in sizes:
        yield np.arange(start, start + s)
        start += s


def value_and_grad(f: Callable, params) -> tuple[float, Array | list[Array]]:
    """Evaluate a recorded scalar function and its exact gradient.

    ``f(tape, vars)`` must build its computation through ``tape`` and
    return a scalar :class:`Var`. ``params`` is a single array or a list
    of arrays; the returned gradient matches that structure.
    """
    single = not isinstance(params, (list, tuple))
    arrays = [params] if single else list(params)
    tape = GradTape()
    leaves = [tape.leaf(a) for a in arrays]
    out = f(tape, leaves[0] if single else leaves)
    tape.backward(out)
    grads = [tape.grad(leaf) for leaf in leaves]
    value = float(out.value)
    return (value, grads[0]) if single else (value, grads)


def finite_diff_grad(f: Callable, params, h: float = 1e-5) -> Array | list[Array]:
    """Central-difference gradient oracle: (f(p+h e_i) - f(p-h e_i)) / 2h.

    Takes the same recorded-function contract as :func:`value_and_grad`
    so both can be pointed at the identical computation. Test oracle
    only; cost grows linearly with the parameter count.
    """
    single = not isinstance(params, (list, tuple))
    arrays = [np.array(p, dtype=np.float64) for p in ([params] if single else params)]

    def evaluate(probe: list[Array]) -> float:
        tape = GradTape()
        leaves = [tape.leaf(a) for a in probe]
        out = f(tape, leaves[0] if single else leaves)
        return float(out.value)

    grads = []
    for i, base in enumerate(arrays):
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            hi = evaluate(arrays)
            flat[j] = keep - h
            lo = evaluate(arrays)
            flat[j] = keep
            gflat[j] = (hi - lo) / (2.0 * h)
        grads.append(g)
    return grads[0] if single else grads

"""Instance-to-control operator architectures.

All four architectures map (instance features e, normalized time t) to a
control vector u(t):

* ``nasm``  — a coefficient network reads [e; t] and emits both p
  spectral coefficients per control dimension and the 2(p-1) basis shape
  parameters; the control is the aggregated coefficient-basis product.
  Shape parameters pass through 0.5 tanh so |theta| <= 0.5 always holds.
* ``sno``   — a static coefficient network reads e alone and the basis
  is fixed (theta = 0); otherwise identical to ``nasm`` with sum
  aggregation. Setting every time-column and theta-head weight of an
  ``nasm`` to zero reproduces an ``sno`` output bit-for-bit.
* ``don``   — per-control-dimension inner product between a branch
  network over e and a trunk network over t.
* ``mlp``   — a plain network over [e; t].

Aggregation for ``nasm`` is either ``sum`` (plain coefficient-basis dot
product) or ``neural`` (a small shared network maps the p per-term
products of each control dimension to its output).

Dense layers here accumulate dot products in fixed input order (einsum,
not BLAS matmul) so that architecture embeddings are bitwise exact; the
taped training path mirrors the structure with matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import GradTape, Var
from ..envs import ENV_DIMS, ENV_IDS
from ..errors import ConfigError, ShapeError
from ..nn import MlpParams, init_mlp
from .basis import BasisSpec, clamp_theta, eval_basis, eval_basis_tape
from .encoder import EncoderSpec, encode

Array = np.ndarray

ARCHITECTURES = ("nasm", "sno", "don", "mlp")
AGGREGATIONS = ("sum", "neural")

# Serialization and trainable-parameter order for the named sub-networks.
NET_ORDER = ("coef", "branch", "trunk", "net", "agg")

# Coefficient-network hidden width per environment (two hidden layers).
HIDDEN_WIDTHS = {
    "pendulum": 40,
    "robot_arm": 24,
    "cartpole": 41,
    "quadrotor": 80,
    "rocket": 72,
    "brachistochrone": 40,
    "zermelo": 54,
}

DON_LATENT = 11
AGG_HIDDEN = 16


@dataclass
class OperatorModel:
    """One trained (or initialized) operator: architecture + weights."""

    arch: str
    env_id: str
    d_u: int
    encoder: EncoderSpec
    nets: dict[str, MlpParams]
    basis: BasisSpec | None = None
    aggregation: str = "sum"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture '{self.arch}'")
        if self.env_id not in ENV_IDS:
            raise ConfigError(f"unknown environment '{self.env_id}'")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation '{self.aggregation}'")
        if self.arch in ("nasm", "sno") and self.basis is None:
            raise ConfigError(f"'{self.arch}' requires a basis spec")
        if self.aggregation == "neural" and "agg" not in self.nets:
            raise ConfigError("neural aggregation requires an 'agg' network")

    def net_names(self) -> tuple[str, ...]:
        return tuple(n for n in NET_ORDER if n in self.nets)

    def trainable_arrays(self) -> list[Array]:
        """Live parameter arrays in fixed (net, layer) order."""
        out: list[Array] = []
        for name in self.net_names():
            out.extend(self.nets[name].arrays())
        return out

    def with_arrays(self, arrays: list[Array]) -> "OperatorModel":
        nets = {}
        k = 0
        for name in self.net_names():
            n = 2 * len(self.nets[name].layers)
            nets[name] = self.nets[name].with_arrays(arrays[k:k + n])
            k += n
        if k != len(arrays):
            raise ShapeError("array list does not match the model's layer count")
        return OperatorModel(self.arch, self.env_id, self.d_u, self.encoder,
                             nets, self.basis, self.aggregation, dict(self.meta))

    def param_count(self) -> int:
        return sum(p.param_count() for p in self.nets.values())


def _net_sizes(arch: str, d_e: int, d_u: int, width: int, spec: BasisSpec | None,
               aggregation: str) -> dict[str, list[int]]:
    if arch == "nasm":
        sizes = {"coef": [d_e + 1, width, width, d_u * spec.p + spec.n_theta]}
        if aggregation == "neural":
            sizes["agg"] = [spec.p, AGG_HIDDEN, 1]
        return sizes
    if arch == "sno":
        return {"coef": [d_e, width, width, d_u * spec.p]}
    if arch == "don":
        return {"branch": [d_e, width, width, d_u * DON_LATENT],
                "trunk": [1, width, width, DON_LATENT]}
    return {"net": [d_e + 1, width, width, d_u]}


def make_model(arch: str, env_id: str, encoder: EncoderSpec,
               rng: np.random.Generator, *, width: int | None = None,
               basis: BasisSpec | None = None,
               aggregation: str = "sum") -> OperatorModel:
    """Initialize an operator with per-environment default hidden width.

    Sub-networks are drawn from ``rng`` in fixed name order, so one seed
    fully determines the initialization.
    """
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture '{arch}'")
    if env_id not in ENV_IDS:
        raise ConfigError(f"unknown environment '{env_id}'")
    if aggregation == "neural" and arch != "nasm":
        raise ConfigError("neural aggregation applies to 'nasm' only")
    d_u = ENV_DIMS[env_id][0]
    width = width if width is not None else HIDDEN_WIDTHS[env_id]
    spec = None
    if arch in ("nasm", "sno"):
        spec = basis if basis is not None else BasisSpec()
    sizes = _net_sizes(arch, encoder.dim, d_u, width, spec, aggregation)
    nets = {name: init_mlp(sizes[name], rng) for name in NET_ORDER if name in sizes}
    return OperatorModel(arch=arch, env_id=env_id, d_u=d_u, encoder=encoder,
                         nets=nets, basis=spec, aggregation=aggregation)


# ---- numpy forward ---------------------------------------------------------


def _dense(params: MlpParams, x: Array) -> Array:
    """Dense forward with fixed-order accumulation over the input index.

    einsum walks the contraction sequentially, so appending an input
    column with all-zero weights leaves every output bit unchanged —
    the property the architecture-embedding checks rely on.
    """
    out = x
    last = len(params.layers) - 1
    for k, (w, b) in enumerate(params.layers):
        if out.shape[-1] != w.shape[1]:
            raise ShapeError(f"dense layer {k}: input dim {out.shape[-1]} != {w.shape[1]}")
        out = np.einsum("ni,oi->no", out, w) + b
        if k != last:
            out = np.tanh(out)
    return out


def _check_inputs(model: OperatorModel, features: Array, t: Array) -> tuple[Array, Array]:
    features = np.asarray(features, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if features.ndim != 2 or t.ndim != 1 or features.shape[0] != t.shape[0]:
        raise ShapeError("need features [N, dim] and times [N]")
    return features, t


def operator_forward(model: OperatorModel, features: Array, t: Array) -> Array:
    """Predict controls for N (instance, time) query pairs.

    ``features`` are raw instance features [N, dim]; ``t`` holds
    normalized times in [0, 1]. Returns [N, d_u].
    """
    features, t = _check_inputs(model, features, t)
    return _forward_encoded(model, encode(model.encoder, features), t)


def _forward_encoded(model: OperatorModel, e: Array, t: Array) -> Array:
    """Forward pass on already-normalized features e [N, dim], t [N]."""
    n = e.shape[0]
    if model.arch in ("nasm", "sno"):
        spec = model.basis
        if model.arch == "nasm":
            raw = _dense(model.nets["coef"], np.concatenate([e, t[:, None]], axis=1))
            coefs = raw[:, :model.d_u * spec.p]
            theta = clamp_theta(raw[:, model.d_u * spec.p:])
        else:
            coefs = _dense(model.nets["coef"], e)
            theta = np.zeros((n, spec.n_theta))
        basis = eval_basis(spec, t, theta)
        prods = coefs.reshape(n, model.d_u, spec.p) * basis[:, None, :]
        if model.aggregation == "neural":
            return _dense(model.nets["agg"],
                          prods.reshape(n * model.d_u, spec.p)).reshape(n, model.d_u)
        return prods.sum(axis=2)
    if model.arch == "don":
        branch = _dense(model.nets["branch"], e)
        trunk = _dense(model.nets["trunk"], t[:, None])
        latent = trunk.shape[1]
        return (branch.reshape(n, model.d_u, latent) * trunk[:, None, :]).sum(axis=2)
    return _dense(model.nets["net"], np.concatenate([e, t[:, None]], axis=1))


def predict_control(model: OperatorModel, features: Array, t: Array) -> Array:
    """Controls for ONE instance at many times: features [dim], t [M]."""
    features = np.asarray(features, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    tiled = np.broadcast_to(features, (t.shape[0], features.shape[0]))
    return operator_forward(model, tiled, t)


def _forward_from_encoded(model: OperatorModel, e: Array, t) -> Array:
    """One encoded instance e [dim] at scalar or vector times."""
    e = np.asarray(e, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if e.ndim != 1 or e.shape[0] != model.encoder.dim:
        raise ShapeError(f"expected an encoded vector of length {model.encoder.dim}")
    scalar = t.ndim == 0
    t1 = np.atleast_1d(t)
    # materialized (not stride-0 broadcast) rows keep einsum results
    # bit-identical across batch sizes
    tiled = np.repeat(e[None, :], t1.shape[0], axis=0)
    out = _forward_encoded(model, tiled, t1)
    return out[0] if scalar else out


def nasm_forward(model: OperatorModel, e: Array, t) -> Array:
    """Adaptive-basis control prediction from an encoded feature vector.

    ``t`` is a normalized time (scalar -> [d_u]) or a vector of times
    (-> [M, d_u]).
    """
    if model.arch != "nasm":
        raise ConfigError(f"model architecture is '{model.arch}', not 'nasm'")
    return _forward_from_encoded(model, e, t)


def baseline_forward(model: OperatorModel, e: Array, t) -> Array:
    """Baseline-architecture twin of :func:`nasm_forward`."""
    if model.arch == "nasm":
        raise ConfigError("model is an adaptive-basis operator; use nasm_forward")
    return _forward_from_encoded(model, e, t)


# ---- taped forward (training path) -----------------------------------------


def net_leaves(tape: GradTape, model: OperatorModel) -> dict[str, list[tuple[Var, Var]]]:
    """Register every parameter array as a tape leaf, keyed by net name."""
    out: dict[str, list[tuple[Var, Var]]] = {}
    for name in model.net_names():
        out[name] = [(tape.leaf(w), tape.leaf(b)) for w, b in model.nets[name].layers]
    return out


def _dense_tape(tape: GradTape, layer_vars: list[tuple[Var, Var]], x: Var) -> Var:
    out = x
    last = len(layer_vars) - 1
    for k, (w, b) in enumerate(layer_vars):
        out = out @ _transpose(tape, w) + b
        if k != last:
            out = tape.tanh(out)
    return out


def _transpose(tape: GradTape, a: Var) -> Var:
    return tape._unary("transpose", a, lambda x: x.T, lambda g, x: g.T)


def operator_forward_tape(tape: GradTape, model: OperatorModel,
                          leaves: dict[str, list[tuple[Var, Var]]],
                          features: Array, t: Array) -> Var:
    """Taped twin of :func:`operator_forward` for the same query batch.

    Inputs are constants; only the parameter leaves carry gradients.
    """
    features, t = _check_inputs(model, features, t)
    e = encode(model.encoder, features)
    n = e.shape[0]
    if model.arch in ("nasm", "sno"):
        spec = model.basis
        if model.arch == "nasm":
            inp = tape.constant(np.concatenate([e, t[:, None]], axis=1))
            raw = _dense_tape(tape, leaves["coef"], inp)
            coefs = raw[:, :model.d_u * spec.p]
            theta = tape.tanh(raw[:, model.d_u * spec.p:]) * 0.5
            basis = eval_basis_tape(tape, spec, t, theta)
        else:
            coefs = _dense_tape(tape, leaves["coef"], tape.constant(e))
            basis = tape.constant(eval_basis(spec, t, np.zeros((n, spec.n_theta))))
        prods = tape.reshape(coefs, (n, model.d_u, spec.p)) \
            * tape.reshape(basis, (n, 1, spec.p))
        if model.aggregation == "neural":
            flat = _dense_tape(tape, leaves["agg"],
                               tape.reshape(prods, (n * model.d_u, spec.p)))
            return tape.reshape(flat, (n, model.d_u))
        return tape.sum(prods, axis=2)
    if model.arch == "don":
        branch = _dense_tape(tape, leaves["branch"], tape.constant(e))
        trunk = _dense_tape(tape, leaves["trunk"], tape.constant(t[:, None]))
        latent = trunk.value.shape[1]
        prods = tape.reshape(branch, (n, model.d_u, latent)) \
            * tape.reshape(trunk, (n, 1, latent))
        return tape.sum(prods, axis=2)
    inp = tape.constant(np.concatenate([e, t[:, None]], axis=1))
    return _dense_tape(tape, leaves["net"], inp)


# ---- fine-tuning freeze masks ----------------------------------------------


def freeze_masks(model: OperatorModel) -> list[Array]:
    """Per-array boolean masks (True = trainable) for fine-tuning.

    Fine-tuning freezes whatever fixes the learned function basis:
    the theta head of an ``nasm`` coefficient network (the output-layer
    rows that emit basis shape parameters) and the whole trunk of a
    ``don``. ``sno`` and ``mlp`` have no basis-owning parameters.
    Encoder normalization constants are not parameters and are always
    frozen by construction.
    """
    masks: list[Array] = []
    for name in model.net_names():
        params = model.nets[name]
        for k, (w, b) in enumerate(params.layers):
            wm = np.ones_like(w, dtype=bool)
            bm = np.ones_like(b, dtype=bool)
            if name == "trunk":
                wm[:] = False
                bm[:] = False
            if (model.arch == "nasm" and name == "coef"
                    and k == len(params.layers) - 1):
                head = model.d_u * model.basis.p
                wm[head:, :] = False
                bm[head:] = False
            masks.append(wm)
            masks.append(bm)
    return masks

"""Training and fine-tuning loops for operator models.

Each epoch takes one Adam step on the mean squared error between
predicted and ground-truth controls over a fresh query batch: up to
``batch_instances`` instances (all of them when the dataset is smaller)
with ``queries_per_instance`` time points drawn per instance without
replacement from the label grid. The learning rate follows the stepped
schedule lr0 * decay^(epoch // period).

Fine-tuning is the same loop with a fresh optimizer, a constant
learning rate, and the model's basis-owning parameters frozen:
gradients are masked before the step and the frozen entries are
restored bit-for-bit afterwards. Encoder normalization constants are
not parameters anywhere, so they can never drift.

All randomness (batch schedule, query times) comes from one generator
seeded by (seed, 3, 1); model initialization uses (seed, 3, 0). With a
fixed seed the whole loop is reproducible to the bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import GradTape
from .datagen import DOMAIN_MODEL
from .errors import ConfigError, ShapeError
from .operator import (BasisSpec, OperatorModel, default_fields, fit_encoder,
                       freeze_masks, make_model, net_leaves, operator_forward,
                       operator_forward_tape, record_features)
from .optim import AdamState, adam_step

Array = np.ndarray


@dataclass
class TrainConfig:
    """Epoch count, batch shape, and learning-rate schedule."""

    epochs: int = 2000
    lr0: float = 0.01
    lr_decay: float = 0.9
    lr_decay_period: int = 1000
    batch_instances: int = 10000
    queries_per_instance: int = 10
    seed: int = 0
    val_every: int = 0  # 0 disables periodic validation

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.batch_instances < 1 or self.queries_per_instance < 1:
            raise ConfigError("batch sizes must be at least 1")


def finetune_config(base: TrainConfig) -> TrainConfig:
    """Fine-tuning schedule: a fifth of the epochs at a flat 0.001 rate."""
    return replace(base, epochs=max(1, base.epochs // 5), lr0=0.001, lr_decay=1.0)


@dataclass
class TrainResult:
    model: OperatorModel
    losses: list[float] = field(default_factory=list)
    validation: list[tuple[int, float]] = field(default_factory=list)
    train_time: float = 0.0


def init_rng(seed: int) -> np.random.Generator:
    """Model-initialization stream."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), DOMAIN_MODEL, 0)))


def batch_rng(seed: int) -> np.random.Generator:
    """Batch/query-schedule stream."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), DOMAIN_MODEL, 1)))


def build_model(arch: str, env_id: str, records: list[dict], seed: int, *,
                width: int | None = None, basis: BasisSpec | None = None,
                aggregation: str = "sum",
                fields: tuple[str, ...] | None = None) -> OperatorModel:
    """Initialize a model whose encoder is fitted on the given records."""
    fields = tuple(fields) if fields is not None else default_fields(env_id)
    feats = np.stack([record_features(fields, r) for r in records])
    encoder = fit_encoder(env_id, feats, fields)
    return make_model(arch, env_id, encoder, init_rng(seed), width=width,
                      basis=basis, aggregation=aggregation)


def _label_arrays(model: OperatorModel, records: list[dict]):
    if not records:
        raise ConfigError("cannot train on an empty dataset")
    feats = np.stack([record_features(model.encoder.fields, r) for r in records])
    labels = np.array([r["u_star"] for r in records], dtype=np.float64)
    if labels.ndim != 3 or labels.shape[2] != model.d_u:
        raise ShapeError(f"labels must be [n, grid, {model.d_u}]")
    n_grid = labels.shape[1]
    t_grid = np.linspace(0.0, 1.0, n_grid)
    return feats, labels, t_grid


def _epoch_batch(rng: np.random.Generator, feats: Array, labels: Array,
                 t_grid: Array, config: TrainConfig):
    n = feats.shape[0]
    q = min(config.queries_per_instance, t_grid.shape[0])
    if n > config.batch_instances:
        idx = rng.choice(n, size=config.batch_instances, replace=False)
    else:
        idx = np.arange(n)
    # Uniform q-subsets without replacement, one independent draw per row.
    qidx = rng.random((idx.shape[0], t_grid.shape[0])).argsort(axis=1)[:, :q]
    x = np.repeat(feats[idx], q, axis=0)
    t = t_grid[qidx].reshape(-1)
    y = labels[idx[:, None], qidx].reshape(-1, labels.shape[2])
    return x, t, y


def validation_mse(model: OperatorModel, records: list[dict]) -> float:
    """Mean squared control error over every grid point of every record."""
    feats, labels, t_grid = _label_arrays(model, records)
    n, n_grid, d_u = labels.shape
    x = np.repeat(feats, n_grid, axis=0)
    t = np.tile(t_grid, n)
    pred = operator_forward(model, x, t)
    diff = pred - labels.reshape(-1, d_u)
    return float(np.sum(diff * diff) / diff.shape[0])


def _run_loop(model: OperatorModel, records: list[dict], config: TrainConfig,
              validation_records: list[dict] | None,
              masks: list[Array] | None) -> TrainResult:
    start = time.perf_counter()
    feats, labels, t_grid = _label_arrays(model, records)
    rng = batch_rng(config.seed)
    arrays = [a.copy() for a in model.trainable_arrays()]
    state = AdamState.zeros_like(arrays, lr0=config.lr0, decay=config.lr_decay,
                                 decay_period=config.lr_decay_period)
    losses: list[float] = []
    validation: list[tuple[int, float]] = []
    current = model.with_arrays(arrays)

    for epoch in range(config.epochs):
        x, t, y = _epoch_batch(rng, feats, labels, t_grid, config)
        tape = GradTape()
        leaves = net_leaves(tape, current)
        pred = operator_forward_tape(tape, current, leaves, x, t)
        diff = pred - tape.constant(y)
        loss = tape.sum(diff * diff) * (1.0 / y.shape[0])
        tape.backward(loss)
        flat_leaves = [v for name in current.net_names()
                       for pair in leaves[name] for v in pair]
        grads = [tape.grad(v) for v in flat_leaves]
        if masks is not None:
            grads = [g * mk for g, mk in zip(grads, masks)]
        new_arrays, state = adam_step(state, arrays, grads, epoch=epoch)
        if masks is not None:
            for new, old, mk in zip(new_arrays, arrays, masks):
                new[~mk] = old[~mk]
        arrays = new_arrays
        current = current.with_arrays(arrays)
        losses.append(float(loss.value))
        if (validation_records and config.val_every
                and (epoch + 1) % config.val_every == 0):
            validation.append((epoch + 1, validation_mse(current, validation_records)))

    if validation_records:
        validation.append((config.epochs, validation_mse(current, validation_records)))
    return TrainResult(model=current, losses=losses, validation=validation,
                       train_time=time.perf_counter() - start)


def train(model: OperatorModel, records: list[dict], config: TrainConfig,
          validation_records: list[dict] | None = None) -> TrainResult:
    """Fit all trainable parameters; returns the trained model and history."""
    return _run_loop(model, records, config, validation_records, masks=None)


def finetune(model: OperatorModel, records: list[dict], config: TrainConfig,
             validation_records: list[dict] | None = None) -> TrainResult:
    """Adapt a trained model to new data with its basis parameters frozen.

    Uses a fresh optimizer. Frozen entries (see
    :func:`ncolab.operator.freeze_masks`) receive zero gradient and are
    restored after every step, so they survive bit-for-bit.
    """
    return _run_loop(model, records, config, validation_records,
                     masks=freeze_masks(model))

"""Instance encoding: which fields describe an instance, and their scaling.

The operator consumes a flat feature vector per instance. Which instance
fields enter the vector is a per-environment choice: time-domain
environments are identified by their goal state, the curve-descent
environment by its start/end heights, and the crossing environment by
its target point together with the five flow-field constants.

Normalization constants (mean and standard deviation per feature) are
fitted once on a training set and then frozen; they are plain stored
constants, never trainable parameters, and fine-tuning must not refit
them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import ENV_IDS, SYNTHETIC_ENV_IDS, OcpInstance
from ..errors import ConfigError, ShapeError

Array = np.ndarray

_STD_FLOOR = 1e-8

ZERMELO_CONSTANT_FIELDS = ("V", "A", "B", "C", "D")


def default_fields(env_id: str) -> tuple[str, ...]:
    """Feature fields for an environment, in encoding order.

    A field is an instance attribute name ("x_goal", "x_init") or
    "constants:<name>" for one named environment constant.
    """
    if env_id in SYNTHETIC_ENV_IDS:
        return ("x_goal",)
    if env_id == "brachistochrone":
        return ("x_init", "x_goal")
    if env_id == "zermelo":
        return ("x_goal",) + tuple(f"constants:{c}" for c in ZERMELO_CONSTANT_FIELDS)
    raise ConfigError(f"unknown environment '{env_id}'")


@dataclass(frozen=True)
class EncoderSpec:
    """Field list plus frozen normalization constants."""

    env_id: str
    fields: tuple[str, ...]
    mean: Array
    std: Array

    def __post_init__(self):
        if self.env_id not in ENV_IDS:
            raise ConfigError(f"unknown environment '{self.env_id}'")
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.ndim != 1 or mean.shape != std.shape:
            raise ShapeError("encoder mean and std must be equal-length vectors")
        if np.any(std <= 0):
            raise ConfigError("encoder std entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _field_values(field: str, x_init, x_goal, constants) -> list[float]:
    if field == "x_goal":
        return [float(v) for v in np.atleast_1d(x_goal)]
    if field == "x_init":
        return [float(v) for v in np.atleast_1d(x_init)]
    if field.startswith("constants:"):
        name = field.split(":", 1)[1]
        if name not in constants:
            raise ConfigError(f"environment constant '{name}' not present")
        return [float(constants[name])]
    raise ConfigError(f"unknown encoder field '{field}'")


def instance_features(fields: tuple[str, ...], instance: OcpInstance) -> Array:
    """Raw (unnormalized) feature vector for one instance."""
    vals: list[float] = []
    for field in fields:
        vals.extend(_field_values(field, instance.x_init, instance.cost.x_goal,
                                  instance.env.constants))
    return np.array(vals, dtype=np.float64)


def record_features(fields: tuple[str, ...], record: dict) -> Array:
    """Raw feature vector from a dataset record (parsed JSON object)."""
    vals: list[float] = []
    for field in fields:
        vals.extend(_field_values(field, record["x_init"], record["x_goal"],
                                  record.get("constants", {})))
    return np.array(vals, dtype=np.float64)


def fit_encoder(env_id: str, features: Array,
                fields: tuple[str, ...] | None = None) -> EncoderSpec:
    """Freeze per-feature mean/std from a matrix of raw training features.

    Standard deviations are floored at 1e-8 so constant features stay
    well-defined.
    """
    fields = tuple(fields) if fields is not None else default_fields(env_id)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError("feature matrix must be [n, dim]")
    mean = features.mean(axis=0)
    std = np.maximum(features.std(axis=0), _STD_FLOOR)
    return EncoderSpec(env_id=env_id, fields=fields, mean=mean, std=std)


def identity_encoder(env_id: str, dim: int,
                     fields: tuple[str, ...] | None = None) -> EncoderSpec:
    """Encoder with zero mean and unit scale (no data required)."""
    fields = tuple(fields) if fields is not None else default_fields(env_id)
    return EncoderSpec(env_id=env_id, fields=fields,
                       mean=np.zeros(dim), std=np.ones(dim))


def encode(spec: EncoderSpec, features: Array) -> Array:
    """Normalize raw features: (x - mean) / std. Accepts [dim] or [n, dim]."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != spec.dim:
        raise ShapeError(f"expected {spec.dim} features, got {features.shape[-1]}")
    return (features - spec.mean) / spec.std


def encode_instance(instance: OcpInstance, spec: EncoderSpec) -> Array:
    """Normalized feature vector for one problem instance."""
    return encode(spec, instance_features(spec.fields, instance))

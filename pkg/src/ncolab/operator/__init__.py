"""Operator models that map problem instances to optimal-control functions."""

from .basis import (BASIS_KINDS, BasisSpec, clamp_theta, eval_basis,
                    eval_basis_tape, fixed_basis_matrix, interpolate_band_limited)
from .encoder import (ZERMELO_CONSTANT_FIELDS, EncoderSpec, default_fields, encode,
                      encode_instance, fit_encoder, identity_encoder,
                      instance_features, record_features)
from .models import (AGG_HIDDEN, AGGREGATIONS, ARCHITECTURES, DON_LATENT,
                     HIDDEN_WIDTHS, NET_ORDER, OperatorModel, baseline_forward,
                     freeze_masks, make_model, nasm_forward, net_leaves,
                     operator_forward, operator_forward_tape, predict_control)

__all__ = [
    "BASIS_KINDS", "BasisSpec", "clamp_theta", "eval_basis", "eval_basis_tape",
    "fixed_basis_matrix", "interpolate_band_limited",
    "ZERMELO_CONSTANT_FIELDS", "EncoderSpec", "default_fields", "encode",
    "encode_instance", "fit_encoder", "identity_encoder", "instance_features",
    "record_features",
    "AGG_HIDDEN", "AGGREGATIONS", "ARCHITECTURES", "DON_LATENT", "HIDDEN_WIDTHS",
    "NET_ORDER", "OperatorModel", "baseline_forward", "freeze_masks",
    "make_model", "nasm_forward", "net_leaves", "operator_forward",
    "operator_forward_tape", "predict_control",
]

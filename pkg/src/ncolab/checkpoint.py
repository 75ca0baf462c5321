"""Model checkpoints: a flat binary weight file plus a JSON sidecar.

``<stem>.bin`` holds every trainable array concatenated in the model's
fixed (net, layer, weight-then-bias) order as little-endian float64.
``<stem>.json`` describes how to cut that buffer back into a model:
architecture, layer sizes, basis and encoder constants, and the SHA-256
of the binary payload for integrity checking. Sidecars are written with
sorted keys and no timestamps, so identical models produce identical
files.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import DataFormatError, SchemaError
from .nn import ACTIVATIONS, MlpParams
from .operator import NET_ORDER, BasisSpec, EncoderSpec, OperatorModel

Array = np.ndarray

SCHEMA = "ncolab-checkpoint-v1"


def _paths(path: str) -> tuple[str, str]:
    stem = path[:-5] if path.endswith(".json") else path
    stem = stem[:-4] if stem.endswith(".bin") else stem
    return stem + ".json", stem + ".bin"


def _net_sizes(params: MlpParams) -> list[int]:
    return [params.layers[0][0].shape[1]] + [w.shape[0] for w, _ in params.layers]


def save_model(model: OperatorModel, path: str) -> tuple[str, str]:
    """Write ``<stem>.json`` and ``<stem>.bin``; returns both paths."""
    json_path, bin_path = _paths(path)
    flat = np.concatenate([a.reshape(-1) for a in model.trainable_arrays()])
    payload = flat.astype("<f8").tobytes()
    sidecar = {
        "schema": SCHEMA,
        "arch": model.arch,
        "env_id": model.env_id,
        "d_u": model.d_u,
        "aggregation": model.aggregation,
        "basis": None if model.basis is None else {"kind": model.basis.kind,
                                                   "p": model.basis.p},
        "encoder": {
            "env_id": model.encoder.env_id,
            "fields": list(model.encoder.fields),
            "mean": [float(v) for v in model.encoder.mean],
            "std": [float(v) for v in model.encoder.std],
        },
        "nets": {name: {"sizes": _net_sizes(model.nets[name]),
                        "activation": model.nets[name].activation}
                 for name in model.net_names()},
        "param_count": model.param_count(),
        "bin_sha256": hashlib.sha256(payload).hexdigest(),
        "meta": model.meta,
    }
    text = json.dumps(sidecar, sort_keys=True, allow_nan=False, indent=1) + "\n"
    os.makedirs(os.path.dirname(os.path.abspath(bin_path)), exist_ok=True)
    with open(bin_path, "wb") as fh:
        fh.write(payload)
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return json_path, bin_path


def _require(sidecar: dict, key: str):
    if key not in sidecar:
        raise SchemaError(f"checkpoint sidecar is missing '{key}'")
    return sidecar[key]


def load_model(path: str) -> OperatorModel:
    """Rebuild a model from its sidecar/binary pair, verifying integrity."""
    json_path, bin_path = _paths(path)
    try:
        with open(json_path, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except OSError as exc:
        raise DataFormatError(0, f"cannot read checkpoint sidecar: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(exc.lineno, f"checkpoint sidecar is not JSON: {exc.msg}") from exc
    if _require(sidecar, "schema") != SCHEMA:
        raise SchemaError(f"unsupported checkpoint schema '{sidecar['schema']}'")

    try:
        with open(bin_path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise DataFormatError(0, f"cannot read checkpoint weights: {exc}") from exc
    digest = hashlib.sha256(payload).hexdigest()
    if digest != _require(sidecar, "bin_sha256"):
        raise SchemaError("checkpoint weight file does not match its recorded digest")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)

    enc_raw = _require(sidecar, "encoder")
    encoder = EncoderSpec(env_id=enc_raw["env_id"], fields=tuple(enc_raw["fields"]),
                          mean=np.array(enc_raw["mean"], dtype=np.float64),
                          std=np.array(enc_raw["std"], dtype=np.float64))
    basis_raw = _require(sidecar, "basis")
    basis = None if basis_raw is None else BasisSpec(kind=basis_raw["kind"],
                                                     p=int(basis_raw["p"]))

    # The sidecar sorts keys alphabetically; the binary layout follows the
    # model's fixed net order, so cut the buffer in that order.
    nets_raw = _require(sidecar, "nets")
    unknown = set(nets_raw) - set(NET_ORDER)
    if unknown:
        raise SchemaError(f"checkpoint has unknown nets {sorted(unknown)}")
    nets: dict[str, MlpParams] = {}
    offset = 0
    for name in (n for n in NET_ORDER if n in nets_raw):
        info = nets_raw[name]
        sizes = [int(s) for s in info["sizes"]]
        activation = info["activation"]
        if activation not in ACTIVATIONS:
            raise SchemaError(f"checkpoint net '{name}' has unknown activation")
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            need = fan_out * fan_in + fan_out
            if offset + need > flat.size:
                raise SchemaError("checkpoint weight file is shorter than its layer sizes")
            w = flat[offset:offset + fan_out * fan_in].reshape(fan_out, fan_in).copy()
            offset += fan_out * fan_in
            b = flat[offset:offset + fan_out].copy()
            offset += fan_out
            layers.append((w, b))
        nets[name] = MlpParams(layers, activation)
    if offset != flat.size:
        raise SchemaError("checkpoint weight file is longer than its layer sizes")

    model = OperatorModel(arch=_require(sidecar, "arch"),
                          env_id=_require(sidecar, "env_id"),
                          d_u=int(_require(sidecar, "d_u")),
                          encoder=encoder, nets=nets, basis=basis,
                          aggregation=sidecar.get("aggregation", "sum"),
                          meta=sidecar.get("meta", {}))
    if model.param_count() != int(_require(sidecar, "param_count")):
        raise SchemaError("checkpoint parameter count disagrees with its sidecar")
    return model

"""INI run configuration shared by the command-line tools.

A config file supplies defaults for the command-line options; explicit
flags always win. Sections and keys:

    [run]    env, arch, seed
    [data]   n_train, n_benchmark, label, mode, chunk_size, n_grid
    [train]  epochs, lr0, lr_decay, lr_decay_period, batch_instances,
             queries_per_instance, val_every
    [model]  width, basis, p, aggregation

Seed precedence: --seed flag, then [run] seed, then the NCOLAB_SEED
environment variable, then 0.
"""

from __future__ import annotations

import configparser
import os

from .errors import ConfigError

SEED_ENV_VAR = "NCOLAB_SEED"

# key -> (section, parser)
_SCHEMA: dict[str, tuple[str, type]] = {
    "env": ("run", str),
    "arch": ("run", str),
    "seed": ("run", int),
    "n_train": ("data", int),
    "n_benchmark": ("data", int),
    "label": ("data", str),
    "mode": ("data", str),
    "chunk_size": ("data", int),
    "n_grid": ("data", int),
    "epochs": ("train", int),
    "lr0": ("train", float),
    "lr_decay": ("train", float),
    "lr_decay_period": ("train", int),
    "batch_instances": ("train", int),
    "queries_per_instance": ("train", int),
    "val_every": ("train", int),
    "width": ("model", int),
    "basis": ("model", str),
    "p": ("model", int),
    "aggregation": ("model", str),
}

BUILTIN_DEFAULTS = {
    "arch": "nasm",
    "n_train": 1000,
    "n_benchmark": 100,
    "label": "id",
    "mode": "goal",
    "chunk_size": 256,
    "n_grid": 100,
    "epochs": 2000,
    "lr0": 0.01,
    "lr_decay": 0.9,
    "lr_decay_period": 1000,
    "batch_instances": 10000,
    "queries_per_instance": 10,
    "val_every": 0,
    "basis": "fourier",
    "p": 11,
    "aggregation": "sum",
}


def load_ini(path: str | None) -> dict:
    """Parse a config file into a flat {key: typed value} map."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc

    by_section: dict[str, dict[str, str]] = {}
    for key, (section, _) in _SCHEMA.items():
        by_section.setdefault(section, {})[key] = key
    out: dict = {}
    for section in parser.sections():
        if section not in by_section:
            raise ConfigError(f"unknown config section '[{section}]'")
        for key, raw in parser.items(section):
            if key not in by_section[section]:
                raise ConfigError(f"unknown config key '{key}' in section '[{section}]'")
            caster = _SCHEMA[key][1]
            try:
                out[key] = caster(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"config key '{key}' needs a {caster.__name__}, got '{raw}'") from exc
    return out


def resolve_seed(explicit: int | None, ini: dict) -> int:
    """Flag, then config file, then NCOLAB_SEED, then 0."""
    if explicit is not None:
        return int(explicit)
    if "seed" in ini:
        return int(ini["seed"])
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is not None:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from exc
    return 0


def setting(key: str, ini: dict):
    """Config-file value if present, else the builtin default."""
    if key in ini:
        return ini[key]
    if key in BUILTIN_DEFAULTS:
        return BUILTIN_DEFAULTS[key]
    return None

"""Training/evaluation configuration files.

A config is a JSON object whose keys are TrainConfig field names; an empty
file (or empty object) yields the full defaults (T=500, N=32, gamma=0.9,
alpha=1e-3, k=3, n=10, lambda=1).  Unknown keys and out-of-range values are
rejected with the offending name; JSON syntax errors carry line/column info.
"""

from __future__ import annotations

import json
from dataclasses import fields

from .training import TrainConfig


class ConfigError(ValueError):
    pass


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def config_from_dict(data: dict) -> TrainConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    unknown = set(data) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}; "
                          f"valid keys: {sorted(_FIELD_TYPES)}")
    if "bases" in data:
        data = dict(data, bases=tuple(data["bases"]))
    try:
        return TrainConfig(**data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        return TrainConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data)


def save_config(config: TrainConfig, path) -> None:
    doc = {f.name: getattr(config, f.name) for f in fields(TrainConfig)}
    doc["bases"] = list(doc["bases"])
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

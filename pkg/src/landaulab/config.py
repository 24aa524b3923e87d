"""Run-config schema and loading."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .exceptions import InvalidInputError
from .spectral import DEFAULT_SEED, RESIDUAL_TOL

__all__ = ["SCHEMA", "ConfigError", "load_config", "validate_config", "ANALYSES"]

ANALYSES = ("drift", "clusters", "projector", "collapse", "filter")

_pos = {"type": "number", "exclusiveMinimum": 0}
_dims = {"type": "array", "items": {"type": "integer", "minimum": 16}, "minItems": 2, "maxItems": 2}
_kval = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "k"],
    "properties": {
        "model": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["model"],
                    "properties": {
                        "model": {"const": "torus"},
                        "L1": _pos,
                        "L2": _pos,
                        "B0": _pos,
                        "eps": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["model", "N"],
                    "properties": {"model": {"const": "sphere"}, "N": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "k": {"type": "array", "items": _kval, "minItems": 1},
        "grid": _dims,
        "coarse_grid": _dims,
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": _pos, "seed": {"type": "integer", "minimum": 0}},
        },
        "analyses": {
            "type": "array",
            "items": {"enum": list(ANALYSES)},
            "uniqueItems": True,
        },
        "clusters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"nu_max": {"type": "integer", "minimum": 1, "maximum": 3}},
        },
        "projector": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x0": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "sphere_grid": _dims,
                "gauge_check": {"type": "boolean"},
                "gauge_seed": {"type": "integer", "minimum": 0},
            },
        },
        "collapse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"ks": {"type": "array", "items": _kval}, "u_max": _pos, "n_u": {"type": "integer", "minimum": 3}},
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": _kval,
                "a": _pos,
                "b": _pos,
                "degree": {"type": "integer", "minimum": 1},
                "target": _pos,
            },
        },
        "output_dir": {"type": "string"},
        "cache": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "policy": {"enum": ["readwrite", "read", "write", "off"]},
            },
        },
    },
}

DEFAULTS = {
    "solver": {"tol": RESIDUAL_TOL, "seed": DEFAULT_SEED},
    "analyses": ["drift", "clusters"],
    "clusters": {"nu_max": 2},
    "projector": {"gauge_check": False, "gauge_seed": 7},
    "collapse": {"u_max": 3.0, "n_u": 41},
    "filter": {"a": 0.1, "degree": 400, "target": 1e-4},
    "output_dir": "landaulab-out",
    "cache": {"dir": ".landaulab-cache", "policy": "readwrite"},
}


class ConfigError(InvalidInputError):
    pass


def validate_config(raw: dict) -> dict:
    """Schema-check ``raw`` and return it with defaults filled in."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = copy.deepcopy(raw)
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            cfg[key] = {**val, **cfg.get(key, {})}
        else:
            cfg.setdefault(key, copy.deepcopy(val))
    if cfg["model"]["model"] == "torus" and "grid" not in cfg:
        raise ConfigError("config invalid at grid: torus runs need grid dims")
    if cfg["k"] != sorted(cfg["k"]):
        raise ConfigError("config invalid at k: k values must be ascending")
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return validate_config(raw)

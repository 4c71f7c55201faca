"""JSON config schemas and loaders for simulations and attack scenarios.

Chain parameters in a config are overrides applied on top of a named preset,
so ``{"params": {"block_time_target": 600}}`` is a complete parameter block.
"""
from __future__ import annotations

import json
from typing import Any

import jsonschema

from .attacks import KINDS, AttackSpec
from .core import (ChainParams, CoinAgeMode, DuplicatePolicy, ModifierMode, ParamsError,
                   StakeInequality, WindowLaw, preset)
from .netsim import BEHAVIORS, CALIBRATED_LATENCY, LatencyModel, NodeSpec, SimConfig

SCHEMA_VERSION = 1

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

PARAMS_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "block_time_target": _POS_INT,
        "min_stake_age": _POS_INT,
        "modifier_interval": _POS_INT,
        "selection_interval": _POS_INT,
        "modifier_bits": {"type": "integer", "minimum": 1, "maximum": 64},
        "retarget_smoothing": _POS_INT,
        "coin_age_mode": {"enum": [m.value for m in CoinAgeMode]},
        "modifier_mode": {"enum": [m.value for m in ModifierMode]},
        "stake_inequality": {"enum": [m.value for m in StakeInequality]},
        "window_law": {"enum": [m.value for m in WindowLaw]},
        "duplicate_policy": {"enum": [m.value for m in DuplicatePolicy]},
        "reward_initial_rate": _NONNEG,
        "reward_final_rate": _NONNEG,
        "reward_decline_years": _NONNEG,
    },
}

_PRESET = {"enum": ["neucoin", "peercoin"]}

LATENCY_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["fixed", "uniform", "lognormal"]},
        "median": _NONNEG,
        "sigma": _NONNEG,
        "low": _NONNEG,
        "high": _NONNEG,
    },
}

NODE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "stake"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "stake": _POS_INT,
        "splits": _POS_INT,
        "behavior": {"enum": list(BEHAVIORS)},
    },
}

SIM_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simulation config",
    "type": "object",
    "additionalProperties": False,
    "required": ["nodes", "duration"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "preset": _PRESET,
        "params": PARAMS_SCHEMA,
        "nodes": {"type": "array", "minItems": 1, "items": NODE_SCHEMA},
        "duration": _POS_INT,
        "latency": LATENCY_SCHEMA,
        "warmup_blocks": _NONNEG_INT,
        "tail_blocks": _NONNEG_INT,
        "genesis_time": {"type": "integer"},
        "chunk": {"type": ["integer", "null"], "minimum": 1},
        "record_trace": {"type": "boolean"},
        "curve": {
            "type": "object",
            "additionalProperties": False,
            "required": ["block_times", "measured_blocks"],
            "properties": {
                "block_times": {"type": "array", "minItems": 1, "items": _POS_INT},
                "measured_blocks": _POS_INT,
                "scale": {"type": "boolean"},
            },
        },
    },
}

ATTACK_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "attack config",
    "type": "object",
    "additionalProperties": False,
    "required": ["attack"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "preset": _PRESET,
        "params": PARAMS_SCHEMA,
        "attack": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "p"],
            "properties": {
                "kind": {"enum": list(KINDS)},
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "n_conf": _NONNEG_INT,
                "lag_blocks": _NONNEG_INT,
                "owns_coins": {"type": "boolean"},
                "n_stakes": {"type": ["integer", "null"], "minimum": 1},
                "hash_budget": _NONNEG,
                "attack_window": {
                    "type": ["array", "null"],
                    "items": {"type": "integer"},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "trials": _POS_INT,
                "give_up_blocks": {"type": ["integer", "null"], "minimum": 1},
                "modifier_bits": {"type": "integer", "minimum": 1, "maximum": 64},
                "strict_threshold": {"type": "boolean"},
                "cycles": _POS_INT,
                "window_blocks": _POS_INT,
                "toy_interval_blocks": _POS_INT,
            },
        },
    },
}

TRACE_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "modifier trace config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "preset": _PRESET,
        "params": PARAMS_SCHEMA,
        "intervals": _POS_INT,
    },
}

SCHEMAS = {"simulate": SIM_SCHEMA, "attack": ATTACK_SCHEMA, "modifier-trace": TRACE_SCHEMA}


def validate(doc: Any, schema: dict[str, Any]) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParamsError(f"config invalid at {where}: {exc.message}") from None


def resolve_params(doc: dict[str, Any], preset_name: str | None = None,
                   overrides: dict[str, Any] | None = None) -> ChainParams:
    """Preset (argument wins over config), then config params, then overrides."""
    base = preset(preset_name or doc.get("preset", "neucoin"))
    changes = dict(doc.get("params", {}))
    changes.update(overrides or {})
    validate(changes, PARAMS_SCHEMA)
    return ChainParams.from_dict({**base.to_dict(), **changes})


def sim_config(doc: dict[str, Any], seed: int, preset_name: str | None = None,
               overrides: dict[str, Any] | None = None) -> SimConfig:
    validate(doc, SIM_SCHEMA)
    params = resolve_params(doc, preset_name, overrides)
    latency = LatencyModel(**doc["latency"]) if "latency" in doc else CALIBRATED_LATENCY
    nodes = tuple(NodeSpec(**n) for n in doc["nodes"])
    extra = {k: doc[k] for k in ("warmup_blocks", "tail_blocks", "genesis_time", "chunk",
                                 "record_trace") if k in doc}
    return SimConfig(params, nodes, doc["duration"], seed, latency, **extra)


def attack_spec(doc: dict[str, Any], seed: int) -> AttackSpec:
    validate(doc, ATTACK_SCHEMA)
    return AttackSpec.from_dict({**doc["attack"], "seed": seed})


def load(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fp:
            doc = json.load(fp)
    except OSError as exc:
        raise ParamsError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParamsError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParamsError("config must be a JSON object")
    return doc

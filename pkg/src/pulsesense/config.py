"""Run-configuration loading and validation.

One JSON document drives the config-based subcommands. Unknown keys are
rejected everywhere; each block is validated by the module that owns it.
``--set path.key=value`` overrides are applied before validation.
"""

from __future__ import annotations

import json
from typing import List, Optional

from .errors import ConfigInvalidValue, ConfigUnknownKey
from .nn.model import ModelConfig
from .synth import Scenario, Schedule, scenario_by_name

TOP_LEVEL_KEYS = ("ingest", "pipeline", "model", "training", "synth", "output")

INGEST_KEYS = ("format", "path", "sample_rate_hz", "labels")
INGEST_LABEL_KEYS = ("path", "kind")
MODEL_KEYS = ("input_dim", "lstm1_units", "lstm2_units", "dense_units",
              "head", "dropout_rate")
SYNTH_KEYS = ("scenario",)
OUTPUT_KEYS = ("dir",)
SCENARIO_KEYS = ("name", "duration_s", "sample_rate_hz", "subcarriers",
                 "hr_bpm", "br_brpm", "apnea_intervals", "base",
                 "breath_gain", "cardiac_gain", "noise_std", "seed")


def reject_unknown(block_name: str, block: dict, allowed) -> None:
    if not isinstance(block, dict):
        raise ConfigInvalidValue(f"{block_name} must be an object")
    for key in block:
        if key not in allowed:
            raise ConfigUnknownKey(f"{block_name}.{key}")


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides: Optional[List[str]]) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigInvalidValue(f"--set expects path.key=value, got {item!r}")
        path, _, raw = item.partition("=")
        keys = path.split(".")
        node = cfg
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigInvalidValue(f"cannot set below non-object {key!r}")
        node[keys[-1]] = _parse_override_value(raw)
    return cfg


def load_config(path: str, overrides: Optional[List[str]] = None) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigInvalidValue(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigInvalidValue("config root must be an object")
    apply_overrides(cfg, overrides)
    reject_unknown("config", cfg, TOP_LEVEL_KEYS)
    return cfg


def require_block(cfg: dict, name: str) -> dict:
    if name not in cfg:
        raise ConfigInvalidValue(f"config is missing the {name!r} block")
    return cfg[name]


def validate_ingest(block: dict) -> dict:
    reject_unknown("ingest", block, INGEST_KEYS)
    fmt = block.get("format", "canonical")
    if fmt not in ("esp32", "canonical"):
        raise ConfigInvalidValue(f"ingest.format must be esp32|canonical, got {fmt!r}")
    if "path" not in block:
        raise ConfigInvalidValue("ingest.path is required")
    labels = block.get("labels")
    if labels is not None:
        reject_unknown("ingest.labels", labels, INGEST_LABEL_KEYS)
        if "path" not in labels or "kind" not in labels:
            raise ConfigInvalidValue("ingest.labels needs path and kind")
    return block


def model_config_from_dict(block: dict, input_dim: Optional[int] = None,
                           head: Optional[str] = None) -> ModelConfig:
    reject_unknown("model", block, MODEL_KEYS)
    kwargs = dict(block)
    if "input_dim" not in kwargs:
        if input_dim is None:
            raise ConfigInvalidValue("model.input_dim is required here")
        kwargs["input_dim"] = input_dim
    if head is not None and "head" not in kwargs:
        kwargs["head"] = head
    try:
        return ModelConfig(**kwargs)
    except ValueError as exc:
        raise ConfigInvalidValue(str(exc)) from None


def _schedule_from_config(value) -> Schedule:
    if isinstance(value, (int, float)):
        return Schedule.constant(float(value))
    times = tuple(float(t) for t, _ in value)
    vals = tuple(float(v) for _, v in value)
    return Schedule(times, vals)


def scenario_from_config(block: dict) -> Scenario:
    reject_unknown("synth", block, SYNTH_KEYS)
    spec = block.get("scenario")
    if spec is None:
        raise ConfigInvalidValue("synth.scenario is required")
    if isinstance(spec, str):
        return scenario_by_name(spec)
    reject_unknown("synth.scenario", spec, SCENARIO_KEYS)
    kwargs = dict(spec)
    for key in ("hr_bpm", "br_brpm"):
        if key in kwargs:
            kwargs[key] = _schedule_from_config(kwargs[key])
    if "apnea_intervals" in kwargs:
        kwargs["apnea_intervals"] = tuple(
            (float(a), float(b)) for a, b in kwargs["apnea_intervals"])
    try:
        return Scenario(**kwargs)
    except TypeError as exc:
        raise ConfigInvalidValue(str(exc)) from None


def validate_output(block: dict) -> str:
    reject_unknown("output", block, OUTPUT_KEYS)
    if "dir" not in block:
        raise ConfigInvalidValue("output.dir is required")
    return block["dir"]

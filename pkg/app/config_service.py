"""Experiment spec files: TOML parsing, scenario presets and command-line overrides.

A spec file mirrors ExperimentSpec::

    scenario = "fig5"
    sweep_name = "mu"
    sweep_values = [0.3, 0.5, 0.7]
    trials = 200

    [system]
    k_id = 10

    [oracle_settings]
    restarts = 8

Keys the file omits come from the scenario preset, then from the schema defaults.
"""

import logging
import re
import tomllib
from copy import deepcopy
from pathlib import Path
from typing import Any, Optional

from pydantic import ValidationError

from app.models import ExperimentSpec, OracleConfig, ScenarioId, SimConfig

logger = logging.getLogger(__name__)

MU_SWEEP = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

SCENARIO_PRESETS: dict[ScenarioId, dict[str, Any]] = {
    ScenarioId.FIG4: {"sweep_name": "mu", "sweep_values": MU_SWEEP, "system": {"k_id": 50}},
    ScenarioId.FIG5: {"sweep_name": "mu", "sweep_values": MU_SWEEP, "system": {"k_id": 50}},
    ScenarioId.FIG6: {
        "sweep_name": "b_eh",
        "sweep_values": [0, 2, 4, 6, 8],
        "system": {"k_id": 50, "mu": 0.7, "b_id": 4},
    },
    ScenarioId.FIG7: {
        "sweep_name": "k_id",
        "sweep_values": [10, 50, 100, 200, 400],
        "trials": 200,
        "oracle": True,
        "system": {"mu": 0.7},
        "oracle_settings": {"restarts": 4},
    },
    ScenarioId.FIG8: {
        "sweep_name": "k_eh",
        "sweep_values": [10, 100, 1000],
        "trials": 200,
        "oracle": True,
        "system": {"k_id": 50, "mu": 0.7},
        "oracle_settings": {"restarts": 4},
    },
    ScenarioId.CUSTOM: {},
}

NESTED_TABLES = {"system": SimConfig, "oracle_settings": OracleConfig}


class ConfigError(ValueError):
    """An experiment spec cannot be loaded or does not validate."""


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged


def _key_lines(text: str) -> dict[str, int]:
    """Line of every ``key = value`` assignment, keyed by its dotted path."""
    lines: dict[str, int] = {}
    table = ""
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if header := re.fullmatch(r"\[\s*([\w.]+)\s*\]", stripped):
            table = header.group(1) + "."
        elif assignment := re.match(r"([\w]+)\s*=", stripped):
            lines[table + assignment.group(1)] = number
    return lines


def _check_keys(data: dict[str, Any], source: str, lines: dict[str, int]) -> None:
    unknown = [key for key in data if key not in ExperimentSpec.model_fields]
    for table, schema in NESTED_TABLES.items():
        section = data.get(table, {})
        if isinstance(section, dict):
            unknown += [f"{table}.{key}" for key in section if key not in schema.model_fields]
    if unknown:
        where = [f"{source}:{lines[key]}: {key}" if key in lines else f"{source}: {key}" for key in unknown]
        raise ConfigError("unknown keys\n" + "\n".join(where))


def format_validation_error(error: ValidationError, source: str, lines: Optional[dict[str, int]] = None) -> str:
    lines = lines or {}
    messages = []
    for detail in error.errors():
        path = ".".join(str(part) for part in detail["loc"])
        prefix = f"{source}:{lines[path]}" if path in lines else source
        messages.append(f"{prefix}: {path}: {detail['msg']}")
    return "\n".join(messages)


def build_spec(
    data: dict[str, Any],
    source: str = "<spec>",
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    parallel: Optional[int] = None,
    text: str = "",
) -> ExperimentSpec:
    """Validate spec data on top of its scenario preset and apply overrides."""
    lines = _key_lines(text)
    _check_keys(data, source, lines)
    try:
        scenario = ScenarioId(data.get("scenario", ScenarioId.CUSTOM.value))
    except ValueError as e:
        logger.error(f"Unknown scenario in {source}: {data.get('scenario')!r}")
        raise ConfigError(f"{source}: scenario: unknown scenario {data.get('scenario')!r}") from e

    merged = _merge(SCENARIO_PRESETS[scenario], data)
    merged["scenario"] = scenario.value
    if seed is not None:
        merged.setdefault("system", {})["seed"] = seed
    if trials is not None:
        merged["trials"] = trials
    if parallel is not None:
        merged["parallel"] = parallel
    try:
        return ExperimentSpec.model_validate(merged)
    except ValidationError as e:
        logger.error(f"Invalid experiment spec {source}: {e.error_count()} errors")
        raise ConfigError(format_validation_error(e, source, lines)) from e


def load_spec(
    path: Path,
    seed: Optional[int] = None,
    trials: Optional[int] = None,
    parallel: Optional[int] = None,
) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read spec file {path}: {e}")
        raise ConfigError(f"{path}: cannot read spec file: {e}") from e
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        logger.error(f"Malformed spec file {path}: {e}")
        raise ConfigError(f"{path}: {e}") from e
    return build_spec(data, source=str(path), seed=seed, trials=trials, parallel=parallel, text=text)


def point_config(spec: ExperimentSpec, value: float) -> SimConfig:
    """System configuration of one sweep point; integer fields reject fractional values."""
    data = spec.system.model_dump()
    data[spec.sweep_name.value] = value
    try:
        return SimConfig.model_validate(data)
    except ValidationError as e:
        logger.error(f"Sweep value {value} is invalid for {spec.sweep_name.value}")
        raise ConfigError(format_validation_error(e, f"sweep {spec.sweep_name.value}={value}")) from e


def validate_sweep(spec: ExperimentSpec) -> list[SimConfig]:
    return [point_config(spec, value) for value in spec.sweep_values]

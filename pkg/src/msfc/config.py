"""Flat ``[section]`` / ``key = value`` configuration files.

Sections map onto the configuration dataclasses::

    [experiment]  ExperimentConfig scalars (horizons, n_seeded_runs, ...)
    [split]       SplitSpec
    [sift]        SiftConfig
    [train]       TrainConfig
    [spa]         SpaConfig

Unknown sections or keys are rejected, and every value is range-checked by
the dataclass it lands in.
"""

from __future__ import annotations

import configparser
from dataclasses import fields, replace
from pathlib import Path

from .emd import SiftConfig
from .exceptions import ConfigError, MsfcError
from .nnet import TrainConfig
from .pipeline import ExperimentConfig
from .series import SplitSpec
from .spa import SpaConfig

__all__ = ["load_config", "parse_config"]

_NESTED = {"split": SplitSpec, "sift": SiftConfig, "train": TrainConfig, "spa": SpaConfig}
_TUPLES = {"horizons", "techniques", "strategies", "hidden_grid"}


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if name in _TUPLES:
            items = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
            return tuple(int(p) for p in items) if name in ("horizons", "hidden_grid") else tuple(items)
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if isinstance(default, int) and not hasattr(default, "value"):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {type(default).__name__}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    base = ExperimentConfig()
    updates: dict = {}
    for section in parser.sections():
        if section == "experiment":
            target, allowed = base, {f.name for f in fields(ExperimentConfig)} - set(_NESTED)
        elif section in _NESTED:
            target, allowed = getattr(base, section), {f.name for f in fields(_NESTED[section])}
        else:
            raise ConfigError(f"{source}: unknown section [{section}]")
        values = {}
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]; allowed: {', '.join(sorted(allowed))}")
            values[key] = _convert(key, raw, getattr(target, key))
        try:
            if section == "experiment":
                updates.update(values)
            else:
                updates[section] = replace(target, **values)
        except MsfcError as exc:
            raise ConfigError(f"{source}: [{section}] {exc}") from None
    try:
        return replace(base, **updates)
    except (MsfcError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, str(path))

"""Flat ``key=value`` config files with typed, validated keys.

Blank lines and ``#`` comments are ignored. Later sources win, so command
line overrides beat file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ConfigError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class GenConfig:
    """Dataset generation settings for ``depthduet gen-data``."""

    count: int = 10
    synthetic_ratio: float = 0.5
    height: int = 64
    width: int = 64
    density: float = 0.04
    holes_density: float = 0.30
    d_min: float = 1.0
    d_max: float = 80.0
    object_min: int = 1
    object_max: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if not 0.0 <= self.synthetic_ratio <= 1.0:
            raise ConfigError("synthetic_ratio must lie in [0, 1]")


def parse_lines(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{n}: empty key")
        out[key] = value
    return out


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_lines(text.splitlines(), str(path))


def _coerce(key: str, value: str, typ):
    name = typ if isinstance(typ, str) else typ.__name__
    try:
        if name == "bool":
            v = value.lower()
            if v in _TRUE:
                return True
            if v in _FALSE:
                return False
            raise ValueError(value)
        if name == "int":
            return int(value)
        if name == "float":
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r} as {name}") from None


def build(cls, values: dict[str, str], **fixed):
    """Instantiate dataclass ``cls`` from string ``values``; unknown keys are errors."""
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, value, known[key].type)
    kwargs.update(fixed)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    return parse_lines(items, "<command line>")

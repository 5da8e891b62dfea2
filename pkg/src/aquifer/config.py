"""
Loading, overriding and serializing the frozen config dataclasses.
"""
import json
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Sequence, TypeVar

from .errors import ConfigurationError, FormatError

T = TypeVar("T")

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _init_fields(cls) -> dict:
    return {f.name: f for f in fields(cls) if f.init}


def to_jsonable(value):
    if isinstance(value, tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    return value


def config_to_dict(cfg) -> dict:
    return to_jsonable(asdict(cfg))


def config_from_dict(cls: type[T], data: dict) -> T:
    """Builds ``cls`` from a mapping; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{cls.__name__} config must be a JSON object.")
    known = _init_fields(cls)
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}.")
    values = {}
    for name, value in data.items():
        default = known[name].default
        values[name] = tuple(value) if isinstance(value, list) and isinstance(default, tuple) else value
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigurationError(f"Invalid {cls.__name__} config: {e}")


def load_config(cls: type[T], path: str | Path) -> T:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"'{path}': not valid JSON ({e}).")
    return config_from_dict(cls, data)


def coerce(text: str, current, name: str):
    """Parses ``text`` into the type of the field's current value."""
    try:
        if isinstance(current, bool):
            lowered = text.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            element = type(current[0]) if current else int
            return tuple(element(part) for part in text.split(",") if part.strip())
        if isinstance(current, str):
            return text
        return json.loads(text)
    except (ValueError, json.JSONDecodeError):
        raise ConfigurationError(f"Cannot parse {text!r} for '{name}'.")


def apply_overrides(cfg: T, overrides: Sequence[str]) -> T:
    """Applies ``key=value`` strings to a config."""
    known = _init_fields(type(cfg))
    changes = {}
    for item in overrides:
        name, sep, text = item.partition("=")
        name = name.strip()
        if not sep:
            raise ConfigurationError(f"Override {item!r} is not of the form key=value.")
        if name not in known:
            raise ConfigurationError(f"Unknown {type(cfg).__name__} key '{name}'.")
        changes[name] = coerce(text, getattr(cfg, name), name)
    return replace(cfg, **changes) if changes else cfg

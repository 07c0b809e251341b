"""
Strict conversion between the frozen config dataclasses and plain JSON data.

Unknown keys are rejected, ints are accepted where floats are expected, and
every error carries the dotted path of the offending field.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math
import types
import typing
from typing import Any

from .errors import ConfigError


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)

    if origin in (typing.Union, types.UnionType):
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError("null is not allowed", path)
        non_null = [a for a in args if a is not type(None)]
        errors = []
        for a in non_null:
            try:
                return _coerce(a, value, path)
            except ConfigError as exc:
                errors.append(exc)
        raise errors[0]

    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)

    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value)
        except ValueError:
            choices = ", ".join(repr(m.value) for m in tp)
            raise ConfigError(f"expected one of {choices}, got {value!r}", path) from None

    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {type(value).__name__}", path)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v, _join(path, i)) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"expected {len(args)} entries, got {len(value)}", path)
        return tuple(_coerce(a, v, _join(path, i)) for i, (a, v) in enumerate(zip(args, value)))

    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", path)
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if tp is Any:
        return value
    raise TypeError(f"unsupported config field type {tp!r} at {path}")


def from_dict(cls, data, path: str = ""):
    """Build dataclass ``cls`` from ``data``, failing closed on unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object, got {type(data).__name__}", path or None)
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(
            f"unknown key(s) {unknown}; valid keys are {sorted(fields)}", path or None
        )
    kwargs = {k: _coerce(hints[k], v, _join(path, k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        # Validators name the field in their message; point at the first one mentioned.
        msg = str(exc)
        named = next((k for k in fields if msg.startswith(k) or f" {k} " in f" {msg}"), None)
        raise ConfigError(msg, _join(path, named) if named else (path or None)) from exc


def to_dict(obj) -> Any:
    """Dataclass tree to JSON-ready data (enums by value, tuples as lists)."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): to_dict(v) for k, v in obj.items()}
    return obj


def canonical_json(data) -> str:
    """Key-sorted compact JSON with shortest round-trip floats."""
    return json.dumps(to_dict(data), sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def scalar_paths(cls, prefix: str = "") -> list[str]:
    """Dotted paths of every numeric leaf field reachable from ``cls``."""
    hints = typing.get_type_hints(cls)
    out = []
    for f in dataclasses.fields(cls):
        tp = hints[f.name]
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if typing.get_origin(tp) in (typing.Union, types.UnionType) and len(args) == 1:
            tp = args[0]
        p = _join(prefix, f.name)
        if dataclasses.is_dataclass(tp):
            out.extend(scalar_paths(tp, p))
        elif tp in (int, float):
            out.append(p)
    return out


def replace_path(obj, path: str, value):
    """Return a copy of ``obj`` with the dotted ``path`` set to ``value``."""
    head, _, rest = path.partition(".")
    names = {f.name for f in dataclasses.fields(obj)}
    if head not in names:
        raise ConfigError(f"unknown field {head!r}", path)
    if rest:
        child = getattr(obj, head)
        if child is None:
            hints = typing.get_type_hints(type(obj))
            tp = next(a for a in typing.get_args(hints[head]) if a is not type(None))
            child = tp()
        return dataclasses.replace(obj, **{head: replace_path(child, rest, value)})
    return dataclasses.replace(obj, **{head: value})

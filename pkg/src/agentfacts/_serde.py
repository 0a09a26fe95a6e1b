"""Type-driven conversion between frozen dataclasses and the JSON data model.

Every record type in the package is a frozen dataclass whose field types are
drawn from a small vocabulary: str, int, bool, Micro, datetime, bytes,
Literal[...], Optional[X], tuple[X, ...], dict[str, X], nested dataclasses,
"scalar" classes exposing ``to_data``/``from_data``, and Any (opaque JSON).

Two renderings exist. The file rendering writes Micro values as decimal
fractions; the canonical rendering writes them as integer millionths so that
signed content never contains a floating point number.
"""

from __future__ import annotations

import base64
import binascii
import dataclasses
import json
import math
import re
import types
import typing
from datetime import datetime, timezone
from functools import lru_cache
from typing import Any, Literal, NewType, Union

from .errors import DocumentSyntaxError, TypeMismatch, UnknownField

# Decimal quantity held with six fractional digits; canonical form is an int.
Micro = NewType("Micro", float)
MICRO_SCALE = 1_000_000

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


def quantize(value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        return float(value)
    return round(value * MICRO_SCALE) / MICRO_SCALE


def to_micros(value: float) -> int:
    return round(value * MICRO_SCALE)


# -- timestamps ---------------------------------------------------------------

def utc(dt: datetime) -> datetime:
    """Normalise to an aware UTC datetime at whole-second precision."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_ts(dt: datetime) -> str:
    return utc(dt).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(text: str, path: str = "") -> datetime:
    if not isinstance(text, str) or not _TS_RE.match(text):
        raise TypeMismatch(path, f"expected RFC 3339 UTC timestamp like 2025-01-01T00:00:00Z, got {text!r}")
    try:
        return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise TypeMismatch(path, str(exc)) from None


def now_utc() -> datetime:
    return utc(datetime.now(timezone.utc))


# -- octets -------------------------------------------------------------------

def b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def unb64url(text: str, path: str = "") -> bytes:
    if not isinstance(text, str) or not re.fullmatch(r"[A-Za-z0-9_-]*", text) or len(text) % 4 == 1:
        raise TypeMismatch(path, "expected unpadded base64url text")
    try:
        return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))
    except (binascii.Error, ValueError) as exc:
        raise TypeMismatch(path, f"bad base64url: {exc}") from None


# -- text format --------------------------------------------------------------

def dumps(data: Any) -> str:
    """Render data in the human-facing file format (stable, indented)."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def loads(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DocumentSyntaxError("/", f"input is not UTF-8: {exc}") from None

    def _no_dupes(pairs):
        out = {}
        for k, v in pairs:
            if k in out:
                raise DocumentSyntaxError("/", f"duplicate key {k!r}")
            out[k] = v
        return out

    def _no_constants(name):
        raise DocumentSyntaxError("/", f"non-finite number {name} is not allowed")

    try:
        return json.loads(text, object_pairs_hook=_no_dupes, parse_constant=_no_constants)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError("/", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# -- dataclass <-> data -------------------------------------------------------

def _child(path: str, key: Any) -> str:
    key = str(key).replace("~", "~0").replace("/", "~1")
    return f"{path}/{key}"


@lru_cache(maxsize=None)
def field_types(cls: type) -> dict[str, Any]:
    return typing.get_type_hints(cls)


@lru_cache(maxsize=None)
def _is_optional(tp: Any) -> tuple[bool, Any]:
    origin = typing.get_origin(tp)
    if origin is Union or origin is getattr(types, "UnionType", None):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1 and len(typing.get_args(tp)) == 2:
            return True, args[0]
    return False, tp


def is_scalar_class(tp: Any) -> bool:
    return isinstance(tp, type) and getattr(tp, "__serde_scalar__", False)


@lru_cache(maxsize=None)
def _shape(tp: Any) -> tuple[Any, Any, tuple]:
    _optional, inner = _is_optional(tp)
    return inner, typing.get_origin(inner), typing.get_args(inner)


@lru_cache(maxsize=None)
def _fields(cls: type) -> tuple[tuple[str, str, Any], ...]:
    """(attribute, key, type) for every serialized field of ``cls``."""
    hints = field_types(cls)
    return tuple(
        (f.name, f.metadata.get("key", f.name), hints[f.name])
        for f in dataclasses.fields(cls)
        if not f.metadata.get("skip")
    )


def value_to_data(value: Any, tp: Any, canonical: bool) -> Any:
    if value is None:
        return None
    tp, origin, args = _shape(tp)
    if tp is Any:
        return _copy_json(value)
    if tp is Micro:
        if canonical:
            if isinstance(value, float) and not math.isfinite(value):
                return value  # rejected later by canonicalize
            return to_micros(value)
        return value
    if tp is datetime:
        return format_ts(value)
    if tp is bytes:
        return b64url(value)
    if origin is Literal or tp in (str, int, bool):
        return value
    if origin is tuple:
        elem = args[0]
        return [value_to_data(v, elem, canonical) for v in value]
    if origin is dict:
        elem = args[1]
        return {k: value_to_data(v, elem, canonical) for k, v in value.items()}
    if is_scalar_class(tp):
        return value.to_data()
    if dataclasses.is_dataclass(tp):
        return to_data(value, canonical=canonical)
    raise TypeError(f"unsupported field type {tp!r}")


def to_data(obj: Any, canonical: bool = False) -> dict:
    """Render a dataclass instance as a JSON-model dict; None fields are omitted."""
    out = {}
    for name, key, tp in _fields(type(obj)):
        v = value_to_data(getattr(obj, name), tp, canonical)
        if v is not None:
            out[key] = v
    return out


def _copy_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _copy_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_copy_json(v) for v in value]
    return value


def _type_name(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def value_from_data(data: Any, tp: Any, path: str) -> Any:
    optional, inner = _is_optional(tp)
    if data is None:
        if optional or inner is Any:
            return None
        raise TypeMismatch(path, "null is not allowed here")
    tp = inner
    origin = typing.get_origin(tp)
    if tp is Any:
        return _copy_json(data)
    if tp is str or origin is Literal:
        if not isinstance(data, str):
            raise TypeMismatch(path, f"expected string, got {_type_name(data)}")
        return data
    if tp is bool:
        if not isinstance(data, bool):
            raise TypeMismatch(path, f"expected boolean, got {_type_name(data)}")
        return data
    if tp is int:
        if isinstance(data, bool) or not isinstance(data, int):
            raise TypeMismatch(path, f"expected integer, got {_type_name(data)}")
        return data
    if tp is Micro:
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise TypeMismatch(path, f"expected number, got {_type_name(data)}")
        return quantize(data)
    if tp is datetime:
        return parse_ts(data, path)
    if tp is bytes:
        return unb64url(data, path)
    if origin is tuple:
        if not isinstance(data, list):
            raise TypeMismatch(path, f"expected array, got {_type_name(data)}")
        elem = typing.get_args(tp)[0]
        return tuple(value_from_data(v, elem, _child(path, i)) for i, v in enumerate(data))
    if origin is dict:
        if not isinstance(data, dict):
            raise TypeMismatch(path, f"expected object, got {_type_name(data)}")
        elem = typing.get_args(tp)[1]
        return {k: value_from_data(v, elem, _child(path, k)) for k, v in data.items()}
    if is_scalar_class(tp):
        return tp.from_data(data, path)
    if dataclasses.is_dataclass(tp):
        return from_data(tp, data, path)
    raise TypeError(f"unsupported field type {tp!r}")


def from_data(cls: type, data: Any, path: str = ""):
    """Build ``cls`` from JSON-model data, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise TypeMismatch(path or "/", f"expected object, got {_type_name(data)}")
    hints = field_types(cls)
    by_key = {f.metadata.get("key", f.name): f for f in dataclasses.fields(cls) if not f.metadata.get("skip")}
    for key in data:
        if key not in by_key:
            raise UnknownField(_child(path, key), "unknown field")
    kwargs = {}
    for key, f in by_key.items():
        if key in data:
            kwargs[f.name] = value_from_data(data[key], hints[f.name], _child(path, key))
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise TypeMismatch(_child(path, key), "required field is missing")
    return cls(**kwargs)


def normalize_micros(obj: Any) -> None:
    """Quantize Micro fields in place; called from frozen __post_init__."""
    hints = field_types(type(obj))
    for f in dataclasses.fields(obj):
        tp = hints[f.name]
        _opt, inner = _is_optional(tp)
        value = getattr(obj, f.name)
        if value is None:
            continue
        if inner is Micro and not isinstance(value, bool) and isinstance(value, (int, float)):
            object.__setattr__(obj, f.name, quantize(value))
        elif typing.get_origin(inner) is dict and typing.get_args(inner)[1] is Micro:
            object.__setattr__(obj, f.name, {k: quantize(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v for k, v in value.items()})
        elif typing.get_origin(inner) is tuple and isinstance(value, list):
            object.__setattr__(obj, f.name, tuple(value))


class Record:
    """Mixin for frozen record dataclasses."""

    def __post_init__(self):
        normalize_micros(self)

    def to_data(self) -> dict:
        return to_data(self)

    def to_canonical(self) -> dict:
        return to_data(self, canonical=True)

    @classmethod
    def from_data(cls, data: Any, path: str = ""):
        return from_data(cls, data, path)

"""Canonical byte encoding and hashing.

The encoding is a strict subset of JSON, described byte for byte in
docs/canonical-encoding.md:

* objects: keys sorted by Unicode code point, ``{"k":v,...}``, no whitespace
* arrays: ``[v,...]``
* strings: UTF-8, escaping only ``"``, ``\\`` and U+0000..U+001F
* integers: base-10, optional leading ``-``, no leading zeros or exponent
* ``true`` / ``false`` / ``null``
* non-integer numbers are rejected
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Any, Iterable

from .errors import MissingSection, NonCanonicalizable, TypeMismatch, UnknownSection

SECTION_NAMES = (
    "identity",
    "baseline_model",
    "classification",
    "capabilities",
    "auth_permissions",
    "compliance",
    "performance",
    "supply_chain",
    "verification",
    "extensions",
)

DIGEST_ALGORITHMS = {"sha-256": (hashlib.sha256, 32)}

_SHORT_ESCAPES = {
    0x08: "\\b",
    0x09: "\\t",
    0x0A: "\\n",
    0x0C: "\\f",
    0x0D: "\\r",
    0x22: '\\"',
    0x5C: "\\\\",
}


@dataclass(frozen=True)
class CanonicalBytes:
    bytes: bytes

    def __len__(self):
        return len(self.bytes)


@dataclass(frozen=True)
class Digest:
    __serde_scalar__ = True

    value: bytes
    algorithm: str = "sha-256"

    def __post_init__(self):
        if self.algorithm not in DIGEST_ALGORITHMS:
            raise ValueError(f"unknown digest algorithm {self.algorithm!r}")
        size = DIGEST_ALGORITHMS[self.algorithm][1]
        if len(self.value) != size:
            raise ValueError(f"{self.algorithm} digest must be {size} octets, got {len(self.value)}")

    @property
    def hex(self) -> str:
        return self.value.hex()

    def __str__(self) -> str:
        return f"{self.algorithm}:{self.value.hex()}"

    def to_data(self) -> str:
        return str(self)

    @classmethod
    def from_data(cls, data: Any, path: str = "") -> "Digest":
        if not isinstance(data, str) or ":" not in data:
            raise TypeMismatch(path, "expected digest text like sha-256:<hex>")
        alg, _, hexval = data.partition(":")
        try:
            return cls(bytes.fromhex(hexval), alg)
        except ValueError as exc:
            raise TypeMismatch(path, str(exc)) from None

    @classmethod
    def zero(cls) -> "Digest":
        return cls(bytes(32))


_NEEDS_ESCAPE = re.compile(r'[\x00-\x1f"\\]')
_SURROGATE = re.compile("[\ud800-\udfff]")


def _escape(m: re.Match) -> str:
    cp = ord(m.group())
    return _SHORT_ESCAPES.get(cp) or f"\\u{cp:04x}"


def _encode_str(s: str, out: list[str]) -> None:
    bad = _SURROGATE.search(s)
    if bad:
        raise NonCanonicalizable(f"lone surrogate U+{ord(bad.group()):04X} in string")
    out.append('"')
    out.append(_NEEDS_ESCAPE.sub(_escape, s))
    out.append('"')


def _encode(value: Any, out: list[str], depth: int) -> None:
    if depth > 64:
        raise NonCanonicalizable("nesting deeper than 64 levels")
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, int):
        out.append(str(int(value)))
    elif isinstance(value, float):
        if not math.isfinite(value):
            raise NonCanonicalizable(f"non-finite number {value!r}")
        if not value.is_integer():
            raise NonCanonicalizable(f"non-integer number {value!r}")
        out.append(str(int(value)))
    elif isinstance(value, str):
        _encode_str(value, out)
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(",")
            _encode(item, out, depth + 1)
        out.append("]")
    elif isinstance(value, dict):
        for k in value:
            if not isinstance(k, str):
                raise NonCanonicalizable(f"object key {k!r} is not a string")
        out.append("{")
        for i, k in enumerate(sorted(value)):
            if i:
                out.append(",")
            _encode_str(k, out)
            out.append(":")
            _encode(value[k], out, depth + 1)
        out.append("}")
    elif hasattr(value, "to_canonical"):
        _encode(value.to_canonical(), out, depth)
    elif isinstance(value, Digest):
        _encode_str(str(value), out)
    else:
        raise NonCanonicalizable(f"value of type {type(value).__name__} has no canonical form")


def canonicalize(value: Any) -> CanonicalBytes:
    """Encode a document value (or record exposing ``to_canonical``) canonically."""
    out: list[str] = []
    _encode(value, out, 0)
    text = "".join(out)
    return CanonicalBytes(text.encode("utf-8"))


def digest(data: CanonicalBytes | bytes, algorithm: str = "sha-256") -> Digest:
    raw = data.bytes if isinstance(data, CanonicalBytes) else bytes(data)
    fn, _size = DIGEST_ALGORITHMS[algorithm]
    return Digest(fn(raw).digest(), algorithm)


def check_scope(scope: Iterable[str]) -> list[str]:
    names = sorted(set(scope))
    if not names:
        raise UnknownSection("scope must name at least one section")
    unknown = [n for n in names if n not in SECTION_NAMES]
    if unknown:
        raise UnknownSection(f"unknown section(s): {', '.join(unknown)}")
    return names


def section_payload(doc, scope: Iterable[str]) -> CanonicalBytes:
    """Canonical bytes covered by a signature over ``scope`` of ``doc``.

    The record binds the agent id and revision counter so a signature cannot
    be moved to another agent or replayed on a later revision.
    """
    names = check_scope(scope)
    sections = {}
    for name in names:
        if doc.section(name) is None:
            raise MissingSection(f"section {name!r} is not present in the document")
        sections[name] = doc.signable_section(name)
    record = {
        "agent_id": doc.identity.agent_id,
        "version_seq": doc.identity.version_seq,
        "scope": names,
        "sections": sections,
    }
    return canonicalize(record)

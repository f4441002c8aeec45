"""Line-oriented record codec shared by logs, scripts and the wire protocol.

A record is a single UTF-8 line of space-separated ``key=value`` fields.
Values are percent-encoded (RFC 3986 style, nothing in the safe set), so
spaces, tabs, ``=``, ``,`` and newlines survive round trips and a record
never spans lines.  Field order is fixed per record kind by the writers;
the decoder preserves order.

List values encode each item separately and join with ``,`` -- unambiguous
because ``,`` is always escaped inside items.
"""

from __future__ import annotations

from urllib.parse import quote, unquote


class LineFormatError(ValueError):
    """Raised on malformed records."""


def encode_value(value: str) -> str:
    return quote(value, safe="")


def decode_value(raw: str) -> str:
    return unquote(raw)


def encode_list(items: list[str] | tuple[str, ...]) -> str:
    return ",".join(encode_value(item) for item in items)


def decode_list(raw: str) -> list[str]:
    if raw == "":
        return []
    return [decode_value(part) for part in raw.split(",")]


def encode_fields(fields: list[tuple[str, str]]) -> str:
    """Encode ``(key, value)`` pairs; the caller fixes the order."""
    parts = []
    for key, value in fields:
        if not key or "=" in key or " " in key:
            raise LineFormatError(f"bad field key: {key!r}")
        parts.append(f"{key}={encode_value(value)}")
    return " ".join(parts)


def decode_fields(payload: str) -> dict[str, str]:
    """Decode a payload back into a dict (insertion order preserved)."""
    fields: dict[str, str] = {}
    if payload == "":
        return fields
    for part in payload.split(" "):
        key, sep, raw = part.partition("=")
        if not sep or not key:
            raise LineFormatError(f"bad field: {part!r}")
        fields[key] = decode_value(raw)
    return fields


def encode_event_line(t_ms: int, kind: str, fields: list[tuple[str, str]]) -> str:
    """One event-log / script record: ``t_ms<TAB>kind<TAB>payload``."""
    return f"{t_ms}\t{kind}\t{encode_fields(fields)}"


def decode_event_line(line: str) -> tuple[int, str, dict[str, str]]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise LineFormatError(f"expected 3 tab-separated fields, got {len(parts)}")
    t_raw, kind, payload = parts
    try:
        t_ms = int(t_raw)
    except ValueError as exc:
        raise LineFormatError(f"bad timestamp: {t_raw!r}") from exc
    if not kind:
        raise LineFormatError("empty event kind")
    return t_ms, kind, decode_fields(payload)

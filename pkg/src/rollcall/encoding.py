"""Canonical byte encoding for transcripts, digests, and challenge derivation.

Every object that is hashed (for challenges or board digests) or serialized
(receipts, proofs, board rows) goes through this module, so that a value has
exactly one byte representation and two distinct values never share one.

The format is a tagged, length-prefixed concatenation:

    b'B' + u32(len) + raw              bytes
    b'S' + u32(len) + utf8             str
    b'I' + u32(len) + big-endian mag   non-negative int (minimal magnitude)
    b'L' + u32(count) + item*          list / tuple
    b'N'                               None

Tags make the encoding prefix-free per item, so ``encode(a, b)`` can never
collide with ``encode(a2, b2)`` unless ``(a, b) == (a2, b2)``.
"""

from __future__ import annotations

import struct

_U32 = struct.Struct(">I")

_TAG_BYTES = b"B"
_TAG_STR = b"S"
_TAG_INT = b"I"
_TAG_LIST = b"L"
_TAG_NONE = b"N"


class DecodeError(ValueError):
    """Raised when a byte string is not a valid canonical encoding."""


def _encode_into(out: list, value, _pack=_U32.pack) -> None:
    # exact-type fast paths first; this runs on every hash and every record
    tv = type(value)
    if tv is bytes:
        out.append(_TAG_BYTES)
        out.append(_pack(len(value)))
        out.append(value)
    elif tv is str:
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out.append(_pack(len(raw)))
        out.append(raw)
    elif tv is int:
        raw = value.to_bytes((value.bit_length() + 7) // 8, "big") if value > 0 else b""
        if value < 0:
            raise ValueError("only non-negative integers are encodable")
        out.append(_TAG_INT)
        out.append(_pack(len(raw)))
        out.append(raw)
    elif tv is list or tv is tuple:
        out.append(_TAG_LIST)
        out.append(_pack(len(value)))
        for item in value:
            _encode_into(out, item)
    elif value is None:
        out.append(_TAG_NONE)
    elif isinstance(value, bool):
        # bools are ints in Python; forbid them to keep encodings unambiguous
        raise TypeError("encode bools explicitly as ints at the call site")
    elif isinstance(value, (bytearray, memoryview)):
        _encode_into(out, bytes(value))
    elif isinstance(value, int):
        _encode_into(out, int(value))
    elif isinstance(value, (list, tuple)):
        _encode_into(out, list(value))
    elif isinstance(value, str):
        _encode_into(out, str(value))
    else:
        raise TypeError(f"value of type {type(value).__name__} is not encodable")


def encode(*values) -> bytes:
    """Encode values into one canonical byte string."""
    # bytes and str are inlined: this function sits under every hash
    out: list = []
    pack = _U32.pack
    for value in values:
        tv = type(value)
        if tv is bytes:
            out.append(_TAG_BYTES)
            out.append(pack(len(value)))
            out.append(value)
        elif tv is str:
            raw = value.encode("utf-8")
            out.append(_TAG_STR)
            out.append(pack(len(raw)))
            out.append(raw)
        else:
            _encode_into(out, value)
    return b"".join(out)


class Decoder:
    """Strict reader for byte strings produced by :func:`encode`.

    Any structural problem (wrong tag, truncation, trailing garbage at
    ``expect_end``) raises :class:`DecodeError`; verifiers catch it and
    return a clean False instead of crashing on attacker-shaped bytes.
    """

    def __init__(self, data: bytes):
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise DecodeError("decoder input must be bytes")
        self._data = bytes(data)
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise DecodeError("truncated encoding")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def _tag(self) -> bytes:
        return self._take(1)

    def _length(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def read_bytes(self) -> bytes:
        if self._tag() != _TAG_BYTES:
            raise DecodeError("expected bytes")
        return self._take(self._length())

    def read_fixed(self, size: int) -> bytes:
        raw = self.read_bytes()
        if len(raw) != size:
            raise DecodeError(f"expected {size}-byte field, got {len(raw)}")
        return raw

    def read_str(self) -> str:
        if self._tag() != _TAG_STR:
            raise DecodeError("expected str")
        raw = self._take(self._length())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8") from exc

    def read_int(self) -> int:
        if self._tag() != _TAG_INT:
            raise DecodeError("expected int")
        raw = self._take(self._length())
        if raw[:1] == b"\x00":
            raise DecodeError("non-minimal integer encoding")
        return int.from_bytes(raw, "big")

    def read_list_header(self) -> int:
        if self._tag() != _TAG_LIST:
            raise DecodeError("expected list")
        return self._length()

    def read_none(self) -> None:
        if self._tag() != _TAG_NONE:
            raise DecodeError("expected none")
        return None

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError("trailing bytes after encoding")

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """XOR two equal-length byte strings (used to split proofs in two)."""
    if len(a) != len(b):
        raise ValueError("xor operands must have equal length")
    return bytes(x ^ y for x, y in zip(a, b))

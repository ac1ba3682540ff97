"""Bit-exact canonical encoding of scalar arguments.

Every captured argument is stored as a short text token whose bytes
identify the value exactly:

    bool            true | false
    integers        i32:-17, u8:255        (minimal decimal)
    floats          f64:3ff0000000000000   (lowercase hex of the IEEE-754 bits)
    char            c:<escaped>
    text            s:<escaped>
    nullable text   nil | s:<escaped>

``<escaped>`` is the JSON string body: quote, backslash, C0 controls,
DEL and lone surrogates are escaped, everything else is kept verbatim.
Two values are equal iff their tokens are byte-equal, so NaN == NaN and
-0.0 != +0.0.

f32 values decode to :class:`numpy.float32` because a round trip through a
Python float would quiet signaling NaNs.
"""
from __future__ import annotations

import math
import struct

import numpy as np

from .kinds import ScalarKind

UNSERIALIZABLE = "?"
NIL = "nil"
UNIT_SEPARATOR = "\x1f"

_SHORT_ESCAPES = {'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t", "\b": "\\b", "\f": "\\f"}
_SHORT_UNESCAPES = {'"': '"', "\\": "\\", "/": "/", "n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f"}


class CanonicalError(ValueError):
    """A value cannot be represented in, or decoded from, a scalar kind."""


def escape_text(s: str) -> str:
    out = []
    for ch in s:
        esc = _SHORT_ESCAPES.get(ch)
        if esc is not None:
            out.append(esc)
            continue
        cp = ord(ch)
        if cp < 0x20 or cp == 0x7F or 0xD800 <= cp <= 0xDFFF:
            out.append(f"\\u{cp:04x}")
        else:
            out.append(ch)
    return "".join(out)


def unescape_text(s: str) -> str:
    # Not json.loads: that would fuse an escaped surrogate pair into one
    # code point, while a Python str may hold the two halves separately.
    out = []
    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= n:
            raise CanonicalError(f"dangling escape in {s!r}")
        nxt = s[i + 1]
        if nxt == "u":
            digits = s[i + 2:i + 6]
            if len(digits) != 4 or any(c not in "0123456789abcdefABCDEF" for c in digits):
                raise CanonicalError(f"bad \\u escape in {s!r}")
            out.append(chr(int(digits, 16)))
            i += 6
        elif nxt in _SHORT_UNESCAPES:
            out.append(_SHORT_UNESCAPES[nxt])
            i += 2
        else:
            raise CanonicalError(f"bad escape \\{nxt} in {s!r}")
    return "".join(out)


def _f64_bits(x: float) -> int:
    return struct.unpack(">Q", struct.pack(">d", x))[0]


def _f32_bits(x) -> int:
    if isinstance(x, np.float32):
        return int(np.asarray(x).view(np.uint32))
    x = float(x)
    if math.isnan(x):
        # Narrowing a double NaN keeps the sign and the top payload bits.
        bits64 = _f64_bits(x)
        sign = (bits64 >> 63) << 31
        payload = (bits64 >> 29) & 0x7FFFFF
        return sign | 0x7F800000 | (payload or 0x400000)
    narrowed = np.float32(x)
    if float(narrowed) != x:
        raise CanonicalError(f"value {x!r} is not representable as f32")
    return int(np.asarray(narrowed).view(np.uint32))


def canonicalize(kind: ScalarKind, value) -> str:
    """Return the canonical token for ``value`` interpreted as ``kind``."""
    if kind is ScalarKind.BOOL:
        if isinstance(value, (bool, np.bool_)):
            return "true" if value else "false"
        raise CanonicalError(f"bool expects True/False, got {value!r}")

    if kind.is_integer:
        if isinstance(value, (bool, np.bool_, float)) or not isinstance(value, (int, np.integer)):
            raise CanonicalError(f"{kind.value} expects an integer, got {value!r}")
        v = int(value)
        lo, hi = kind.int_range()
        if not lo <= v <= hi:
            raise CanonicalError(f"{v} out of range for {kind.value} [{lo}, {hi}]")
        return f"{kind.value}:{v}"

    if kind is ScalarKind.F64:
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.floating, np.integer)):
            raise CanonicalError(f"f64 expects a float, got {value!r}")
        if isinstance(value, (int, np.integer)):
            v = float(value)
            if v != value:
                raise CanonicalError(f"integer {value} is not exactly representable as f64")
        else:
            v = float(value)
        return f"f64:{_f64_bits(v):016x}"

    if kind is ScalarKind.F32:
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.floating, np.integer)):
            raise CanonicalError(f"f32 expects a float, got {value!r}")
        if isinstance(value, (int, np.integer)):
            if float(np.float32(value)) != value:
                raise CanonicalError(f"integer {value} is not exactly representable as f32")
            value = float(value)
        return f"f32:{_f32_bits(value):08x}"

    if kind is ScalarKind.CHAR:
        if not isinstance(value, str) or len(value) != 1:
            raise CanonicalError(f"char expects a one-character str, got {value!r}")
        return "c:" + escape_text(value)

    if kind is ScalarKind.TEXT:
        if not isinstance(value, str):
            raise CanonicalError(f"text expects a str, got {value!r}")
        return "s:" + escape_text(value)

    if kind is ScalarKind.NULLABLE_TEXT:
        if value is None:
            return NIL
        if not isinstance(value, str):
            raise CanonicalError(f"text? expects a str or None, got {value!r}")
        return "s:" + escape_text(value)

    raise CanonicalError(f"unsupported kind {kind!r}")


def _decode_unchecked(kind: ScalarKind, token: str):
    if kind is ScalarKind.BOOL:
        if token == "true":
            return True
        if token == "false":
            return False
        raise CanonicalError(f"bad bool token {token!r}")
    if kind.is_integer:
        prefix = kind.value + ":"
        if not token.startswith(prefix):
            raise CanonicalError(f"token {token!r} is not {kind.value}")
        try:
            return int(token[len(prefix):], 10)
        except ValueError:
            raise CanonicalError(f"bad integer token {token!r}") from None
    if kind.is_float:
        prefix = kind.value + ":"
        width = kind.bits // 4
        body = token[len(prefix):]
        if not token.startswith(prefix) or len(body) != width:
            raise CanonicalError(f"token {token!r} is not {kind.value}")
        try:
            bits = int(body, 16)
        except ValueError:
            raise CanonicalError(f"bad float token {token!r}") from None
        if kind is ScalarKind.F64:
            return struct.unpack(">d", bits.to_bytes(8, "big"))[0]
        return np.array([bits], dtype=np.uint32).view(np.float32)[0]
    if kind is ScalarKind.CHAR:
        if not token.startswith("c:"):
            raise CanonicalError(f"token {token!r} is not char")
        return unescape_text(token[2:])
    if kind is ScalarKind.NULLABLE_TEXT and token == NIL:
        return None
    if kind in (ScalarKind.TEXT, ScalarKind.NULLABLE_TEXT):
        if not token.startswith("s:"):
            raise CanonicalError(f"token {token!r} is not text")
        return unescape_text(token[2:])
    raise CanonicalError(f"unsupported kind {kind!r}")


def decode(kind: ScalarKind, token: str):
    """Inverse of :func:`canonicalize`; rejects tokens that are not canonical."""
    value = _decode_unchecked(kind, token)
    if canonicalize(kind, value) != token:
        raise CanonicalError(f"token {token!r} is not in canonical form for {kind.value}")
    return value


def check_token(kind: ScalarKind, token: str) -> bool:
    try:
        decode(kind, token)
    except CanonicalError:
        return False
    return True


def dedup_key(tuple_: tuple[str, ...]) -> str:
    return UNIT_SEPARATOR.join(tuple_)


def sort_key(tuple_: tuple[str, ...]) -> bytes:
    """Lexicographic byte order of the dedup key."""
    return dedup_key(tuple_).encode("utf-8", "surrogatepass")

"""Scalar parameter kinds and the annotation aliases subject code may use.

A target method parameter is capturable only if its annotation maps to one
of the closed set of :class:`ScalarKind` members. Plain ``bool``, ``int``,
``float`` and ``str`` map to ``bool``, ``i64``, ``f64`` and ``text``;
``Optional[str]`` / ``str | None`` maps to nullable text. Sized kinds are
spelled with the aliases below (``from putforge.kinds import i32``).
"""
from __future__ import annotations

import ast
import enum
import functools

# Annotation aliases. They are plain aliases so subject code type-checks as
# ordinary ints/floats/strs; only the spelling matters to the analyzer.
i8 = i16 = i32 = i64 = int
u8 = u16 = u32 = u64 = int
f32 = f64 = float
char = str


class ScalarKind(enum.Enum):
    BOOL = "bool"
    I8 = "i8"
    I16 = "i16"
    I32 = "i32"
    I64 = "i64"
    U8 = "u8"
    U16 = "u16"
    U32 = "u32"
    U64 = "u64"
    F32 = "f32"
    F64 = "f64"
    CHAR = "char"
    TEXT = "text"
    NULLABLE_TEXT = "text?"

    # Derived attributes are cached per member: the capture and decode hot
    # paths consult them for every scalar.
    @functools.cached_property
    def is_integer(self) -> bool:
        tag = self._value_
        return tag[0] in "iu" and tag[1:].isdigit()

    @functools.cached_property
    def is_float(self) -> bool:
        return self._value_ in ("f32", "f64")

    @functools.cached_property
    def bits(self) -> int:
        if self.is_integer or self.is_float:
            return int(self._value_[1:])
        raise ValueError(f"{self._value_} has no bit width")

    @functools.cached_property
    def signed(self) -> bool:
        return self._value_.startswith("i")

    @functools.cached_property
    def _int_range(self) -> tuple[int, int]:
        if self.signed:
            return -(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1
        return 0, (1 << self.bits) - 1

    def int_range(self) -> tuple[int, int]:
        return self._int_range

    @classmethod
    def from_tag(cls, tag: str) -> "ScalarKind":
        try:
            return cls(tag)
        except ValueError:
            raise ValueError(f"unknown scalar kind {tag!r}") from None


_NAME_KINDS = {
    "bool": ScalarKind.BOOL,
    "int": ScalarKind.I64,
    "float": ScalarKind.F64,
    "str": ScalarKind.TEXT,
    "char": ScalarKind.CHAR,
    **{k.value: k for k in ScalarKind if k.is_integer or k.is_float},
}


def _terminal_name(node: ast.expr) -> str | None:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        return node.attr
    return None


def _is_none(node: ast.expr) -> bool:
    return isinstance(node, ast.Constant) and node.value is None or _terminal_name(node) == "None"


def kind_of_annotation(node: ast.expr | None) -> ScalarKind | None:
    """Map a parameter annotation to its scalar kind, or None if not scalar."""
    if node is None:
        return None
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        try:
            node = ast.parse(node.value, mode="eval").body
        except SyntaxError:
            return None
    # str | None, None | str
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        sides = [node.left, node.right]
        others = [s for s in sides if not _is_none(s)]
        if len(others) == 1 and kind_of_annotation(others[0]) is ScalarKind.TEXT:
            return ScalarKind.NULLABLE_TEXT
        return None
    # Optional[str], Union[str, None]
    if isinstance(node, ast.Subscript):
        outer = _terminal_name(node.value)
        inner = node.slice
        if outer == "Optional":
            if kind_of_annotation(inner) is ScalarKind.TEXT:
                return ScalarKind.NULLABLE_TEXT
            return None
        if outer == "Union" and isinstance(inner, ast.Tuple):
            others = [e for e in inner.elts if not _is_none(e)]
            if len(others) == 1 and len(inner.elts) == 2 and kind_of_annotation(others[0]) is ScalarKind.TEXT:
                return ScalarKind.NULLABLE_TEXT
        return None
    name = _terminal_name(node)
    if name is None:
        return None
    return _NAME_KINDS.get(name)


def signature_text(kinds) -> str:
    return ",".join(k.value for k in kinds)

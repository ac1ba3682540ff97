"""Capture logs and the per-target union of observed argument tuples."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from . import canonical
from .kinds import ScalarKind

log = logging.getLogger(__name__)

CONTEXTS = ("test", "field")
FLAG_ORDER = ("test", "field", "original")

Tuple = tuple[str, ...]


class CaptureLogError(Exception):
    pass


@dataclass(frozen=True)
class CaptureRecord:
    target: str
    tuple: Tuple
    context: str
    test_id: str | None
    seq: int

    @property
    def serializable(self) -> bool:
        return canonical.UNSERIALIZABLE not in self.tuple

    def to_json_line(self) -> str:
        rec = {"t": self.target, "a": list(self.tuple), "c": self.context, "id": self.test_id, "n": self.seq}
        return json.dumps(rec, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class CaptureUnion:
    target: str
    tuples: tuple[Tuple, ...]
    provenance: Mapping[Tuple, frozenset] = field(hash=False)

    def __len__(self):
        return len(self.tuples)

    def originals(self) -> list[Tuple]:
        return [t for t in self.tuples if "original" in self.provenance[t]]


def _parse_record(obj) -> CaptureRecord:
    if not isinstance(obj, dict) or list(obj) != ["t", "a", "c", "id", "n"]:
        raise ValueError("record keys must be t, a, c, id, n in that order")
    t, a, c, tid, n = obj["t"], obj["a"], obj["c"], obj["id"], obj["n"]
    if not isinstance(t, str) or not isinstance(a, list) or not all(isinstance(x, str) for x in a):
        raise ValueError("bad target or argument list")
    if c not in CONTEXTS:
        raise ValueError(f"bad context {c!r}")
    if tid is not None and not isinstance(tid, str):
        raise ValueError("bad test id")
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValueError("bad sequence number")
    return CaptureRecord(t, tuple(a), c, tid, n)


def check_record(rec: CaptureRecord, targets: Mapping[str, tuple[ScalarKind, ...]]) -> str | None:
    kinds = targets.get(rec.target)
    if kinds is None:
        return f"unknown target {rec.target!r}"
    if len(kinds) != len(rec.tuple):
        return f"arity {len(rec.tuple)} != {len(kinds)} for {rec.target}"
    for kind, token in zip(kinds, rec.tuple):
        if token != canonical.UNSERIALIZABLE and not canonical.check_token(kind, token):
            return f"token {token!r} is not a canonical {kind.value}"
    return None


def load(path: str | os.PathLike, targets: Mapping[str, tuple[ScalarKind, ...]] | None = None,
         diagnostics: list[str] | None = None) -> list[CaptureRecord]:
    """Read a capture log.

    A final line without its LF terminator is a truncated write and is
    skipped. With ``targets`` (target id -> parameter kinds), records whose
    tuple does not match the signature are rejected.
    """
    diagnostics = diagnostics if diagnostics is not None else []
    try:
        data = open(path, "rb").read()
    except OSError as exc:
        raise CaptureLogError(f"cannot read capture log {path}: {exc}") from exc
    lines = data.split(b"\n")
    tail = lines.pop()
    if tail:
        msg = f"{path}: skipped truncated final line ({len(tail)} bytes)"
        log.warning(msg)
        diagnostics.append(msg)
    records = []
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            rec = _parse_record(json.loads(raw.decode("utf-8")))
        except (ValueError, UnicodeDecodeError) as exc:
            diagnostics.append(f"{path}:{lineno}: rejected malformed record: {exc}")
            continue
        if targets is not None:
            problem = check_record(rec, targets)
            if problem:
                diagnostics.append(f"{path}:{lineno}: rejected record: {problem}")
                continue
        records.append(rec)
    return records


def write_log(path: str | os.PathLike, records: Iterable[CaptureRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json_line())


def build_union(records: Iterable[CaptureRecord],
                originals: Mapping[str, Iterable[Tuple]] | None = None) -> dict[str, CaptureUnion]:
    """Deduplicate records per target and add the original tuples.

    Tuple order: originals first in the order given, then the remaining
    tuples by the bytes of their dedup key. Tuples holding an
    unserializable marker cannot be replayed and are dropped.
    """
    flags: dict[str, dict[Tuple, set]] = {}
    for rec in records:
        if not rec.serializable:
            continue
        flags.setdefault(rec.target, {}).setdefault(rec.tuple, set()).add(rec.context)
    ordered_originals: dict[str, list[Tuple]] = {}
    for target, tuples in (originals or {}).items():
        seen = ordered_originals.setdefault(target, [])
        for t in tuples:
            t = tuple(t)
            if t not in seen:
                seen.append(t)
            flags.setdefault(target, {}).setdefault(t, set()).add("original")
    unions = {}
    for target in sorted(flags):
        per = flags[target]
        head = ordered_originals.get(target, [])
        rest = sorted((t for t in per if t not in head), key=canonical.sort_key)
        tuples = tuple(head) + tuple(rest)
        unions[target] = CaptureUnion(target, tuples, {t: frozenset(per[t]) for t in tuples})
    return unions


def union_records(u: CaptureUnion) -> list[CaptureRecord]:
    """One synthetic record per (tuple, observed context) of a union."""
    out = []
    for t in u.tuples:
        for ctx in CONTEXTS:
            if ctx in u.provenance[t]:
                out.append(CaptureRecord(u.target, t, ctx, None, len(out)))
    return out


@dataclass(frozen=True)
class CoverageGain:
    original_count: int
    union_count: int
    factor: Fraction
    orders_of_magnitude: int

    def to_json(self) -> dict:
        f = self.factor
        return {
            "original_count": self.original_count,
            "union_count": self.union_count,
            "factor": f.numerator if f.denominator == 1 else float(f),
            "orders_of_magnitude": self.orders_of_magnitude,
        }


def coverage_gain(union: CaptureUnion | int, originals: Iterable[Tuple] | int) -> CoverageGain:
    """How many more inputs the union exercises than the originals."""
    union_count = union if isinstance(union, int) else len(union)
    original_count = originals if isinstance(originals, int) else len(set(map(tuple, originals)))
    factor = Fraction(union_count, max(original_count, 1))
    orders = 0
    while factor >= 10 ** (orders + 1):
        orders += 1
    return CoverageGain(original_count, union_count, factor, orders)


def dumps_unions(unions: Mapping[str, CaptureUnion]) -> str:
    doc = {}
    for target in sorted(unions):
        u = unions[target]
        doc[target] = {
            "tuples": [list(t) for t in u.tuples],
            "provenance": [[f for f in FLAG_ORDER if f in u.provenance[t]] for t in u.tuples],
        }
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def loads_unions(text: str) -> dict[str, CaptureUnion]:
    doc = json.loads(text)
    out = {}
    for target, entry in doc.items():
        tuples = tuple(tuple(t) for t in entry["tuples"])
        prov = {t: frozenset(p) for t, p in zip(tuples, entry["provenance"])}
        out[target] = CaptureUnion(target, tuples, prov)
    return out

"""Capture emitter called from instrumented target methods.

Configured entirely through the environment of the subject process:

    PUTFORGE_SINK          capture log path; emission is off when unset
    PUTFORGE_CONTEXT       "test" or "field" (default "field")
    PUTFORGE_TEST_ID       id of the running test, set by the pytest plugin
    PUTFORGE_MAX_RECORDS   per-target cap for this process (default 100000)

Each record is one JSON line written with a single ``os.write`` on an
``O_APPEND`` descriptor, so concurrent writers never interleave records.
The emitter swallows its own failures: capture must not change what the
subject does.
"""
from __future__ import annotations

import itertools
import json
import os
import threading
from collections import Counter

from . import canonical
from .kinds import ScalarKind

DEFAULT_MAX_RECORDS = 100_000

_lock = threading.Lock()
_seq = itertools.count()
_counts: Counter = Counter()
_kinds_cache: dict[str, tuple[ScalarKind, ...]] = {}
_fd: int | None = None
_fd_key: tuple[int, str] | None = None


def kinds_of_id(target_id: str) -> tuple[ScalarKind, ...]:
    kinds = _kinds_cache.get(target_id)
    if kinds is None:
        sig = target_id[target_id.rindex("(") + 1:-1]
        kinds = tuple(ScalarKind.from_tag(t) for t in sig.split(",")) if sig else ()
        _kinds_cache[target_id] = kinds
    return kinds


def _descriptor(sink: str) -> int:
    global _fd, _fd_key
    key = (os.getpid(), sink)
    if _fd_key != key:
        _fd = os.open(sink, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
        _fd_key = key
    return _fd


def encode_args(target_id: str, args: tuple) -> list[str]:
    out = []
    for kind, value in zip(kinds_of_id(target_id), args):
        try:
            out.append(canonical.canonicalize(kind, value))
        except Exception:
            out.append(canonical.UNSERIALIZABLE)
    return out


def emit(target_id: str, args: tuple) -> None:
    sink = os.environ.get("PUTFORGE_SINK")
    if not sink:
        return
    try:
        context = os.environ.get("PUTFORGE_CONTEXT", "field")
        test_id = os.environ.get("PUTFORGE_TEST_ID") if context == "test" else None
        cap = int(os.environ.get("PUTFORGE_MAX_RECORDS", DEFAULT_MAX_RECORDS))
        tokens = encode_args(target_id, args)
        with _lock:
            if _counts[target_id] >= cap:
                return
            _counts[target_id] += 1
            n = next(_seq)
            record = {"t": target_id, "a": tokens, "c": context, "id": test_id, "n": n}
            line = json.dumps(record, ensure_ascii=False) + "\n"
            os.write(_descriptor(sink), line.encode("utf-8"))
    except Exception:
        pass

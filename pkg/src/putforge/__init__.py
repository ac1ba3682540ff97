"""putforge: parameterized unit tests from captured arguments.

Instrumented subject code imports ``putforge.runtime`` on every call path,
so the top-level names below are resolved lazily.
"""
from __future__ import annotations

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "ScalarKind": "kinds",
    "canonicalize": "canonical",
    "decode": "canonical",
    "analyze": "code_model",
    "CaptureRecord": "store",
    "build_union": "store",
    "coverage_gain": "store",
    "generate": "generator",
    "classify": "runner",
    "finalize": "runner",
    "Config": "config",
    "load_config": "config",
    "run_all": "pipeline",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name: str):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'putforge' has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(list(globals()) + __all__)

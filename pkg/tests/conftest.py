from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from putforge.fixtures import FixtureResult, fixture_path, list_fixtures, verify_fixture

FIXTURES = list_fixtures()


@pytest.fixture(scope="session")
def fixture_runs(tmp_path_factory):
    """Full pipeline run per fixture, computed once per session."""
    cache: dict[str, FixtureResult] = {}

    def get(name: str) -> FixtureResult:
        if name not in cache:
            ws = tmp_path_factory.mktemp(f"ws-{name}")
            cache[name] = verify_fixture(name, ws)
        return cache[name]

    return get


@pytest.fixture
def fixture_copy(tmp_path):
    """Writable copy of a bundled fixture project."""

    def copy(name: str) -> Path:
        dst = tmp_path / name
        shutil.copytree(fixture_path(name), dst)
        return dst

    return copy


@pytest.fixture
def make_project(tmp_path):
    """Write ``{relative path: text}`` into a fresh project directory."""
    counter = iter(range(1_000_000))

    def make(files: dict[str, str]) -> Path:
        root = tmp_path / f"proj{next(counter)}"
        for rel, text in files.items():
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return root

    return make

from __future__ import annotations

import ast
import json
import os
import subprocess
import sys

import pytest

from putforge import instrumenter, runtime, store
from putforge.code_model import ProjectIndex, SourceFile, analyze, iter_python_files
from putforge.fixtures import fixture_path, list_fixtures
from putforge.instrumenter import InstrumentationError, InstrumentationPlan, emitter_statement, strip_emitters

SHAPES = '''\
class A:
    """Doc."""

    def one(self, x: int) -> int:
        """Doc of one."""
        return x

    def two(self, x: int, y: str) -> str: return y * x

    def doc_only(self, x: int) -> None:
        """Only a docstring."""

    @classmethod
    def make(cls, s: str) -> "A":
        return cls()

    def __init__(self, z: float = 0.0):
        self.z = z


def free(a: bool, *, b: str = "k") -> bool:
    if a:
        return True
    return False


def semi(x: int) -> int: """d"""; return x
'''

TARGETS = {
    "m.A.one(i64)": ("one", ("x",)),
    "m.A.two(i64,text)": ("two", ("x", "y")),
    "m.A.doc_only(i64)": ("doc_only", ("x",)),
    "m.A.make(text)": ("make", ("s",)),
    "m.A.__init__(f64)": ("__init__", ("z",)),
    "m.free(bool,text)": ("free", ("a", "b")),
    "m.semi(i64)": ("semi", ("x",)),
}


def entries():
    out = []
    for tid in TARGETS:
        tail = tid.split("(")[0].split(".")[1:]
        out.append((tid, tail, TARGETS[tid][1]))
    return out


def test_emitter_statement_shapes():
    assert emitter_statement("m.f(i64)", ("x",)) == '__import__("putforge.runtime").runtime.emit("m.f(i64)", (x,))'
    assert emitter_statement("m.f(i64,text)", ("x", "y")).endswith('(x, y))')


def test_instrument_source_compiles_and_strips_back():
    src = SourceFile("m.py", SHAPES.encode())
    out = instrumenter.instrument_source(src, ast.parse(SHAPES), entries())
    tree = ast.parse(out)
    assert strip_emitters(out) == SHAPES.encode()
    # docstrings stay docstrings
    cls = tree.body[0]
    assert ast.get_docstring(cls.body[1]) == "Doc of one."
    assert ast.get_docstring(cls.body[3]) == "Only a docstring."
    # every target body now starts (after its docstring) with an emitter call
    for node in ast.walk(tree):
        if isinstance(node, ast.FunctionDef):
            body = node.body[1:] if ast.get_docstring(node) else node.body
            assert "runtime.emit" in ast.unparse(body[0])


def test_instrumented_functions_emit(tmp_path, monkeypatch):
    src = SourceFile("m.py", SHAPES.encode())
    out = instrumenter.instrument_source(src, ast.parse(SHAPES), entries())
    sink = tmp_path / "log.jsonl"
    monkeypatch.setenv("PUTFORGE_SINK", str(sink))
    monkeypatch.setenv("PUTFORGE_CONTEXT", "field")
    ns: dict = {}
    exec(compile(out, "m.py", "exec"), ns)
    a = ns["A"](1.5)
    a.one(3)
    a.two(2, "é")
    a.doc_only(7)
    ns["A"].make("q")
    ns["free"](True)
    ns["semi"](-1)
    recs = store.load(sink)
    got = [(r.target, r.tuple) for r in recs]
    assert got == [
        ("m.A.__init__(f64)", ("f64:3ff8000000000000",)),
        ("m.A.one(i64)", ("i64:3",)),
        ("m.A.two(i64,text)", ("i64:2", "s:é")),
        ("m.A.doc_only(i64)", ("i64:7",)),
        ("m.A.make(text)", ("s:q",)),
        ("m.A.__init__(f64)", ("f64:0000000000000000",)),
        ("m.free(bool,text)", ("true", "s:k")),
        ("m.semi(i64)", ("i64:-1",)),
    ]
    assert all(r.context == "field" and r.test_id is None for r in recs)
    assert [r.seq for r in recs] == sorted(r.seq for r in recs)


def test_missing_declaration_is_an_error():
    src = SourceFile("m.py", SHAPES.encode())
    with pytest.raises(InstrumentationError, match="not found"):
        instrumenter.instrument_source(src, ast.parse(SHAPES), [("m.nope(i64)", ["nope"], ("x",))])


@pytest.mark.parametrize("name", list_fixtures())
def test_fixture_instrumentation_round_trip(name, tmp_path):
    root = fixture_path(name)
    a = analyze(root)
    plan = InstrumentationPlan(tuple(a.targets), tmp_path / "inst", tmp_path / "cap.jsonl")
    res = instrumenter.instrument(root, plan, a.index)
    assert res.files
    for rel in iter_python_files(root):
        original = (root / rel).read_bytes()
        copy = (tmp_path / "inst" / rel).read_bytes()
        if rel in res.files:
            assert copy != original
        assert strip_emitters(copy) == original
    # non-Python files are copied too
    assert sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file() and "__pycache__" not in p.parts) \
        == sorted(p.relative_to(tmp_path / "inst") for p in (tmp_path / "inst").rglob("*") if p.is_file())


def test_write_conflict_and_same_root(tmp_path):
    root = fixture_path("codec")
    (tmp_path / "inst").mkdir()
    (tmp_path / "inst" / "keep.txt").write_text("x")
    plan = InstrumentationPlan(("codec.core.encode(i64)",), tmp_path / "inst", tmp_path / "c.jsonl")
    with pytest.raises(InstrumentationError, match="write conflict"):
        instrumenter.instrument(root, plan)
    instrumenter.instrument(root, plan, overwrite=True)
    assert not (tmp_path / "inst" / "keep.txt").exists()
    with pytest.raises(InstrumentationError, match="differ"):
        instrumenter.instrument(root, InstrumentationPlan((), root, tmp_path / "c.jsonl"))


def test_unknown_target(tmp_path):
    plan = InstrumentationPlan(("codec.core.nope(i64)",), tmp_path / "inst", tmp_path / "c.jsonl")
    with pytest.raises(InstrumentationError, match="not found"):
        instrumenter.instrument(fixture_path("codec"), plan)


def test_build_check_lists_offenders(tmp_path):
    (tmp_path / "ok.py").write_text("x = 1\n")
    (tmp_path / "bad.py").write_text("def f(:\n")
    with pytest.raises(InstrumentationError) as info:
        instrumenter.build_check(tmp_path)
    assert "bad.py:1" in info.value.log_text


def test_run_captured_attributes_test_ids(tmp_path):
    root = fixture_path("radio_form")
    a = analyze(root)
    plan = InstrumentationPlan(tuple(a.targets), tmp_path / "inst", tmp_path / "cap.jsonl")
    instrumenter.instrument(root, plan, a.index)
    summary = instrumenter.run_captured(plan.output_root, "test",
                                        "{python} -m pytest -q -p no:cacheprovider tests", plan.capture_sink)
    assert summary.returncode == 0 and summary.records == 1
    recs = store.load(plan.capture_sink)
    assert [(r.test_id, r.tuple) for r in recs] == [("tests/test_form.py::test_radio_buttons", ("s:b",))]
    assert all(r.context == "test" for r in recs)
    field = instrumenter.run_captured(plan.output_root, "field", "{python} workload.py", plan.capture_sink)
    assert field.records == 13
    recs = store.load(plan.capture_sink)
    assert len(recs) == 14 and sum(r.context == "field" for r in recs) == 13


def test_run_captured_warns_and_keeps_log(tmp_path, make_project):
    root = make_project({
        "m.py": "def f(x: int) -> int:\n    return x\n",
        "tests/test_m.py": "from m import f\n\n\ndef test_bad():\n    assert f(1) == 2\n",
    })
    a = analyze(root)
    plan = InstrumentationPlan(tuple(a.targets), tmp_path / "inst", tmp_path / "cap.jsonl")
    instrumenter.instrument(root, plan, a.index)
    summary = instrumenter.run_captured(plan.output_root, "test", "{python} -m pytest -q tests", plan.capture_sink)
    assert summary.returncode != 0
    assert summary.failing_tests == ["tests/test_m.py::test_bad"]
    assert summary.warnings and summary.records == 1
    with pytest.raises(ValueError):
        instrumenter.run_captured(plan.output_root, "prod", "x", plan.capture_sink)


# -- runtime emitter ----------------------------------------------------------


def test_emit_without_sink_is_silent(monkeypatch, tmp_path):
    monkeypatch.delenv("PUTFORGE_SINK", raising=False)
    runtime.emit("m.f(i64)", (1,))


def test_emit_marks_unserializable_and_caps(monkeypatch, tmp_path):
    sink = tmp_path / "log.jsonl"
    monkeypatch.setenv("PUTFORGE_SINK", str(sink))
    monkeypatch.setenv("PUTFORGE_CONTEXT", "test")
    monkeypatch.setenv("PUTFORGE_TEST_ID", "t.py::test_x")
    monkeypatch.setenv("PUTFORGE_MAX_RECORDS", "3")
    for v in (1, "nope", 2 ** 70, 4, 5):
        runtime.emit("capped.f(i64)", (v,))
    lines = sink.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert list(first) == ["t", "a", "c", "id", "n"]
    assert [json.loads(x)["a"] for x in lines] == [["i64:1"], ["?"], ["?"]]
    assert first["id"] == "t.py::test_x" and first["c"] == "test"


def test_emit_concurrent_processes_never_interleave(tmp_path):
    sink = tmp_path / "log.jsonl"
    code = ("import sys\nfrom putforge import runtime\n"
            "for i in range(2000):\n    runtime.emit('p.f(text)', ('x' * 500 + str(i),))\n")
    env = dict(os.environ, PUTFORGE_SINK=str(sink), PUTFORGE_CONTEXT="field")
    procs = [subprocess.Popen([sys.executable, "-c", code], env=env) for _ in range(4)]
    assert all(p.wait() == 0 for p in procs)
    diags: list[str] = []
    recs = store.load(sink, diagnostics=diags)
    assert diags == [] and len(recs) == 8000


def test_index_reused_for_instrument(tmp_path):
    root = fixture_path("geometry")
    idx = ProjectIndex.build(root)
    plan = InstrumentationPlan(("shapes.rect.Rect.scale(f64)",), tmp_path / "i", tmp_path / "c.jsonl")
    res = instrumenter.instrument(root, plan, idx)
    assert res.files == ["shapes/rect.py"]

"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible with
``-s`` or in the captured-output section) and enforces its time limit.
"""
from __future__ import annotations

import ast
import json
import random
import shutil
import struct
import time
import uuid
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from putforge import canonical, code_model, instrumenter, pipeline, runtime, store, subject
from putforge.config import load_config
from putforge.fixtures import fixture_path, list_fixtures
from putforge.kinds import ScalarKind
from putforge.runner import DECOUPLED, FALSIFIABLY, ILL_FORMED, STRONGLY, classify, summarize

FIXTURES = list_fixtures()


@contextmanager
def criterion(request, n: int, title: str, limit: float | None = None):
    capman = request.config.pluginmanager.getplugin("capturemanager")
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert limit is None or elapsed < limit, f"took {elapsed:.1f}s, limit {limit}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        budget = f" (limit {limit:g}s)" if limit else ""
        line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title} [{elapsed:.2f}s{budget}]"
        with capman.global_and_fixture_disabled():
            print("\n" + line)


def load(ws: Path, name: str):
    return json.loads((ws / name).read_text(encoding="utf-8"))


# 1 -------------------------------------------------------------------------------


def test_alpha_times_beta(request, tmp_path):
    with criterion(request, 1, "2 targets x 2 assertions -> exactly 4 PUTs", 30):
        cfg = load_config(fixture_path("geometry"), {"workspace": str(tmp_path / "ws")})
        pipeline.analyze(cfg)
        pipeline.capture(cfg, "test")
        pipeline.capture(cfg, "field")
        pipeline.generate(cfg)
        plans = load(cfg.workspace, "plans.json")["plans"]
        (p,) = [p for p in plans if p["cut"] == "tests/test_rect.py::test_rect_transform"]
        assert (p["alpha"], p["beta"]) == (2, 2)
        puts = load(cfg.workspace, "puts.json")
        assert len(puts) == 4
        defs = []
        for f in (cfg.workspace / "puts-project" / "generated-puts").rglob("*.py"):
            tree = ast.parse(f.read_text(encoding="utf-8"))
            defs += [n.name for n in ast.walk(tree) if isinstance(n, ast.FunctionDef) and "_PUT_" in n.name]
        assert len(defs) == 4


# 2 -------------------------------------------------------------------------------


def test_radio_form_reenactment(request, tmp_path):
    with criterion(request, 2, "radio_form: falsifiably {b,c}, strongly {b}", 60):
        cfg = load_config(fixture_path("radio_form"), {"workspace": str(tmp_path / "ws")})
        pipeline.run_all(cfg)
        target = "radio.form.RadioButton.select_option(text)"
        union = store.loads_unions((cfg.workspace / "union.json").read_text())[target]
        assert len(union.tuples) == 12 and union.originals() == [("s:b",)]
        providers = load(cfg.workspace, "providers.json")
        classes = load(cfg.workspace, "classification.json")
        got = []
        for pid, c in classes.items():
            if f"@{target}#" not in pid:
                continue
            (prov,) = [p for p in providers.values() if pid in p["put_ids"]]
            values = {canonical.decode(ScalarKind.TEXT, prov["rows"][r][0]) for r in c["pass_rows"]}
            got.append((c["category"], frozenset(values)))
        assert sorted(got) == sorted([(FALSIFIABLY, frozenset({"b", "c"})), (STRONGLY, frozenset({"b"}))])


# 3 -------------------------------------------------------------------------------


def brute_force(n, originals, passing):
    ill = any(r not in passing for r in originals)
    dec = all(r in passing for r in range(n)) and not ill
    strong = not ill and not dec and all((r in originals) == (r in passing) for r in range(n))
    extra = [r for r in passing if r not in originals]
    falsifying = [r for r in range(n) if r not in passing]
    fals = not ill and bool(extra) and bool(falsifying)
    assert [ill, dec, strong, fals].count(True) == 1
    return ILL_FORMED if ill else DECOUPLED if dec else STRONGLY if strong else FALSIFIABLY


def test_classifier_oracle(request):
    with criterion(request, 3, "classifier agrees with brute force on 5000 instances", 10):
        rnd = random.Random(20240607)
        seen = set()
        for _ in range(5000):
            n = rnd.randint(1, 50)
            originals = set(rnd.sample(range(n), rnd.randint(1, min(n, 3))))
            mode = rnd.random()
            if mode < 0.2:
                passing = set(range(n))
            elif mode < 0.4:
                passing = set(originals)
            else:
                passing = {r for r in range(n) if rnd.random() < 0.5}
            outs = ["pass" if r in passing else rnd.choice(["fail", "error", "timeout"]) for r in range(n)]
            want = brute_force(n, originals, passing)
            assert classify(outs, originals).category == want
            seen.add(want)
        assert seen == {ILL_FORMED, DECOUPLED, STRONGLY, FALSIFIABLY}


# 4 -------------------------------------------------------------------------------

PER_KIND = 10_000


def random_text(rnd: random.Random, n: int) -> str:
    pools = [(0x20, 0x7E), (0x00, 0x1F), (0x80, 0x7FF), (0x800, 0xFFFF), (0xD800, 0xDFFF), (0x10000, 0x10FFFF)]
    out = []
    for _ in range(n):
        lo, hi = rnd.choice(pools)
        out.append(chr(rnd.randint(lo, hi)))
    return "".join(out)


def f64_bits(rnd):
    specials = [0, 1 << 63, 0x7FF0000000000000, 0xFFF0000000000000, 0x7FF8000000000000,
                0xFFF8000000000000, 0x7FF0000000000001, 0x7FF4000000000000, 0x0000000000000001,
                0x000FFFFFFFFFFFFF, 0x7FEFFFFFFFFFFFFF]
    return specials + [rnd.getrandbits(64) for _ in range(PER_KIND - len(specials))]


def f32_bits(rnd):
    specials = [0, 1 << 31, 0x7F800000, 0xFF800000, 0x7FC00000, 0xFFC00000, 0x7F800001, 0x7FA00000,
                0x00000001, 0x007FFFFF, 0x7F7FFFFF]
    return specials + [rnd.getrandbits(32) for _ in range(PER_KIND - len(specials))]


def values_for(kind: ScalarKind, rnd: random.Random) -> list:
    if kind is ScalarKind.BOOL:
        return [True, False] + [rnd.random() < 0.5 for _ in range(PER_KIND - 2)]
    if kind.is_integer:
        lo, hi = kind.int_range()
        return [lo, hi, 0, lo + 1, hi - 1] + [rnd.randint(lo, hi) for _ in range(PER_KIND - 5)]
    if kind is ScalarKind.F64:
        return [struct.unpack(">d", struct.pack(">Q", b))[0] for b in f64_bits(rnd)]
    if kind is ScalarKind.F32:
        return list(np.array(f32_bits(rnd), dtype=np.uint32).view(np.float32))
    if kind is ScalarKind.CHAR:
        return ["\x00", "\n", "\udfff", "\U0010ffff"] + [random_text(rnd, 1) for _ in range(PER_KIND - 4)]
    texts = ["", "\x00\x1f\x7f", "\ud800", "é中😀", '"\\'] + [random_text(rnd, rnd.randint(0, 12))
                                                           for _ in range(PER_KIND - 5)]
    if kind is ScalarKind.NULLABLE_TEXT:
        texts[-1] = None
        texts[-2] = None
    return texts


def bit_image(kind: ScalarKind, value):
    if kind is ScalarKind.F64:
        return struct.pack(">d", value)
    if kind is ScalarKind.F32:
        assert isinstance(value, np.float32)
        return np.array([value], dtype=np.float32).view(np.uint32)[0].item()
    if kind in (ScalarKind.BOOL,) or kind.is_integer:
        return (type(value) is bool, int(value))
    return value


def test_canonical_round_trip(request, tmp_path, monkeypatch):
    with criterion(request, 4, "10,000 scalars per kind survive emit -> log -> load -> decode", 10):
        rnd = random.Random(1234)
        sink = tmp_path / "capture.jsonl"
        monkeypatch.setenv("PUTFORGE_SINK", str(sink))
        monkeypatch.setenv("PUTFORGE_CONTEXT", "field")
        monkeypatch.setenv("PUTFORGE_MAX_RECORDS", str(10 * PER_KIND))
        tag = uuid.uuid4().hex[:8]
        targets, values = {}, {}
        for kind in ScalarKind:
            tid = f"acc{tag}.f_{kind.name.lower()}({kind.value})"
            targets[tid] = (kind,)
            values[tid] = values_for(kind, rnd)
            for v in values[tid]:
                runtime.emit(tid, (v,))
        diags: list[str] = []
        records = store.load(sink, targets, diags)
        assert diags == []
        by_target: dict[str, list] = {}
        for r in records:
            by_target.setdefault(r.target, []).append(r)
        for tid, vals in values.items():
            (kind,) = targets[tid]
            got = by_target[tid]
            assert len(got) == len(vals), tid
            assert all(r.tuple[0] != canonical.UNSERIALIZABLE for r in got), tid
            for rec, v in zip(got, vals):
                back = canonical.decode(kind, rec.tuple[0])
                assert bit_image(kind, back) == bit_image(kind, v), (tid, v, rec.tuple)
            # dedup is bitwise: equal images collapse, distinct ones survive
            union = store.build_union(got, {})[tid]
            assert len(union.tuples) == len({bit_image(kind, v) for v in vals}), tid
        nan = float("nan")
        assert canonical.dedup_key((canonical.canonicalize(ScalarKind.F64, nan),)) == \
            canonical.dedup_key((canonical.canonicalize(ScalarKind.F64, float("nan")),))
        assert canonical.canonicalize(ScalarKind.F64, -0.0) != canonical.canonicalize(ScalarKind.F64, 0.0)
        assert canonical.canonicalize(ScalarKind.F32, np.float32(-0.0)) != \
            canonical.canonicalize(ScalarKind.F32, np.float32(0.0))


# 5 -------------------------------------------------------------------------------


def test_instrumentation_preserves_verdicts(request, tmp_path):
    with criterion(request, 5, "test verdicts identical before and after instrumentation", 120):
        for name in FIXTURES:
            root = fixture_path(name)
            cfg = load_config(root, {"workspace": str(tmp_path / name / "ws")})
            plain = tmp_path / name / "plain"
            subject.copy_project(root, plain)
            before = subject.run_test_suite(plain, cfg.test_command)
            a = code_model.analyze(root)
            sink = tmp_path / name / "capture.jsonl"
            plan = instrumenter.InstrumentationPlan(tuple(a.targets), tmp_path / name / "instr", sink, "test")
            instrumenter.instrument(root, plan, a.index)
            after = subject.run_test_suite(plan.output_root, cfg.test_command,
                                           PUTFORGE_SINK=str(sink), PUTFORGE_CONTEXT="test")
            assert before and before == after, name
            assert len(store.load(sink)) > 0, name


# 6 -------------------------------------------------------------------------------


def asserts_in(path: Path, name: str) -> int:
    tree = ast.parse(path.read_text(encoding="utf-8"))
    fn = next(n for n in ast.walk(tree) if isinstance(n, ast.FunctionDef) and n.name == name)
    return sum(isinstance(n, ast.Assert) for n in ast.walk(fn))


def test_finalization_soundness(request, fixture_runs, tmp_path):
    with criterion(request, 6, "finalized PUTs re-run 100% green; identical providers merged", 60):
        merged_seen = False
        for name in FIXTURES:
            res = fixture_runs(name)
            ws = res.workspace
            fin = load(ws, "finalized.json")
            classes = load(ws, "classification.json")
            assert fin["green"] and not fin["compile_errors"], name
            assert all(r["o"] == "pass" for r in fin["rerun"]), name
            assert len(fin["rerun"]) == sum(p["provider_size"] for p in fin["puts"]), name
            sources = [pid for p in fin["puts"] for pid in p["merged_from"]]
            assert sorted(sources) == sorted(pid for pid, c in classes.items() if c["category"] == FALSIFIABLY)
            for p in fin["puts"]:
                for pid in p["merged_from"]:
                    assert len(classes[pid]["pass_rows"]) == p["provider_size"]
                if len(p["merged_from"]) > 1:
                    merged_seen = True
                    path = ws / "puts-project" / p["file"]
                    assert asserts_in(path, p["name"]) == len(p["merged_from"])
            if not fin["puts"]:
                continue
            # independent re-run: plain pytest over the finalized files in a project copy
            direct = tmp_path / name
            subject.copy_project(fixture_path(name), direct)
            shutil.copytree(ws / "puts-project" / "finalized-puts", direct / "finalized-puts")
            verdicts = subject.run_test_suite(direct, "{python} -m pytest -q -p no:cacheprovider finalized-puts")
            assert len(verdicts) == len(fin["rerun"]), (name, verdicts)
            assert set(verdicts.values()) == {"pass"}, (name, verdicts)
        assert merged_seen


# 7 -------------------------------------------------------------------------------


def test_coverage_gain_arithmetic(request):
    with criterion(request, 7, "originals=2, union=2694 -> factor 1347, 3 orders", 1):
        g = store.coverage_gain(2694, 2)
        assert (g.factor, g.orders_of_magnitude) == (1347, 3)
        target = "m.f(i64)"
        recs = [store.CaptureRecord(target, (f"i64:{i}",), "field", None, i) for i in range(2692)]
        originals = [("i64:-1",), ("i64:-2",)]
        unions = store.build_union(recs, {target: originals})
        assert len(unions[target].tuples) == 2694
        (row,) = summarize([], {}, unions)["targets"]
        assert (row["original_count"], row["union_count"], row["factor"], row["orders_of_magnitude"]) == \
            (2, 2694, 1347, 3)


# 8 -------------------------------------------------------------------------------


def test_report_partition(request, fixture_runs):
    with criterion(request, 8, "strongly + falsifiably + decoupled == executed - ill-formed"):
        for name in FIXTURES:
            rep = load(fixture_runs(name).workspace, "report.json")
            for row in rep["modules"] + [rep["totals"]]:
                assert row["strongly"] + row["falsifiably"] + row["decoupled"] == \
                    row["executed"] - row["ill_formed"], (name, row)
            assert rep["totals"]["executed"] > 0, name


# 9 -------------------------------------------------------------------------------

STABLE = ("union.json", "puts.json", "classification.json")


def test_determinism(request, fixture_runs):
    with criterion(request, 9, "two full runs give byte-identical union/puts/classification"):
        for name in FIXTURES:
            ws = fixture_runs(name).workspace
            first = {f: (ws / f).read_bytes() for f in STABLE}
            pipeline.run_all(load_config(fixture_path(name), {"workspace": str(ws)}))
            second = {f: (ws / f).read_bytes() for f in STABLE}
            for f in STABLE:
                assert first[f] == second[f], (name, f)

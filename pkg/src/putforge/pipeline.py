"""Pipeline stages over a configured project; every artifact goes to the workspace."""
from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from . import code_model, generator, instrumenter, runner, store
from .code_model import Analysis, CodeModelError
from .config import Config
from .generator import FINALIZED_DIR, GENERATED_DIR

log = logging.getLogger(__name__)

PUTS_PROJECT = "puts-project"
INSTRUMENTED = "instrumented"
MODES = ("test", "field")


class MissingStageError(Exception):
    """A prerequisite artifact is absent."""


class BuildError(Exception):
    """The subject (or its instrumented copy) does not parse or compile."""

    def __init__(self, message: str, log_text: str = ""):
        super().__init__(message)
        self.log_text = log_text


@dataclass
class StageResult:
    stage: str
    summary: dict
    warnings: list[str] = field(default_factory=list)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path, stage: str):
    if not path.exists():
        raise MissingStageError(f"{path.name} not found; run `{stage}` first")
    return json.loads(path.read_text(encoding="utf-8"))


def capture_log(cfg: Config, mode: str) -> Path:
    return cfg.workspace / f"capture.{mode}.jsonl"


def run_analysis(cfg: Config) -> Analysis:
    try:
        return code_model.analyze(cfg.project_root, cfg.analysis_exclude, cfg.assertion_allow_list)
    except CodeModelError as exc:
        raise BuildError(str(exc)) from None


# -- stages --------------------------------------------------------------------


def analyze(cfg: Config) -> StageResult:
    a = run_analysis(cfg)
    cfg.workspace.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.workspace / "targets.json", [t.to_json() for t in a.targets.values()])
    _write_json(cfg.workspace / "tests.json", [t.to_json() for t in a.tests])
    summary = {
        "files": a.report.files,
        "tests": len(a.tests),
        "targets": len(a.targets),
        "target_call_sites": sum(len(t.target_calls) for t in a.tests),
        "excluded_calls": dict(sorted(a.report.excluded_calls.items())),
        "flagged_assertions": a.report.flagged_assertions,
    }
    return StageResult("analyze", summary, list(a.report.notes))


def capture(cfg: Config, mode: str, command: str | None = None) -> StageResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    targets = _read_json(cfg.workspace / "targets.json", "analyze")
    command = command or (cfg.test_command if mode == "test" else cfg.workload_command)
    if not command:
        raise MissingStageError("no workload_command configured for field capture")
    a = run_analysis(cfg)
    plan = instrumenter.InstrumentationPlan(
        tuple(t["id"] for t in targets), cfg.workspace / INSTRUMENTED, capture_log(cfg, mode), mode)
    try:
        instrumenter.instrument(cfg.project_root, plan, a.index, overwrite=True)
    except instrumenter.InstrumentationError as exc:
        raise BuildError(str(exc), exc.log_text) from None
    sink = capture_log(cfg, mode)
    sink.unlink(missing_ok=True)
    summary = instrumenter.run_captured(plan.output_root, mode, command, sink, cfg.max_records)
    sink.touch()
    return StageResult("capture", {
        "mode": mode,
        "records": summary.records,
        "exit_status": summary.returncode,
        "failing_tests": summary.failing_tests,
    }, summary.warnings)


def _copy_conftests(cfg: Config, out_root: Path, files) -> None:
    """Mirror conftest.py files along the original test directories."""
    dirs = set()
    for rel in files:
        parts = PurePosixPath(rel).parts[1:-1]
        for i in range(1, len(parts) + 1):
            dirs.add(PurePosixPath(*parts[:i]))
    for d in sorted(dirs):
        src = cfg.project_root / d / "conftest.py"
        if src.exists():
            dst = out_root / d / "conftest.py"
            dst.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, dst)


def generate(cfg: Config) -> StageResult:
    logs = [capture_log(cfg, m) for m in MODES if capture_log(cfg, m).exists()]
    if not logs:
        raise MissingStageError("no capture log found; run `capture` first")
    a = run_analysis(cfg)
    kinds = {t: m.params for t, m in a.targets.items()}
    diagnostics: list[str] = []
    records = [r for p in logs for r in store.load(p, kinds, diagnostics)]
    gen = generator.generate(a, records, cap=cfg.provider_row_cap, per_site=cfg.per_site,
                             adapter=cfg.adapter)

    out_root = cfg.workspace / PUTS_PROJECT / GENERATED_DIR
    shutil.rmtree(out_root, ignore_errors=True)
    for unit in gen.units:
        path = cfg.workspace / PUTS_PROJECT / unit.file
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(unit.source, encoding="utf-8")
    _copy_conftests(cfg, out_root, [u.file for u in gen.units])

    (cfg.workspace / "union.json").write_text(store.dumps_unions(gen.unions), encoding="utf-8")
    _write_json(cfg.workspace / "puts.json", gen.manifest())
    _write_json(cfg.workspace / "providers.json", gen.providers())
    plans = [{"cut": p.cut, "alpha": p.alpha, "beta": p.beta, "expected_put_count": p.expected_put_count,
              "targets": list(p.targets)} for p in gen.plans]
    _write_json(cfg.workspace / "plans.json", {"plans": plans, "notes": diagnostics + gen.notes})
    summary = {
        "records": len(records),
        "targets_with_union": len(gen.unions),
        "puts": len(gen.puts),
        "excluded_by_construction": len(gen.excluded),
        "units": len(gen.units),
    }
    warnings = diagnostics[:]
    if not gen.puts:
        warnings.append("0 PUTs: no target's union exceeds its original arguments")
    return StageResult("generate", summary, warnings)


def classify(cfg: Config) -> StageResult:
    manifest = _read_json(cfg.workspace / "puts.json", "generate")
    providers = _read_json(cfg.workspace / "providers.json", "generate")
    puts_root = cfg.workspace / PUTS_PROJECT
    tasks = runner.tasks_from_manifest(manifest)
    result = runner.execute(cfg.project_root, puts_root, tasks, timeout=cfg.per_row_timeout,
                            jobs=cfg.jobs, retries=cfg.retries, parallel_rows=cfg.parallel_rows,
                            skip=cfg.workspace, generated_dir=GENERATED_DIR)
    order = {e["put_id"]: i for i, e in enumerate(manifest)}
    verdicts = sorted(result.verdicts, key=lambda v: (order[v.put], v.row))
    with open(cfg.workspace / "verdicts.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(v.to_json_line() for v in verdicts)
    classes = runner.classify_all(manifest, providers, result.outcomes())
    (cfg.workspace / "classification.json").write_text(runner.dumps_classification(classes), encoding="utf-8")
    _write_json(cfg.workspace / "execution.json", {
        "compile_errors": dict(sorted(result.compile_errors.items())),
        "excluded": sorted(result.excluded),
    })

    a = run_analysis(cfg)
    fin = runner.finalize(a, manifest, providers, classes, cfg.adapter)
    fin_root = puts_root / FINALIZED_DIR
    shutil.rmtree(fin_root, ignore_errors=True)
    for unit in fin.units:
        path = puts_root / unit.file
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(unit.source, encoding="utf-8")
    _copy_conftests(cfg, fin_root, [u.file for u in fin.units])
    if fin.units:
        rerun = runner.execute(cfg.project_root, puts_root, runner.finalized_tasks(fin),
                               timeout=cfg.per_row_timeout, jobs=cfg.jobs, retries=cfg.retries,
                               skip=cfg.workspace, generated_dir=FINALIZED_DIR)
        fin.verdicts = rerun.verdicts
        fin.compile_errors = rerun.compile_errors
    _write_json(cfg.workspace / "finalized.json", {
        "puts": fin.manifest(),
        "rerun": [{"put": v.put, "row": v.row, "o": v.outcome} for v in
                  sorted(fin.verdicts, key=lambda v: (v.put, v.row))],
        "compile_errors": dict(sorted(fin.compile_errors.items())),
        "green": fin.green,
    })
    warnings = [f"does not compile: {m}" for m in result.compile_errors.values()]
    if fin.units and not fin.green:
        warnings.append("finalized PUTs are not green on their pruned providers")
    rep = report(cfg)
    counts = {c: sum(1 for x in classes.values() if x.category == c) for c in runner.CATEGORIES}
    return StageResult("classify", {"executed": len(classes), "verdicts": len(verdicts), **counts,
                                    "finalized": len(fin.puts), "merged": len(fin.merged),
                                    "finalized_green": fin.green}, warnings + rep.warnings)


def report(cfg: Config) -> StageResult:
    manifest = _read_json(cfg.workspace / "puts.json", "generate")
    classes_doc = _read_json(cfg.workspace / "classification.json", "classify")
    unions = store.loads_unions((cfg.workspace / "union.json").read_text(encoding="utf-8"))
    plans_doc = _read_json(cfg.workspace / "plans.json", "generate")
    execution = _read_json(cfg.workspace / "execution.json", "classify")
    fin_doc = _read_json(cfg.workspace / "finalized.json", "classify")
    classes = {
        pid: runner.Classification(pid, c["category"], frozenset(c["pass_rows"]), frozenset(c["original_rows"]),
                                   c["row_count"], c["errors"], c["timeouts"])
        for pid, c in classes_doc.items()
    }
    fin_summary = {
        "puts": len(fin_doc["puts"]),
        "merged": sum(1 for p in fin_doc["puts"] if len(p["merged_from"]) > 1),
        "rows": len(fin_doc["rerun"]),
        "green": fin_doc["green"],
    }
    doc = runner.summarize(manifest, classes, unions, plans_doc["plans"], execution["excluded"],
                           notes=plans_doc["notes"])
    doc["finalized"] = fin_summary
    _write_json(cfg.workspace / "report.json", doc)
    (cfg.workspace / "report.md").write_text(runner.render_report_md(doc), encoding="utf-8")
    return StageResult("report", doc["totals"])


def run_all(cfg: Config) -> list[StageResult]:
    out = [analyze(cfg), capture(cfg, "test")]
    if cfg.workload_command:
        out.append(capture(cfg, "field"))
    out += [generate(cfg), classify(cfg)]
    return out

"""Execute generated PUTs row by row, classify their oracles, finalize.

Each PUT runs in its own pytest process inside a private copy of the
subject project; the pytest plugin gives every row a fresh working
directory. Row identity travels in the parametrize id (``r0007``).
"""
from __future__ import annotations

import json
import logging
import os
import re
import shutil
import tempfile
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Iterable, Mapping, Sequence

from . import subject
from .code_model import Analysis, TestCase
from .generator import (
    FINALIZED_DIR, ArgumentProvider, PutSpec, derive_put, put_id, render_unit,
    sites_to_parameterize, unique_name, module_level_names, unit_path,
)
from .store import CaptureUnion, coverage_gain

log = logging.getLogger(__name__)

OUTCOMES = ("pass", "fail", "error", "timeout")
STRONGLY = "strongly-coupled"
DECOUPLED = "decoupled"
FALSIFIABLY = "falsifiably-coupled"
ILL_FORMED = "ill-formed"
CATEGORIES = (STRONGLY, DECOUPLED, FALSIFIABLY, ILL_FORMED)
DEFAULT_TIMEOUT = 30.0
ROW_WORKERS = 4
_ROW_RE = re.compile(r"\[r(\d+)\]$")


class ClassificationError(Exception):
    pass


@dataclass(frozen=True)
class Verdict:
    put: str
    row: int
    outcome: str
    attempts: int = 1

    def to_json_line(self) -> str:
        return json.dumps({"put": self.put, "row": self.row, "o": self.outcome}) + "\n"


@dataclass(frozen=True)
class Classification:
    put: str
    category: str
    pass_rows: frozenset
    original_rows: frozenset
    row_count: int
    errors: int = 0
    timeouts: int = 0

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "pass_rows": sorted(self.pass_rows),
            "original_rows": sorted(self.original_rows),
            "row_count": self.row_count,
            "errors": self.errors,
            "timeouts": self.timeouts,
        }


def classify(outcomes: Sequence[str] | Mapping[int, str], original_rows: Iterable[int],
             row_count: int | None = None, put: str = "") -> Classification:
    """Category of one PUT from its per-row outcomes."""
    if not isinstance(outcomes, Mapping):
        outcomes = dict(enumerate(outcomes))
    n = len(outcomes) if row_count is None else row_count
    originals = frozenset(original_rows)
    if n <= 0:
        raise ClassificationError(f"{put}: no rows")
    missing = [r for r in range(n) if r not in outcomes]
    if missing:
        raise ClassificationError(f"{put}: missing verdicts for rows {missing}")
    if not originals:
        raise ClassificationError(f"{put}: no original rows")
    if not all(0 <= r < n for r in originals):
        raise ClassificationError(f"{put}: original rows out of range")
    bad = [o for o in outcomes.values() if o not in OUTCOMES]
    if bad:
        raise ClassificationError(f"{put}: unknown outcome {bad[0]!r}")
    passing = frozenset(r for r in range(n) if outcomes[r] == "pass")
    if not originals <= passing:
        category = ILL_FORMED
    elif len(passing) == n:
        category = DECOUPLED
    elif passing == originals:
        category = STRONGLY
    else:
        category = FALSIFIABLY
    counts = Counter(outcomes[r] for r in range(n))
    return Classification(put, category, passing, originals, n, counts["error"], counts["timeout"])


# -- execution ---------------------------------------------------------------


@dataclass(frozen=True)
class PutTask:
    put: str
    file: str                     # relative to the project copy
    nodeid: str                   # without the row suffix
    rows: int


@dataclass
class ExecutionResult:
    verdicts: list[Verdict] = field(default_factory=list)
    compile_errors: dict[str, str] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)

    def outcomes(self) -> dict[str, dict[int, str]]:
        out: dict[str, dict[int, str]] = defaultdict(dict)
        for v in self.verdicts:
            out[v.put][v.row] = v.outcome
        return dict(out)


def tasks_from_manifest(entries: Iterable[dict]) -> list[PutTask]:
    tasks = []
    for e in entries:
        if e.get("file") is None:
            continue
        parts = [e["file"]] + ([e["class"]] if e.get("class") else []) + [e["name"]]
        tasks.append(PutTask(e["put_id"], e["file"], "::".join(parts), e["provider_size"]))
    return tasks


def _row_nodeid(task: PutTask, row: int) -> str:
    return f"{task.nodeid}[r{row:04d}]"


def _run_cells(workdir: Path, nodeids: list[str], timeout: float, hard_timeout: float,
               extra_paths: Sequence[str]) -> tuple[dict[str, str], bool]:
    sink = Path(tempfile.mkstemp(prefix="putforge-verdicts-", suffix=".jsonl")[1])
    env = subject.subject_env(
        workdir,
        PUTFORGE_VERDICTS=str(sink),
        PUTFORGE_TIMEOUT=str(timeout),
        PUTFORGE_ISOLATE=str(workdir),
    )
    env["PYTHONPATH"] = os.pathsep.join([*(str(workdir / p) for p in extra_paths), env["PYTHONPATH"]])
    cmd = subject.expand_command(["{python}", "-m", "pytest", "-q", "-p", "no:cacheprovider",
                                  "--rootdir", str(workdir), *nodeids])
    res = subject.run(cmd, workdir, env, hard_timeout)
    verdicts = subject.read_verdicts(sink)
    sink.unlink(missing_ok=True)
    return verdicts, res.timed_out


def _original_test_dir(task: PutTask, generated_dir: str) -> str:
    parts = PurePosixPath(task.file).parts
    if parts and parts[0] == generated_dir:
        parts = parts[1:]
    return str(PurePosixPath(*parts).parent) if len(parts) > 1 else "."


def _execute_task(task: PutTask, project_copy: Path, timeout: float, retries: int,
                  parallel_rows: bool, generated_dir: str) -> list[Verdict]:
    work = Path(tempfile.mkdtemp(prefix="putforge-put-"))
    try:
        root = work / "project"
        shutil.copytree(project_copy, root, symlinks=True)
        extra = [_original_test_dir(task, generated_dir)]
        got: dict[int, str] = {}
        attempts: Counter = Counter()

        def absorb(verdicts: Mapping[str, str]) -> None:
            for nodeid, outcome in verdicts.items():
                m = _ROW_RE.search(nodeid)
                if m and nodeid.startswith(task.nodeid + "["):
                    row = int(m.group(1))
                    if row < task.rows:
                        got[row] = outcome
                        attempts[row] += 1

        def single(row: int) -> None:
            verdicts, timed_out = _run_cells(root, [_row_nodeid(task, row)], timeout, timeout + 30, extra)
            absorb(verdicts)
            if _row_nodeid(task, row) not in verdicts:
                got[row] = "timeout" if timed_out else "error"
                attempts[row] += 1

        def chunk(rows: range) -> None:
            nodeids = [task.nodeid] if len(rows) == task.rows else [_row_nodeid(task, r) for r in rows]
            verdicts, _ = _run_cells(root, nodeids, timeout, len(rows) * timeout + 60, extra)
            absorb(verdicts)
            for row in rows:
                if row not in got:
                    single(row)

        # parallel rows: one process per contiguous slice, a slice per worker
        workers = min(ROW_WORKERS, task.rows) if parallel_rows else 1
        step = -(-task.rows // workers)
        slices = [range(i, min(i + step, task.rows)) for i in range(0, task.rows, step)]
        with ThreadPoolExecutor(max_workers=len(slices)) as pool:
            list(pool.map(chunk, slices))
        for _ in range(retries):
            for row in range(task.rows):
                if got[row] != "pass":
                    single(row)
        return [Verdict(task.put, r, got[r], attempts[r]) for r in range(task.rows)]
    finally:
        shutil.rmtree(work, ignore_errors=True)


def execute(project_root, puts_root, tasks: Sequence[PutTask], timeout: float = DEFAULT_TIMEOUT,
            jobs: int = 1, retries: int = 0, parallel_rows: bool = False,
            skip: Path | None = None, generated_dir: str = "generated-puts") -> ExecutionResult:
    """Run every row of every PUT task.

    ``puts_root`` holds the generated files under paths matching the task
    files; it is overlaid onto a copy of ``project_root``.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    result = ExecutionResult()
    puts_root = Path(puts_root)
    runnable = []
    for task in tasks:
        if task.file in result.compile_errors:
            result.excluded.append(task.put)
            continue
        try:
            compile((puts_root / task.file).read_bytes(), task.file, "exec", dont_inherit=True)
        except SyntaxError as exc:
            result.compile_errors[task.file] = f"{task.file}:{exc.lineno}:{exc.offset}: {exc.msg}"
            result.excluded.append(task.put)
            continue
        runnable.append(task)
    for file, msg in sorted(result.compile_errors.items()):
        log.warning("generated unit does not compile, its PUTs are excluded: %s", msg)

    staging = Path(tempfile.mkdtemp(prefix="putforge-exec-"))
    try:
        copy = staging / "project"
        subject.copy_project(Path(project_root), copy, skip=skip)
        shutil.copytree(puts_root, copy, dirs_exist_ok=True)
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            per_task = list(pool.map(
                lambda t: _execute_task(t, copy, timeout, retries, parallel_rows, generated_dir), runnable))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    for verdicts in per_task:
        result.verdicts.extend(verdicts)
    return result


def classify_all(manifest: Sequence[dict], providers: Mapping[str, dict],
                 outcomes: Mapping[str, Mapping[int, str]]) -> dict[str, Classification]:
    out = {}
    for e in manifest:
        if e["put_id"] not in outcomes:
            continue
        flags = providers[e["provider"]]["original_flags"]
        originals = [i for i, f in enumerate(flags) if f]
        out[e["put_id"]] = classify(outcomes[e["put_id"]], originals, len(flags), e["put_id"])
    return out


def dumps_classification(classes: Mapping[str, Classification]) -> str:
    doc = {k: classes[k].to_json() for k in sorted(classes)}
    return json.dumps(doc, indent=1) + "\n"


# -- finalization ------------------------------------------------------------


@dataclass
class FinalizedUnit:
    cut: str
    target: str
    file: str
    groups: list[tuple[ArgumentProvider, list[PutSpec]]]
    merged_from: dict[str, list[str]]           # finalized PUT id -> generated PUT ids
    source: str = ""


@dataclass
class Finalization:
    units: list[FinalizedUnit] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    compile_errors: dict[str, str] = field(default_factory=dict)

    @property
    def puts(self) -> list[PutSpec]:
        return [p for u in self.units for _, puts in u.groups for p in puts]

    @property
    def merged(self) -> list[str]:
        return [pid for u in self.units for pid, src in u.merged_from.items() if len(src) > 1]

    @property
    def green(self) -> bool:
        return (not self.compile_errors and bool(self.verdicts) == bool(self.units)
                and all(v.outcome == "pass" for v in self.verdicts))

    def manifest(self) -> list[dict]:
        out = []
        for u in self.units:
            for prov, puts in u.groups:
                for p in puts:
                    out.append({
                        "put_id": p.id,
                        "merged_from": u.merged_from[p.id],
                        "cut": p.source_cut,
                        "target": p.target,
                        "assertion_indices": list(p.kept_assertions),
                        "provider_size": len(prov.rows),
                        "file": u.file,
                        "name": p.name,
                        "class": tests_class(p.source_cut),
                        "provider": prov.id,
                        "rows": [list(r) for r in prov.rows],
                        "original_flags": list(prov.original_flags),
                    })
        return out


def _site_for(cut: TestCase, target: str, site_index: int | None):
    for idx, site in sites_to_parameterize(cut, site_index is not None):
        if site.target == target and idx == site_index:
            return site
    raise ClassificationError(f"{cut.id}: no call site of {target}")


def finalize(analysis: Analysis, manifest: Sequence[dict], providers: Mapping[str, dict],
             classes: Mapping[str, Classification], adapter: str = "pytest") -> Finalization:
    """Prune falsifying rows and merge PUTs whose pruned providers coincide."""
    tests = {t.id: t for t in analysis.tests}
    by_provider: dict[str, list[dict]] = defaultdict(list)
    for e in manifest:
        c = classes.get(e["put_id"])
        if c is not None and c.category == FALSIFIABLY:
            by_provider[e["provider"]].append(e)
    result = Finalization()
    taken_files: set[str] = set()
    for prov_id in sorted(by_provider):
        entries = sorted(by_provider[prov_id], key=lambda e: e["assertion_index"])
        prov = providers[prov_id]
        cut = tests[entries[0]["cut"]]
        target = entries[0]["target"]
        site_index = entries[0].get("site_index")
        site = _site_for(cut, target, site_index)
        short = analysis.targets[target].short_name
        if site_index is not None:
            short = f"{short}_s{site_index}"
        groups: dict[tuple[int, ...], list[dict]] = {}
        for e in entries:
            groups.setdefault(tuple(sorted(classes[e["put_id"]].pass_rows)), []).append(e)
        names = module_level_names(analysis, cut)
        assertions = {a.index: a for a in cut.assertions}
        module_src = analysis.index.sources[cut.file].data
        unit_groups, merged_from = [], {}
        for k, (rows, members) in enumerate(groups.items()):
            kept = [assertions[e["assertion_index"]] for e in members]
            idx = "_".join(str(a.index) for a in kept)
            spec = derive_put(cut, site, kept, module_src,
                              name=unique_name(f"{cut.name}_PUT_{short}_{idx}", names),
                              target_short=short, site_index=site_index)
            pruned = ArgumentProvider(
                id=f"{prov_id}#" + "+".join(str(a.index) for a in kept),
                name=unique_name(f"provide_{short}_args" + (f"_{k + 1}" if len(groups) > 1 else ""), names),
                target=target,
                put_ids=(spec.id,),
                rows=tuple(tuple(prov["rows"][r]) for r in rows),
                original_flags=tuple(prov["original_flags"][r] for r in rows),
            )
            unit_groups.append((pruned, [spec]))
            merged_from[spec.id] = [e["put_id"] for e in members]
        file = unit_path(cut, short, FINALIZED_DIR, taken_files)
        unit = FinalizedUnit(cut.id, target, file, unit_groups, merged_from)
        unit.source = render_unit(analysis, cut, unit_groups, adapter)
        result.units.append(unit)
    return result


def finalized_tasks(fin: Finalization) -> list[PutTask]:
    tasks = []
    for u in fin.units:
        cls = tests_class(u.cut)
        for prov, puts in u.groups:
            for p in puts:
                parts = [u.file] + ([cls] if cls else []) + [p.name]
                tasks.append(PutTask(p.id, u.file, "::".join(parts), len(prov.rows)))
    return tasks


def tests_class(cut_id: str) -> str | None:
    parts = cut_id.split("::")
    return parts[1] if len(parts) == 3 else None


# -- reporting ---------------------------------------------------------------


def _module_of(cut_id: str) -> str:
    file = cut_id.split("::", 1)[0]
    return str(PurePosixPath(file).with_suffix("")).replace("/", ".")


def summarize(manifest: Sequence[dict], classes: Mapping[str, Classification],
              unions: Mapping[str, CaptureUnion], plans: Sequence[dict] = (),
              excluded: Sequence[str] = (), finalization: Finalization | None = None,
              notes: Sequence[str] = ()) -> dict:
    """Per-module category counts and per-target coverage gain."""
    keys = ("puts", "executed", "ill_formed", "excluded_by_construction", "excluded_by_compile",
            "strongly", "falsifiably", "decoupled", "errors", "timeouts")
    rows: dict[str, Counter] = {}
    excluded = set(excluded)
    field_of = {STRONGLY: "strongly", FALSIFIABLY: "falsifiably", DECOUPLED: "decoupled", ILL_FORMED: "ill_formed"}
    for e in manifest:
        c = rows.setdefault(_module_of(e["cut"]), Counter({k: 0 for k in keys}))
        c["puts"] += 1
        if e.get("ill_formed_by_construction"):
            c["excluded_by_construction"] += 1
        elif e["put_id"] in excluded:
            c["excluded_by_compile"] += 1
        elif e["put_id"] in classes:
            cl = classes[e["put_id"]]
            c["executed"] += 1
            c[field_of[cl.category]] += 1
            c["errors"] += cl.errors
            c["timeouts"] += cl.timeouts
    total = Counter({k: 0 for k in keys})
    for c in rows.values():
        total.update(c)
    targets = []
    for t in sorted(unions):
        u = unions[t]
        gain = coverage_gain(u, u.originals())
        counts = Counter(flag for tup in u.tuples for flag in u.provenance[tup])
        targets.append({"target": t, **gain.to_json(),
                        "test_tuples": counts["test"], "field_tuples": counts["field"]})
    report = {
        "modules": [{"module": m, **{k: rows[m][k] for k in keys}} for m in sorted(rows)],
        "totals": {k: total[k] for k in keys},
        "targets": targets,
        "plans": list(plans),
        "finalized": None,
        "notes": list(notes),
    }
    if finalization is not None:
        report["finalized"] = {
            "puts": len(finalization.puts),
            "merged": len(finalization.merged),
            "rows": len(finalization.verdicts),
            "green": finalization.green,
        }
    return report


def render_report_md(report: dict) -> str:
    lines = ["# PUT classification", "",
             "| Module | PUTs | Executed | Ill-formed | Strongly | Falsifiably | Decoupled |",
             "|---|---:|---:|---:|---:|---:|---:|"]
    for r in report["modules"] + [{"module": "**total**", **report["totals"]}]:
        lines.append(f"| {r['module']} | {r['puts']} | {r['executed']} | {r['ill_formed']} | "
                     f"{r['strongly']} | {r['falsifiably']} | {r['decoupled']} |")
    t = report["totals"]
    lines += ["", f"Excluded before execution: {t['excluded_by_construction']} ill-formed by construction, "
                  f"{t['excluded_by_compile']} in units that do not compile.",
              f"Rows ending in error: {t['errors']}; in timeout: {t['timeouts']}.", "",
              "# Captured arguments", "",
              "| Target | Original | Captured | Factor | Orders of magnitude |",
              "|---|---:|---:|---:|---:|"]
    for r in report["targets"]:
        lines.append(f"| `{r['target']}` | {r['original_count']} | {r['union_count']} | "
                     f"{r['factor']:g} | {r['orders_of_magnitude']} |")
    fin = report.get("finalized")
    if fin:
        lines += ["", "# Finalization", "",
                  f"{fin['puts']} finalized PUTs ({fin['merged']} merged), {fin['rows']} rows re-run, "
                  f"{'all green' if fin['green'] else 'NOT green'}."]
    if report.get("notes"):
        lines += ["", "# Notes", ""] + [f"- {n}" for n in report["notes"]]
    return "\n".join(lines) + "\n"

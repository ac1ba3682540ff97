"""Source instrumentation of target methods and captured runs.

The instrumented copy differs from the subject only by one emitter
statement at the top of each target body (after the docstring, which must
stay the first statement to remain ``__doc__``).
"""
from __future__ import annotations

import ast
import logging
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import subject
from .code_model import ProjectIndex, SourceFile, iter_python_files, module_name

log = logging.getLogger(__name__)

EMITTER_CALL = '__import__("putforge.runtime").runtime.emit'
_EMITTER_RE = re.compile(
    r'(?:^[ \t]*' + re.escape(EMITTER_CALL) + r'\(.*\)\n'
    r'|' + re.escape(EMITTER_CALL) + r'\(.*?\)\)?; '
    r'|; ' + re.escape(EMITTER_CALL) + r'\(.*?\)\)?(?=\n|$))',
    re.M,
)


class InstrumentationError(Exception):
    def __init__(self, message: str, log_text: str = ""):
        super().__init__(message)
        self.log_text = log_text


@dataclass(frozen=True)
class InstrumentationPlan:
    targets: tuple[str, ...]
    output_root: Path
    capture_sink: Path
    session_context: str = "test"


@dataclass
class InstrumentResult:
    root: Path
    files: list[str] = field(default_factory=list)
    targets: list[str] = field(default_factory=list)


def emitter_statement(target_id: str, param_names) -> str:
    args = f"({param_names[0]},)" if len(param_names) == 1 else "(" + ", ".join(param_names) + ")"
    return f"{EMITTER_CALL}({_py_str(target_id)}, {args})"


def _py_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _find_defs(tree: ast.Module, qualname_tail: list[str]) -> list[ast.FunctionDef]:
    """Top-level ``f`` or class-level ``C.m`` definitions named by the tail."""
    found = []
    if len(qualname_tail) == 1:
        for node in tree.body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == qualname_tail[0]:
                found.append(node)
    elif len(qualname_tail) == 2:
        for node in tree.body:
            if isinstance(node, ast.ClassDef) and node.name == qualname_tail[0]:
                for item in node.body:
                    if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)) and item.name == qualname_tail[1]:
                        found.append(item)
    return found


def _insertion(src: SourceFile, fn: ast.FunctionDef, stmt: str) -> tuple[int, str]:
    body = fn.body
    first = body[0]
    has_doc = (isinstance(first, ast.Expr) and isinstance(first.value, ast.Constant)
               and isinstance(first.value.value, str))
    anchor = body[1] if has_doc and len(body) > 1 else (None if has_doc else first)
    if anchor is not None:
        start = src.offset(anchor.lineno, anchor.col_offset)
        line_lo = src.line_bounds(anchor.lineno)[0]
        indent = src.data[line_lo:start]
        if not indent.strip():
            return line_lo, indent.decode() + stmt + "\n"
        return start, stmt + "; "
    # Docstring-only body: add a statement after it.
    end = src.offset(first.end_lineno, first.end_col_offset)
    line_lo, line_hi = src.line_bounds(first.end_lineno)
    doc_lo = src.line_bounds(first.lineno)[0]
    doc_start = src.offset(first.lineno, first.col_offset)
    indent = src.data[doc_lo:doc_start]
    rest = src.data[end:line_hi].strip()
    if not indent.strip() and not rest and src.data[line_hi - 1:line_hi] == b"\n":
        return line_hi, indent.decode() + stmt + "\n"
    return end, "; " + stmt


def instrument_source(src: SourceFile, tree: ast.Module, targets: list[tuple[str, list[str], tuple[str, ...]]]) -> bytes:
    """Insert emitters for ``(target_id, qualname_tail, param_names)`` entries."""
    edits = []
    for target_id, tail, names in targets:
        defs = _find_defs(tree, tail)
        if len(defs) != 1:
            what = "not found" if not defs else "declared more than once"
            raise InstrumentationError(f"{target_id}: declaration {what} in {src.rel}")
        edits.append(_insertion(src, defs[0], emitter_statement(target_id, names)))
    data = src.data
    for offset, text in sorted(edits, reverse=True):
        data = data[:offset] + text.encode("utf-8") + data[offset:]
    return data


def strip_emitters(data: bytes) -> bytes:
    """Remove inserted emitter statements, restoring the original bytes."""
    return _EMITTER_RE.sub("", data.decode("utf-8")).encode("utf-8")


def build_check(root: Path) -> None:
    errors = []
    for rel in iter_python_files(root):
        source = (root / rel).read_bytes()
        try:
            compile(source, rel, "exec", dont_inherit=True)
        except SyntaxError as exc:
            errors.append(f"{rel}:{exc.lineno}:{exc.offset}: {exc.msg}")
    if errors:
        raise InstrumentationError("instrumented project does not compile", "\n".join(errors))


def instrument(project_root, plan: InstrumentationPlan, index: ProjectIndex | None = None,
               overwrite: bool = False) -> InstrumentResult:
    project_root = Path(project_root).resolve()
    out = Path(plan.output_root).resolve()
    if out == project_root:
        raise InstrumentationError("output root must differ from the project root")
    if out.exists():
        if not overwrite and any(out.iterdir()):
            raise InstrumentationError(f"write conflict: {out} exists and is not empty")
        shutil.rmtree(out)
    index = index or ProjectIndex.build(project_root)

    per_file: dict[str, list] = {}
    missing = []
    for target_id in plan.targets:
        qualname = target_id.split("(")[0]
        c = index.callables.get(qualname)
        if c is None:
            missing.append(target_id)
            continue
        tail = qualname[len(c.module) + 1:].split(".") if c.module else qualname.split(".")
        per_file.setdefault(c.file, []).append((target_id, tail, c.param_names))
    if missing:
        raise InstrumentationError("target declarations not found: " + ", ".join(missing))

    subject.copy_project(project_root, out, skip=out)
    result = InstrumentResult(out, sorted(per_file), list(plan.targets))
    for rel, entries in sorted(per_file.items()):
        src = index.sources[rel]
        (out / rel).write_bytes(instrument_source(src, index.trees[rel], entries))
    build_check(out)
    return result


@dataclass
class CaptureSummary:
    mode: str
    returncode: int
    records: int
    warnings: list[str] = field(default_factory=list)
    failing_tests: list[str] = field(default_factory=list)
    stdout: str = ""
    stderr: str = ""


def run_captured(instrumented_root, mode: str, command, sink, max_records: int = 100_000,
                 timeout: float | None = None) -> CaptureSummary:
    """Run ``command`` in the instrumented project, appending records to ``sink``."""
    if mode not in ("test", "field"):
        raise ValueError(f"mode must be 'test' or 'field', not {mode!r}")
    root = Path(instrumented_root).resolve()
    sink = Path(sink).resolve()
    sink.parent.mkdir(parents=True, exist_ok=True)
    before = sink.read_bytes().count(b"\n") if sink.exists() else 0
    verdict_sink = root / ".putforge-verdicts.jsonl"
    verdict_sink.unlink(missing_ok=True)
    env = subject.subject_env(
        root,
        PUTFORGE_SINK=str(sink),
        PUTFORGE_CONTEXT=mode,
        PUTFORGE_MAX_RECORDS=str(max_records),
        PUTFORGE_VERDICTS=str(verdict_sink) if mode == "test" else None,
    )
    res = subject.run(subject.expand_command(command), root, env, timeout)
    verdicts = subject.read_verdicts(verdict_sink)
    verdict_sink.unlink(missing_ok=True)
    after = sink.read_bytes().count(b"\n") if sink.exists() else 0
    summary = CaptureSummary(mode, res.returncode, after - before, stdout=res.stdout, stderr=res.stderr)
    summary.failing_tests = sorted(n for n, o in verdicts.items() if o != "pass")
    if res.returncode != 0:
        msg = f"{mode} command exited with status {res.returncode}; capture log kept"
        if summary.failing_tests:
            msg += " (failing tests: " + ", ".join(summary.failing_tests) + ")"
        log.warning(msg)
        summary.warnings.append(msg)
    return summary


__all__ = [
    "InstrumentationError", "InstrumentationPlan", "InstrumentResult", "CaptureSummary",
    "instrument", "run_captured", "strip_emitters", "emitter_statement", "module_name",
]

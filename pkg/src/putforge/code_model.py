"""Static model of a subject project: target methods, tests, assertions.

The subject is a Python project tested with pytest. A *target method* is a
project-local function, method, or constructor whose parameters (besides
``self``/``cls``) are all annotated with scalar kinds. A test's *target
call sites* are the calls it makes directly, i.e. lexically inside its own
body; calls made from helpers or from closures defined in the body do not
count.

All spans are byte ranges into the UTF-8 source file.
"""
from __future__ import annotations

import ast
import fnmatch
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from . import canonical
from .kinds import ScalarKind, kind_of_annotation, signature_text

# Names treated as assertions. "assert" stands for the assert statement.
DEFAULT_ASSERTION_NAMES = (
    "assert",
    "assert_equal",
    "assert_array_equal",
    "assert_allclose",
    "assert_almost_equal",
    "assertEqual",
    "assertNotEqual",
    "assertTrue",
    "assertFalse",
    "assertIn",
    "assertNotIn",
    "assertIs",
    "assertIsNone",
    "assertIsNotNone",
    "assertAlmostEqual",
)

SKIP_DIRS = {"__pycache__", ".git", ".hg", ".tox", ".venv", "venv", "node_modules", ".pytest_cache", "build", "dist"}

_BLOCK_NODES = (ast.For, ast.AsyncFor, ast.While, ast.If, ast.With, ast.AsyncWith, ast.Try)
_SCOPE_NODES = (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda, ast.ClassDef)


class CodeModelError(Exception):
    """The subject project cannot be analyzed."""


class LiteralKindError(CodeModelError):
    """A literal call argument does not fit its declared scalar kind."""


Span = tuple[int, int]


@dataclass(frozen=True)
class TargetMethod:
    id: str
    qualname: str
    params: tuple[ScalarKind, ...]
    param_names: tuple[str, ...]
    file: str
    span: Span
    is_constructor: bool = False

    @property
    def short_name(self) -> str:
        parts = self.qualname.split(".")
        if self.is_constructor:
            return parts[-2]
        return parts[-1]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "params": [k.value for k in self.params],
            "file": self.file,
            "span": [self.span[0], self.span[1]],
        }


@dataclass(frozen=True)
class Statement:
    span: Span
    text: str


@dataclass(frozen=True)
class AssertionSite:
    index: int
    span: Span
    text: str
    nested: bool = False          # inside a loop / conditional / with / try
    removal: Span | None = None   # whole-line range to drop when deleting
    block: int = 0                # id of the enclosing statement list
    block_len: int = 1
    indent: str = ""


@dataclass(frozen=True)
class CallExpr:
    """A call expression lexically inside a test body."""
    span: Span
    callee: str | None            # resolved qualified name, None if unresolved
    pos_args: tuple[tuple[Span, str], ...]
    kw_args: tuple[tuple[str, Span, str], ...]
    has_star: bool


@dataclass(frozen=True)
class TargetCallSite:
    target: str
    span: Span
    arg_exprs: tuple[str, ...]
    arg_spans: tuple[Span, ...]
    kinds: tuple[ScalarKind, ...]
    static_tuple: tuple[str, ...] | None = None


@dataclass(frozen=True)
class TestHeader:
    """Byte positions needed to rewrite a test's ``def`` line."""
    start: int                    # first byte of the first decorator line
    end: int                      # one past the last byte (newline included)
    def_line_start: int
    indent: str
    name_span: Span
    param_insert: int
    param_prefix: str             # text placed before the new parameters
    param_suffix: str


@dataclass(frozen=True)
class TestCase:
    id: str
    file: str
    name: str
    class_name: str | None
    span: Span
    header: TestHeader
    body: tuple[Statement, ...]
    assertions: tuple[AssertionSite, ...]
    calls: tuple[CallExpr, ...]
    target_calls: tuple[TargetCallSite, ...] = ()
    parametrized: bool = False

    @property
    def base_id(self) -> str:
        return self.id

    def to_json(self) -> dict:
        ids = []
        for site in self.target_calls:
            if site.target not in ids:
                ids.append(site.target)
        return {
            "id": self.id,
            "file": self.file,
            "span": [self.span[0], self.span[1]],
            "assertion_count": len(self.assertions),
            "target_ids": ids,
        }


@dataclass
class Callable:
    qualname: str
    file: str
    span: Span
    param_names: tuple[str, ...]
    param_kinds: tuple[ScalarKind | None, ...]
    variadic: bool
    returns: ast.expr | None
    module: str
    is_constructor: bool = False


@dataclass
class ClassInfo:
    qualname: str
    module: str
    bases: list[ast.expr]
    methods: dict[str, str] = field(default_factory=dict)


@dataclass
class ModuleInfo:
    name: str
    file: str
    is_package: bool
    is_test: bool
    names: dict[str, str] = field(default_factory=dict)   # local name -> qualified


@dataclass
class AnalysisReport:
    files: int = 0
    tests: int = 0
    excluded_calls: Counter = field(default_factory=Counter)
    flagged_assertions: int = 0
    notes: list[str] = field(default_factory=list)


class SourceFile:
    def __init__(self, rel: str, data: bytes):
        self.rel = rel
        self.data = data
        self.line_starts = [0]
        for line in data.splitlines(keepends=True):
            self.line_starts.append(self.line_starts[-1] + len(line))

    def offset(self, lineno: int, col: int) -> int:
        return self.line_starts[lineno - 1] + col

    def span(self, node: ast.AST) -> Span:
        return (self.offset(node.lineno, node.col_offset),
                self.offset(node.end_lineno, node.end_col_offset))

    def text(self, span: Span) -> str:
        return self.data[span[0]:span[1]].decode("utf-8")

    def line_bounds(self, lineno: int) -> Span:
        return self.line_starts[lineno - 1], self.line_starts[lineno]


def is_test_file(rel: str) -> bool:
    base = rel.rsplit("/", 1)[-1]
    return base.endswith(".py") and (base.startswith("test_") or base.endswith("_test.py"))


def module_name(rel: str) -> str:
    parts = rel[:-3].split("/")
    if parts[-1] == "__init__":
        parts = parts[:-1]
    if parts and parts[0] == "src" and len(parts) > 1:
        parts = parts[1:]
    return ".".join(parts)


def iter_python_files(root: Path, exclude: Iterable[str] = ()) -> Iterator[str]:
    exclude = list(exclude)
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
        for fn in sorted(filenames):
            if not fn.endswith(".py"):
                continue
            rel = Path(dirpath, fn).relative_to(root).as_posix()
            if any(fnmatch.fnmatch(rel, pat) for pat in exclude):
                continue
            yield rel


def _flat_statements(body: list[ast.stmt]) -> Iterator[ast.stmt]:
    for stmt in body:
        yield stmt
        if isinstance(stmt, ast.If):
            yield from _flat_statements(stmt.body)
            yield from _flat_statements(stmt.orelse)
        elif isinstance(stmt, ast.Try):
            yield from _flat_statements(stmt.body)
            for h in stmt.handlers:
                yield from _flat_statements(h.body)
            yield from _flat_statements(stmt.orelse)
            yield from _flat_statements(stmt.finalbody)


def _dotted(node: ast.expr) -> list[str] | None:
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        return parts[::-1]
    return None


class ProjectIndex:
    """Symbol tables for every module of the subject project."""

    def __init__(self, root: Path):
        self.root = root
        self.sources: dict[str, SourceFile] = {}
        self.trees: dict[str, ast.Module] = {}
        self.modules: dict[str, ModuleInfo] = {}
        self.callables: dict[str, Callable] = {}
        self.classes: dict[str, ClassInfo] = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, root: str | os.PathLike, exclude: Iterable[str] = ()) -> "ProjectIndex":
        root = Path(root)
        if not root.is_dir():
            raise CodeModelError(f"{root}: not a directory")
        index = cls(root)
        for rel in iter_python_files(root, exclude):
            data = (root / rel).read_bytes()
            try:
                tree = ast.parse(data, filename=rel)
            except SyntaxError as exc:
                raise CodeModelError(f"{rel}:{exc.lineno}:{exc.offset}: cannot parse: {exc.msg}") from None
            index.sources[rel] = SourceFile(rel, data)
            index.trees[rel] = tree
            name = module_name(rel)
            index.modules[name] = ModuleInfo(name, rel, rel.endswith("__init__.py"), is_test_file(rel))
        for name in sorted(index.modules):
            index._scan_module(index.modules[name])
        return index

    def _import_base(self, mod: ModuleInfo, level: int, target: str | None) -> str:
        if level == 0:
            return target or ""
        pkg = mod.name.split(".") if mod.is_package else mod.name.split(".")[:-1]
        if level > 1:
            pkg = pkg[: len(pkg) - (level - 1)]
        base = ".".join(pkg)
        if target:
            base = f"{base}.{target}" if base else target
        return base

    def _scan_module(self, mod: ModuleInfo) -> None:
        tree = self.trees[mod.file]
        src = self.sources[mod.file]
        for stmt in _flat_statements(tree.body):
            if isinstance(stmt, ast.Import):
                for alias in stmt.names:
                    if alias.asname:
                        mod.names[alias.asname] = alias.name
                    else:
                        head = alias.name.split(".")[0]
                        mod.names[head] = head
            elif isinstance(stmt, ast.ImportFrom):
                base = self._import_base(mod, stmt.level, stmt.module)
                for alias in stmt.names:
                    if alias.name == "*":
                        continue
                    mod.names[alias.asname or alias.name] = f"{base}.{alias.name}" if base else alias.name
            elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                q = f"{mod.name}.{stmt.name}"
                mod.names[stmt.name] = q
                self._add_callable(q, mod, src, stmt, method=False)
            elif isinstance(stmt, ast.ClassDef):
                q = f"{mod.name}.{stmt.name}"
                mod.names[stmt.name] = q
                info = ClassInfo(q, mod.name, list(stmt.bases))
                self.classes[q] = info
                for item in stmt.body:
                    if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)):
                        mq = f"{q}.{item.name}"
                        info.methods[item.name] = mq
                        self._add_callable(mq, mod, src, item, method=True)

    def _add_callable(self, qualname, mod, src, node, method: bool) -> None:
        decorators = {(_dotted(d) or [""])[-1] for d in node.decorator_list}
        args = node.args
        params = list(args.posonlyargs) + list(args.args)
        if method and "staticmethod" not in decorators and params:
            params = params[1:]
        params += list(args.kwonlyargs)
        first_line = node.decorator_list[0].lineno if node.decorator_list else node.lineno
        start = src.offset(node.lineno, node.col_offset)
        if node.decorator_list:
            lo = src.line_bounds(first_line)[0]
            start = lo + len(src.data[lo:start]) - len(src.data[lo:start].lstrip())
        self.callables[qualname] = Callable(
            qualname=qualname,
            file=mod.file,
            span=(start, src.offset(node.end_lineno, node.end_col_offset)),
            param_names=tuple(a.arg for a in params),
            param_kinds=tuple(kind_of_annotation(a.annotation) for a in params),
            variadic=args.vararg is not None or args.kwarg is not None,
            returns=node.returns,
            module=mod.name,
            is_constructor=method and node.name == "__init__",
        )

    # -- resolution -------------------------------------------------------

    def resolve_name(self, module: str, dotted: list[str]) -> str | None:
        mod = self.modules.get(module)
        if mod is None or not dotted:
            return None
        head = mod.names.get(dotted[0])
        if head is None:
            return None
        return self.canonical_qualname(".".join([head] + dotted[1:]))

    def canonical_qualname(self, q: str) -> str:
        # Follow re-exports: pkg.Name where pkg/__init__ imported Name.
        for _ in range(16):
            if q in self.callables or q in self.classes or q in self.modules:
                return q
            parts = q.split(".")
            moved = False
            for cut in range(len(parts) - 1, 0, -1):
                prefix, rest = ".".join(parts[:cut]), parts[cut:]
                mod = self.modules.get(prefix)
                if mod is not None and rest[0] in mod.names:
                    target = mod.names[rest[0]]
                    if target != f"{prefix}.{rest[0]}":
                        q = ".".join([target] + rest[1:])
                        moved = True
                    break
            if not moved:
                return q
        return q

    def class_of_annotation(self, module: str, node: ast.expr | None) -> str | None:
        if node is None:
            return None
        if isinstance(node, ast.Constant) and isinstance(node.value, str):
            try:
                node = ast.parse(node.value, mode="eval").body
            except SyntaxError:
                return None
        dotted = _dotted(node)
        if dotted is None:
            return None
        q = self.resolve_name(module, dotted)
        return q if q in self.classes else None

    def mro(self, cls_q: str) -> list[str]:
        out, todo = [], [cls_q]
        while todo:
            c = todo.pop(0)
            if c in out or c not in self.classes:
                continue
            out.append(c)
            info = self.classes[c]
            for b in info.bases:
                d = _dotted(b)
                if d:
                    bq = self.resolve_name(info.module, d)
                    if bq:
                        todo.append(bq)
        return out

    def lookup_method(self, cls_q: str, name: str) -> str | None:
        for c in self.mro(cls_q):
            m = self.classes[c].methods.get(name)
            if m:
                return m
        return None

    def callee_of(self, q: str | None) -> Callable | None:
        """Map a resolved name to the callable invoked when calling it."""
        if q is None:
            return None
        if q in self.callables:
            return self.callables[q]
        if q in self.classes:
            init = self.lookup_method(q, "__init__")
            return self.callables.get(init) if init else None
        parts = q.rsplit(".", 1)
        if len(parts) == 2 and parts[0] in self.classes:
            m = self.lookup_method(parts[0], parts[1])
            return self.callables.get(m) if m else None
        return None

    def return_class(self, q: str | None) -> str | None:
        if q is None:
            return None
        if q in self.classes:
            return q
        c = self.callee_of(q)
        if c is None or c.is_constructor:
            return None
        return self.class_of_annotation(c.module, c.returns)

    def is_project_source(self, c: Callable) -> bool:
        return not self.modules[c.module].is_test and not c.file.endswith("conftest.py")

    def target_of(self, c: Callable) -> TargetMethod:
        kinds = tuple(c.param_kinds)
        return TargetMethod(
            id=f"{c.qualname}({signature_text(kinds)})",
            qualname=c.qualname,
            params=kinds,
            param_names=c.param_names,
            file=c.file,
            span=c.span,
            is_constructor=c.is_constructor,
        )

    def eligibility(self, c: Callable | None) -> str | None:
        """None if ``c`` can be a target, else the exclusion reason."""
        if c is None:
            return "unresolved"
        if not self.is_project_source(c):
            return "test-local"
        if c.variadic:
            return "variadic"
        if not c.param_names:
            return "no-parameters"
        if any(k is None for k in c.param_kinds):
            return "not-scalar"
        return None


# -- test discovery --------------------------------------------------------


class _TestScanner:
    """Collects assertions and direct calls of one test function."""

    def __init__(self, index: ProjectIndex, module: str, src: SourceFile, assertion_names):
        self.index = index
        self.module = module
        self.src = src
        self.assertion_names = set(assertion_names)
        self.var_types: dict[str, str] = {}
        self.assertions: list[tuple[ast.stmt, bool, int, int]] = []
        self.calls: list[ast.Call] = []
        self._block_ids = 0

    # local type inference: name -> project class
    def expr_class(self, node: ast.expr) -> str | None:
        if isinstance(node, ast.Name):
            return self.var_types.get(node.id)
        if isinstance(node, ast.Call):
            return self.index.return_class(self.resolve_func(node.func))
        return None

    def resolve_func(self, func: ast.expr) -> str | None:
        if isinstance(func, ast.Name):
            if func.id in self.var_types:
                return None
            return self.index.resolve_name(self.module, [func.id])
        if isinstance(func, ast.Attribute):
            owner = self.expr_class(func.value)
            if owner is not None:
                m = self.index.lookup_method(owner, func.attr)
                return m
            dotted = _dotted(func)
            if dotted and dotted[0] not in self.var_types and dotted[0] not in ("self", "cls"):
                return self.index.resolve_name(self.module, dotted)
        return None

    def infer_types(self, fn: ast.FunctionDef) -> None:
        for a in fn.args.args + fn.args.kwonlyargs:
            c = self.index.class_of_annotation(self.module, a.annotation)
            if c:
                self.var_types[a.arg] = c
        for node in self._walk(fn.body):
            if isinstance(node, ast.Assign) and len(node.targets) == 1 and isinstance(node.targets[0], ast.Name):
                c = self.expr_class(node.value)
                if c:
                    self.var_types[node.targets[0].id] = c
            elif isinstance(node, ast.AnnAssign) and isinstance(node.target, ast.Name):
                c = self.index.class_of_annotation(self.module, node.annotation)
                if c is None and node.value is not None:
                    c = self.expr_class(node.value)
                if c:
                    self.var_types[node.target.id] = c
            elif isinstance(node, (ast.With, ast.AsyncWith)):
                for item in node.items:
                    if isinstance(item.optional_vars, ast.Name):
                        c = self.expr_class(item.context_expr)
                        if c:
                            self.var_types[item.optional_vars.id] = c

    def _walk(self, body) -> Iterator[ast.AST]:
        todo = list(body)
        while todo:
            node = todo.pop(0)
            yield node
            for child in ast.iter_child_nodes(node):
                if not isinstance(child, _SCOPE_NODES):
                    todo.append(child)

    def is_assertion(self, stmt: ast.stmt) -> bool:
        if isinstance(stmt, ast.Assert):
            return "assert" in self.assertion_names
        if isinstance(stmt, ast.Expr):
            value = stmt.value
            if isinstance(value, ast.Await):
                value = value.value
            if isinstance(value, ast.Call):
                d = _dotted(value.func)
                if d and d[-1] in self.assertion_names:
                    return True
        return False

    def scan_block(self, body: list[ast.stmt], nested: bool) -> None:
        self._block_ids += 1
        block = self._block_ids
        for stmt in body:
            if isinstance(stmt, _SCOPE_NODES):
                continue
            if self.is_assertion(stmt):
                self.assertions.append((stmt, nested, block, len(body)))
            for name in ("body", "orelse", "finalbody"):
                sub = getattr(stmt, name, None)
                if isinstance(sub, list) and sub and isinstance(sub[0], ast.stmt):
                    self.scan_block(sub, True)
            for h in getattr(stmt, "handlers", []) or []:
                self.scan_block(h.body, True)
            for case in getattr(stmt, "cases", []) or []:
                self.scan_block(case.body, True)

    def collect_calls(self, fn: ast.FunctionDef) -> None:
        for node in self._walk(fn.body):
            if isinstance(node, ast.Call):
                self.calls.append(node)


def _is_test_function(node: ast.stmt) -> bool:
    return isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name.startswith("test")


def _is_test_class(node: ast.stmt) -> bool:
    if not isinstance(node, ast.ClassDef) or not node.name.startswith("Test"):
        return False
    return not any(isinstance(i, ast.FunctionDef) and i.name == "__init__" for i in node.body)


def iter_test_functions(tree: ast.Module) -> Iterator[tuple[ast.FunctionDef, ast.ClassDef | None]]:
    for node in tree.body:
        if _is_test_function(node):
            yield node, None
        elif _is_test_class(node):
            for item in node.body:
                if _is_test_function(item):
                    yield item, node


def _is_parametrized(fn: ast.FunctionDef) -> bool:
    for d in fn.decorator_list:
        target = d.func if isinstance(d, ast.Call) else d
        dotted = _dotted(target) or []
        if dotted and dotted[-1] == "parametrize":
            return True
    return False


def _header(src: SourceFile, fn: ast.FunctionDef, is_method: bool) -> TestHeader:
    first_line = fn.decorator_list[0].lineno if fn.decorator_list else fn.lineno
    start = src.line_bounds(first_line)[0]
    end = src.line_bounds(fn.end_lineno)[1]
    def_line_start = src.line_bounds(fn.lineno)[0]
    def_off = src.offset(fn.lineno, fn.col_offset)
    indent = src.data[def_line_start:def_off].decode("utf-8")
    m = re.compile(rb"def\s+(" + re.escape(fn.name.encode()) + rb")\s*\(").search(src.data, def_off)
    if m is None:
        raise CodeModelError(f"{src.rel}:{fn.lineno}: cannot locate def header of {fn.name}")
    name_span = (m.start(1), m.end(1))
    open_paren = m.end()
    a = fn.args
    any_args = bool(a.posonlyargs or a.args or a.vararg or a.kwonlyargs or a.kwarg)
    positional = a.posonlyargs + a.args
    if is_method and positional:
        first = positional[0]
        return TestHeader(start, end, def_line_start, indent, name_span,
                          src.offset(first.end_lineno, first.end_col_offset), ", ", "")
    if any_args:
        return TestHeader(start, end, def_line_start, indent, name_span, open_paren, "", ", ")
    return TestHeader(start, end, def_line_start, indent, name_span, open_paren, "", "")


def _removal_range(src: SourceFile, stmt: ast.stmt) -> Span | None:
    """Whole-line range covering ``stmt`` if nothing else shares its lines."""
    lo = src.line_bounds(stmt.lineno)
    hi = src.line_bounds(stmt.end_lineno)
    start, end = src.span(stmt)
    before = src.data[lo[0]:start]
    after = src.data[end:hi[1]]
    if before.strip():
        return None
    tail = after.strip()
    if tail and not tail.startswith(b"#"):
        return None
    return (lo[0], hi[1])


def _build_test(index: ProjectIndex, mod: ModuleInfo, fn, owner, assertion_names, report) -> TestCase:
    src = index.sources[mod.file]
    scanner = _TestScanner(index, mod.name, src, assertion_names)
    scanner.infer_types(fn)
    scanner.scan_block(fn.body, False)
    scanner.collect_calls(fn)

    assertions = []
    for i, (stmt, nested, block, block_len) in enumerate(
            sorted(scanner.assertions, key=lambda a: (a[0].lineno, a[0].col_offset))):
        span = src.span(stmt)
        line_lo = src.line_bounds(stmt.lineno)[0]
        indent = src.data[line_lo:span[0]].decode("utf-8")
        if not indent.isspace():
            indent = ""
        if nested:
            report.flagged_assertions += 1
        assertions.append(AssertionSite(i, span, src.text(span), nested,
                                        _removal_range(src, stmt), block, block_len, indent))

    calls = []
    for call in sorted(scanner.calls, key=lambda c: (c.lineno, c.col_offset)):
        pos = tuple((src.span(a), src.text(src.span(a))) for a in call.args)
        kws = tuple((k.arg or "**", src.span(k.value), src.text(src.span(k.value))) for k in call.keywords)
        has_star = any(isinstance(a, ast.Starred) for a in call.args) or any(k.arg is None for k in call.keywords)
        calls.append(CallExpr(src.span(call), scanner.resolve_func(call.func), pos, kws, has_star))

    test_id = f"{mod.file}::{owner.name}::{fn.name}" if owner else f"{mod.file}::{fn.name}"
    header = _header(src, fn, owner is not None)
    return TestCase(
        id=test_id,
        file=mod.file,
        name=fn.name,
        class_name=owner.name if owner else None,
        span=(header.start, header.end),
        header=header,
        body=tuple(Statement(src.span(s), src.text(src.span(s))) for s in fn.body),
        assertions=tuple(assertions),
        calls=tuple(calls),
        parametrized=_is_parametrized(fn),
    )


def resolve_original_arguments(site: TargetCallSite) -> tuple[str, ...] | None:
    """Canonical tuple of a call site whose arguments are all literals."""
    out = []
    for text, kind in zip(site.arg_exprs, site.kinds):
        try:
            node = ast.parse(f"({text})", mode="eval").body
        except SyntaxError:
            return None
        ok, value = _literal_value(node)
        if not ok:
            return None
        try:
            out.append(canonical.canonicalize(kind, value))
        except canonical.CanonicalError as exc:
            raise LiteralKindError(f"call at bytes {site.span[0]}-{site.span[1]} to {site.target}: {exc}") from None
    return tuple(out)


def _literal_value(node: ast.expr):
    if isinstance(node, ast.Constant) and not isinstance(node.value, (bytes, complex)) and node.value is not Ellipsis:
        return True, node.value
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        ok, v = _literal_value(node.operand)
        if ok and isinstance(v, (int, float)) and not isinstance(v, bool):
            return True, -v if isinstance(node.op, ast.USub) else v
    return False, None


def select_target_calls(test: TestCase, index: ProjectIndex,
                        report: AnalysisReport | None = None) -> list[TargetCallSite]:
    """Eligible direct target call sites of ``test`` in source order."""
    report = report if report is not None else AnalysisReport()
    sites = []
    for call in test.calls:
        callee = index.callee_of(call.callee)
        reason = index.eligibility(callee)
        if reason is None and call.has_star:
            reason = "star-args"
        if reason is None:
            names = callee.param_names
            bound: dict[str, tuple[Span, str]] = {}
            if len(call.pos_args) > len(names):
                reason = "too-many-args"
            else:
                for name, arg in zip(names, call.pos_args):
                    bound[name] = arg
                for kw, span, text in call.kw_args:
                    if kw not in names or kw in bound:
                        reason = "bad-keyword"
                        break
                    bound[kw] = (span, text)
                if reason is None and len(bound) != len(names):
                    reason = "omits-defaulted-parameters"
        if reason is not None:
            report.excluded_calls[reason] += 1
            continue
        target = index.target_of(callee)
        site = TargetCallSite(
            target=target.id,
            span=call.span,
            arg_exprs=tuple(bound[n][1] for n in names),
            arg_spans=tuple(bound[n][0] for n in names),
            kinds=target.params,
        )
        try:
            static = resolve_original_arguments(site)
        except LiteralKindError as exc:
            report.excluded_calls["literal-kind-mismatch"] += 1
            report.notes.append(f"{test.id}: {exc}")
            continue
        sites.append(TargetCallSite(site.target, site.span, site.arg_exprs, site.arg_spans, site.kinds, static))
    return sites


@dataclass
class Analysis:
    index: ProjectIndex
    tests: list[TestCase]
    targets: dict[str, TargetMethod]
    report: AnalysisReport


def analyze(root: str | os.PathLike, exclude: Iterable[str] = (),
            assertion_names: Iterable[str] = DEFAULT_ASSERTION_NAMES) -> Analysis:
    index = ProjectIndex.build(root, exclude)
    report = AnalysisReport(files=len(index.sources))
    assertion_names = tuple(assertion_names)
    tests = []
    for rel in sorted(index.sources):
        mod = index.modules[module_name(rel)]
        if not mod.is_test:
            continue
        for fn, owner in iter_test_functions(index.trees[rel]):
            tc = _build_test(index, mod, fn, owner, assertion_names, report)
            sites = select_target_calls(tc, index, report)
            tests.append(replace(tc, target_calls=tuple(sites)))
    tests.sort(key=lambda t: (t.file, t.span[0]))
    report.tests = len(tests)
    targets: dict[str, TargetMethod] = {}
    for t in tests:
        for site in t.target_calls:
            if site.target not in targets:
                c = index.callee_of(site.target.split("(")[0])
                targets[site.target] = index.target_of(c)
    return Analysis(index, tests, dict(sorted(targets.items())), report)


def discover_tests(root: str | os.PathLike, exclude: Iterable[str] = (),
                   assertion_names: Iterable[str] = DEFAULT_ASSERTION_NAMES) -> list[TestCase]:
    return analyze(root, exclude, assertion_names).tests


def distinct_targets(test: TestCase) -> list[str]:
    out = []
    for site in test.target_calls:
        if site.target not in out:
            out.append(site.target)
    return out

"""Derive parameterized unit tests (PUTs) from conventional unit tests.

For a CUT that directly invokes ``alpha`` qualifying target methods and
holds ``beta`` assertions, ``alpha * beta`` PUTs are derived. Each PUT keeps
exactly one of the CUT's assertions, binds the arguments of one target call
site to its own parameters, and is fed by an argument provider built from
the captured union of that target.

All PUTs over one target of one CUT share a generated module and a provider.
"""
from __future__ import annotations

import ast
import math
import re
import textwrap
from dataclasses import dataclass, field
from pathlib import PurePosixPath
from typing import Iterable, Mapping, Sequence

from . import canonical
from .code_model import Analysis, AssertionSite, TargetCallSite, TestCase, _is_test_class, _is_test_function
from .kinds import ScalarKind
from .store import CaptureRecord, CaptureUnion, Tuple, build_union

DEFAULT_ROW_CAP = 10_000
ADAPTERS = ("pytest",)
GENERATED_DIR = "generated-puts"
FINALIZED_DIR = "finalized-puts"


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class PutGenerationPlan:
    cut: str
    alpha: int
    beta: int
    targets: tuple[str, ...]
    skipped: tuple[tuple[str, str], ...] = ()

    @property
    def expected_put_count(self) -> int:
        return self.alpha * self.beta


@dataclass(frozen=True)
class PutSpec:
    id: str
    name: str
    source_cut: str
    target: str
    site: TargetCallSite
    kept_assertions: tuple[int, ...]
    params: tuple[ScalarKind, ...]
    param_names: tuple[str, ...]
    source: str | None = None          # rewritten def, without the parametrize decorator
    def_line_offset: int = 0           # where the decorator line goes in ``source``
    indent: str = ""
    ill_formed_reason: str | None = None
    site_index: int | None = None

    @property
    def kept_assertion(self) -> int:
        return self.kept_assertions[0]

    @property
    def body(self) -> tuple[str, ...]:
        if self.source is None:
            return ()
        text = textwrap.dedent(self.source)
        fn = ast.parse(text).body[0]
        return tuple(ast.get_source_segment(text, s) for s in fn.body)


@dataclass(frozen=True)
class ArgumentProvider:
    id: str
    name: str
    target: str
    put_ids: tuple[str, ...]
    rows: tuple[Tuple, ...]
    original_flags: tuple[bool, ...]
    trimmed: int = 0

    @property
    def original_rows(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.original_flags) if f)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "target": self.target,
            "put_ids": list(self.put_ids),
            "rows": [list(r) for r in self.rows],
            "original_flags": list(self.original_flags),
            "trimmed": self.trimmed,
        }


def put_id(cut_id: str, target_id: str, kept: Sequence[int], site_index: int | None = None) -> str:
    site = f"@{site_index}" if site_index is not None else ""
    return f"{cut_id}@{target_id}{site}#" + "+".join(str(i) for i in kept)


def test_id_base(nodeid: str) -> str:
    return nodeid.split("[", 1)[0]


# -- planning --------------------------------------------------------------


def sites_to_parameterize(cut: TestCase, per_site: bool = False) -> list[tuple[int | None, TargetCallSite]]:
    """The first call site of each target (or every site with ``per_site``)."""
    out, seen = [], set()
    for i, site in enumerate(cut.target_calls):
        if per_site:
            out.append((i, site))
        elif site.target not in seen:
            seen.add(site.target)
            out.append((None, site))
    return out


def cut_originals(cut: TestCase, site: TargetCallSite, records: Iterable[CaptureRecord]) -> list[Tuple]:
    """Original tuples of ``site``: its literal tuple, else what the CUT passed at runtime."""
    if site.static_tuple is not None:
        return [site.static_tuple]
    out = []
    for rec in records:
        if (rec.context == "test" and rec.target == site.target and rec.serializable
                and rec.test_id is not None and test_id_base(rec.test_id) == cut.id
                and rec.tuple not in out):
            out.append(rec.tuple)
    return out


def plan(cut: TestCase, unions: Mapping[str, CaptureUnion],
         originals: Mapping[str, Sequence[Tuple]], force: bool = False) -> PutGenerationPlan:
    """Select the targets of ``cut`` whose union strictly exceeds its originals."""
    qualifying, skipped = [], []
    seen = []
    for site in cut.target_calls:
        if site.target in seen:
            continue
        seen.append(site.target)
        orig = set(originals.get(site.target, ()))
        union = unions.get(site.target)
        if not orig:
            skipped.append((site.target, "no original argument observed"))
        elif union is None or not set(union.tuples) > orig:
            if force and union is not None and orig <= set(union.tuples):
                qualifying.append(site.target)
            else:
                skipped.append((site.target, "union does not exceed the original arguments"))
        else:
            qualifying.append(site.target)
    beta = len(cut.assertions)
    alpha = len(qualifying) if beta else 0
    return PutGenerationPlan(cut.id, alpha, beta, tuple(qualifying), tuple(skipped))


# -- derivation ------------------------------------------------------------


def _apply_edits(data: bytes, edits: list[tuple[int, int, str]]) -> bytes:
    edits = sorted(edits, key=lambda e: (e[0], e[1]))
    for (s1, e1, _), (s2, e2, _) in zip(edits, edits[1:]):
        if s2 < e1:
            raise GenerationError(f"overlapping edits at bytes {s1}-{e1} and {s2}-{e2}")
    for start, end, text in reversed(edits):
        data = data[:start] + text.encode("utf-8") + data[end:]
    return data


def _inside(inner: tuple[int, int], outer: tuple[int, int]) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def assertion_deletion_edits(cut: TestCase, keep: set[int]) -> list[tuple[int, int, str]]:
    """Edits deleting every assertion statement not in ``keep``."""
    deleted = [a for a in cut.assertions if a.index not in keep]
    per_block: dict[int, list[AssertionSite]] = {}
    for a in deleted:
        per_block.setdefault(a.block, []).append(a)
    edits = []
    for block, sites in per_block.items():
        needs_pass = len(sites) == sites[0].block_len
        for j, a in enumerate(sites):
            if needs_pass and j == 0:
                edits.append((a.span[0], a.span[1], "pass"))
            elif a.removal is not None:
                edits.append((a.removal[0], a.removal[1], ""))
            else:
                edits.append((a.span[0], a.span[1], "pass"))
    return edits


def parameter_names(cut_text: str, count: int) -> tuple[str, ...]:
    used = set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", cut_text))
    prefix = "p"
    while any(f"{prefix}{i}" in used for i in range(1, count + 1)):
        prefix = "_" + prefix
    return tuple(f"{prefix}{i}" for i in range(1, count + 1))


def derive_put(cut: TestCase, site: TargetCallSite, assertions: AssertionSite | Sequence[AssertionSite],
               module_source: bytes, name: str | None = None, target_short: str | None = None,
               site_index: int | None = None) -> PutSpec:
    """Rewrite ``cut`` into a PUT keeping ``assertions`` and parameterizing ``site``."""
    if isinstance(assertions, AssertionSite):
        assertions = [assertions]
    keep = tuple(sorted(a.index for a in assertions))
    h = cut.header
    cut_bytes = module_source[h.start:h.end]
    params = parameter_names(cut_bytes.decode("utf-8"), len(site.kinds))
    short = target_short or site.target.split("(")[0].rsplit(".", 1)[-1]
    name = name or f"{cut.name}_PUT_{short}_{'_'.join(map(str, keep))}"
    pid = put_id(cut.id, site.target, keep, site_index)
    common = dict(id=pid, name=name, source_cut=cut.id, target=site.target, site=site,
                  kept_assertions=keep, params=site.kinds, param_names=params, indent=h.indent,
                  site_index=site_index)

    for a in cut.assertions:
        if a.index not in keep and _inside(site.span, a.span):
            return PutSpec(**common, ill_formed_reason=(
                f"call site of {site.target} lies inside deleted assertion #{a.index}"))

    edits = [(h.name_span[0], h.name_span[1], name),
             (h.param_insert, h.param_insert, h.param_prefix + ", ".join(params) + h.param_suffix)]
    edits += assertion_deletion_edits(cut, set(keep))
    edits += [(s[0], s[1], p) for s, p in zip(site.arg_spans, params)]
    rebased = [(s - h.start, e - h.start, t) for s, e, t in edits]
    text = _apply_edits(cut_bytes, rebased).decode("utf-8")
    return PutSpec(**common, source=text, def_line_offset=h.def_line_start - h.start)


# -- providers -------------------------------------------------------------


def synthesize_provider(puts: Sequence[PutSpec], union: CaptureUnion, originals: Sequence[Tuple] = (),
                        cap: int = DEFAULT_ROW_CAP, name: str | None = None,
                        provider_id: str | None = None) -> ArgumentProvider:
    """Rows of ``union``: the CUT's originals first, then the rest lexicographically."""
    if not union.tuples:
        raise GenerationError(f"empty union for {union.target}")
    targets = {p.target for p in puts}
    if len(targets) > 1:
        raise GenerationError("all PUTs of a provider must share a target")
    head = [tuple(t) for t in originals]
    head = [t for i, t in enumerate(head) if t not in head[:i]]
    rest = sorted((t for t in union.tuples if t not in head), key=canonical.sort_key)
    room = max(cap - len(head), 0)
    trimmed = max(len(rest) - room, 0)
    rows = tuple(head) + tuple(rest[:room])
    short = union.target.split("(")[0].rsplit(".", 1)[-1]
    return ArgumentProvider(
        id=provider_id or union.target,
        name=name or f"provide_{short}_args",
        target=union.target,
        put_ids=tuple(p.id for p in puts),
        rows=rows,
        original_flags=tuple([True] * len(head) + [False] * (len(rows) - len(head))),
        trimmed=trimmed,
    )


# -- rendering -------------------------------------------------------------

_QUIET_NAN_BITS = 0x7FF8000000000000


def render_literal(kind: ScalarKind, token: str) -> str:
    value = canonical.decode(kind, token)
    if kind is ScalarKind.BOOL:
        return "True" if value else "False"
    if kind.is_integer:
        return str(value)
    if kind.is_float:
        v = float(value)
        if math.isnan(v):
            if kind is ScalarKind.F64 and int(token[4:], 16) != _QUIET_NAN_BITS:
                return f'__import__("struct").unpack(">d", bytes.fromhex("{token[4:]}"))[0]'
            return 'float("nan")'
        if math.isinf(v):
            return 'float("inf")' if v > 0 else 'float("-inf")'
        return repr(v)
    if value is None:
        return "None"
    return repr(value)


def render_provider(provider: ArgumentProvider, kinds: Sequence[ScalarKind], indent: str = "") -> str:
    n_orig = sum(provider.original_flags)
    lines = [
        f"{indent}def {provider.name}():",
        f"{indent}    # {provider.target}: {len(provider.rows)} rows, {n_orig} original",
        f"{indent}    return [",
    ]
    for i, (row, orig) in enumerate(zip(provider.rows, provider.original_flags)):
        values = ", ".join(render_literal(k, t) for k, t in zip(kinds, row))
        note = "  # original" if orig else ""
        lines.append(f'{indent}        pytest.param({values}, id="r{i:04d}"),{note}')
    lines.append(f"{indent}    ]")
    return "\n".join(lines) + "\n"


def render_put(put: PutSpec, provider: ArgumentProvider) -> str:
    argnames = ",".join(put.param_names)
    deco = f'{put.indent}@pytest.mark.parametrize("{argnames}", {provider.name}())\n'
    src = put.source
    return src[:put.def_line_offset] + deco + src[put.def_line_offset:]


def _top_level_removals(analysis: Analysis, cut: TestCase) -> tuple[list[tuple[int, int, str]], tuple[int, int]]:
    """Edits dropping every other test, plus the line span of the CUT's top-level statement."""
    src = analysis.index.sources[cut.file]
    tree = analysis.index.trees[cut.file]

    def full_lines(node):
        first = node.decorator_list[0].lineno if getattr(node, "decorator_list", None) else node.lineno
        return src.line_bounds(first)[0], src.line_bounds(node.end_lineno)[1]

    edits, owner_span = [], None
    for node in tree.body:
        lo, hi = full_lines(node)
        if _is_test_function(node):
            if cut.class_name is None and node.name == cut.name:
                owner_span = (lo, hi)
            else:
                edits.append((lo, hi, ""))
        elif _is_test_class(node):
            if node.name != cut.class_name:
                edits.append((lo, hi, ""))
                continue
            owner_span = (lo, hi)
            for item in node.body:
                if _is_test_function(item) and item.name != cut.name:
                    edits.append((*full_lines(item), ""))
    if owner_span is None:
        raise GenerationError(f"cannot locate {cut.id} in {cut.file}")
    return edits, owner_span


def _import_insertion(analysis: Analysis, cut: TestCase) -> tuple[int, str]:
    """Where ``import pytest`` goes: after the leading imports, else after the docstring."""
    src = analysis.index.sources[cut.file]
    tree = analysis.index.trees[cut.file]
    after = None
    for i, node in enumerate(tree.body):
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            after = node
        elif i == 0 and isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant) \
                and isinstance(node.value.value, str):
            after = node
        else:
            break
    if after is None:
        return 0, "import pytest\n\n"
    end = src.line_bounds(after.end_lineno)[1]
    text = "import pytest\n"
    if not src.data[:end].endswith(b"\n"):
        text = "\n" + text
    if isinstance(after, ast.Expr):
        text = "\n" + text
    return end, text


def render_unit(analysis: Analysis, cut: TestCase,
                groups: Sequence[tuple[ArgumentProvider, Sequence[PutSpec]]],
                adapter: str = "pytest") -> str:
    """Source of a test module holding the PUT groups, each with its provider."""
    if adapter not in ADAPTERS:
        raise GenerationError(f"unknown adapter {adapter!r}; known: {', '.join(ADAPTERS)}")
    src = analysis.index.sources[cut.file]
    mod = next(i for i in analysis.index.modules.values() if i.file == cut.file)
    edits, owner_span = _top_level_removals(analysis, cut)
    if mod.names.get("pytest") != "pytest":
        at, text = _import_insertion(analysis, cut)
        edits.append((at, at, text))
    provider_text = "\n\n".join(render_provider(prov, puts[0].params) for prov, puts in groups) + "\n\n"
    put_texts = [render_put(p, prov) for prov, puts in groups for p in puts]
    h = cut.header
    if cut.class_name is None:
        edits.append((h.start, h.end, provider_text + "\n\n".join(put_texts)))
    else:
        edits.append((owner_span[0], owner_span[0], provider_text))
        edits.append((h.start, h.end, "\n".join(put_texts)))
    return _apply_edits(src.data, edits).decode("utf-8").rstrip() + "\n"


def unit_path(cut: TestCase, short: str, root: str = GENERATED_DIR, taken: set[str] | None = None) -> str:
    p = PurePosixPath(cut.file)
    parts = [p.stem, cut.class_name, cut.name, short]
    stem = "__".join(x for x in parts if x)
    if not stem.startswith("test_"):
        stem = "test_" + stem
    path = str(PurePosixPath(root, p.parent, stem + ".py"))
    k = 2
    while taken is not None and path in taken:
        path = str(PurePosixPath(root, p.parent, f"{stem}_{k}.py"))
        k += 1
    if taken is not None:
        taken.add(path)
    return path


def module_level_names(analysis: Analysis, cut: TestCase) -> set[str]:
    tree = analysis.index.trees[cut.file]
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(node.name)
        elif isinstance(node, ast.Name) and isinstance(node.ctx, ast.Store):
            names.add(node.id)
    return names


def unique_name(base: str, taken: set[str]) -> str:
    name, k = base, 2
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    taken.add(name)
    return name


# -- whole-project generation ----------------------------------------------


@dataclass
class Unit:
    cut: TestCase
    target: str
    site_index: int | None
    file: str
    puts: list[PutSpec]
    provider: ArgumentProvider
    source: str = ""


@dataclass
class Generation:
    unions: dict[str, CaptureUnion]
    originals: dict[tuple[str, str], list[Tuple]]
    plans: list[PutGenerationPlan]
    units: list[Unit]
    excluded: list[PutSpec] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def puts(self) -> list[PutSpec]:
        return [p for u in self.units for p in u.puts]

    def manifest(self) -> list[dict]:
        out = []
        for u in self.units:
            for p in u.puts:
                out.append({
                    "put_id": p.id,
                    "cut": p.source_cut,
                    "target": p.target,
                    "assertion_index": p.kept_assertion,
                    "provider_size": len(u.provider.rows),
                    "file": u.file,
                    "name": p.name,
                    "class": u.cut.class_name,
                    "site_index": u.site_index,
                    "provider": u.provider.id,
                    "ill_formed_by_construction": None,
                })
        for p in self.excluded:
            out.append({
                "put_id": p.id,
                "cut": p.source_cut,
                "target": p.target,
                "assertion_index": p.kept_assertion,
                "provider_size": 0,
                "file": None,
                "name": p.name,
                "class": None,
                "site_index": p.site_index,
                "provider": None,
                "ill_formed_by_construction": p.ill_formed_reason,
            })
        return out

    def providers(self) -> dict[str, dict]:
        out = {}
        for u in self.units:
            entry = u.provider.to_json()
            entry["cut"] = u.cut.id
            entry["file"] = u.file
            out[u.provider.id] = entry
        return out


def generate(analysis: Analysis, records: Sequence[CaptureRecord], cap: int = DEFAULT_ROW_CAP,
             per_site: bool = False, force: bool = False, adapter: str = "pytest") -> Generation:
    """Plan, derive and render PUTs for every CUT of ``analysis``."""
    if adapter not in ADAPTERS:
        raise GenerationError(f"unknown adapter {adapter!r}; known: {', '.join(ADAPTERS)}")
    records = list(records)
    notes: list[str] = []
    per_cut_sites = {}
    originals: dict[tuple[str, str], list[Tuple]] = {}
    union_originals: dict[str, list[Tuple]] = {}
    for cut in analysis.tests:
        if cut.parametrized:
            notes.append(f"{cut.id}: already parameterized; skipped")
            continue
        sites = sites_to_parameterize(cut, per_site)
        per_cut_sites[cut.id] = sites
        for idx, site in sites:
            orig = cut_originals(cut, site, records)
            originals[(cut.id, site.target if idx is None else f"{site.target}@{idx}")] = orig
            bucket = union_originals.setdefault(site.target, [])
            bucket.extend(t for t in orig if t not in bucket)

    unions = build_union(records, union_originals)
    plans, units, excluded = [], [], []
    taken_files: set[str] = set()
    for cut in analysis.tests:
        if cut.id not in per_cut_sites:
            continue
        cut_orig = {}
        for idx, site in per_cut_sites[cut.id]:
            key = site.target if idx is None else f"{site.target}@{idx}"
            cut_orig.setdefault(site.target, [])
            cut_orig[site.target].extend(t for t in originals[(cut.id, key)] if t not in cut_orig[site.target])
        p = plan(cut, unions, cut_orig, force=force)
        plans.append(p)
        for target, reason in p.skipped:
            notes.append(f"{cut.id}: {target}: {reason}")
        if not p.expected_put_count:
            continue
        module_src = analysis.index.sources[cut.file].data
        names = module_level_names(analysis, cut)
        for idx, site in per_cut_sites[cut.id]:
            if site.target not in p.targets:
                continue
            target = analysis.targets[site.target]
            short = target.short_name if idx is None else f"{target.short_name}_s{idx}"
            key = site.target if idx is None else f"{site.target}@{idx}"
            unit_puts = []
            for a in cut.assertions:
                name = unique_name(f"{cut.name}_PUT_{short}_{a.index}", names)
                spec = derive_put(cut, site, a, module_src, name=name, target_short=short, site_index=idx)
                if spec.ill_formed_reason:
                    notes.append(f"{spec.id}: ill-formed by construction: {spec.ill_formed_reason}")
                    excluded.append(spec)
                else:
                    unit_puts.append(spec)
            if not unit_puts:
                continue
            provider = synthesize_provider(
                unit_puts, unions[site.target], originals[(cut.id, key)], cap=cap,
                name=unique_name(f"provide_{short}_args", names),
                provider_id=f"{cut.id}@{key}")
            if provider.trimmed:
                notes.append(f"{provider.id}: provider trimmed by {provider.trimmed} rows (cap {cap})")
            file = unit_path(cut, short, GENERATED_DIR, taken_files)
            unit = Unit(cut, site.target, idx, file, unit_puts, provider)
            unit.source = render_unit(analysis, cut, [(provider, unit_puts)], adapter)
            units.append(unit)
    return Generation(unions, originals, plans, units, excluded, notes)

"""Bundled miniature subject projects with hand-derived ground truth.

Each fixture directory holds a small package, a pytest suite, a
``workload.py`` field run, ``putforge.toml`` and ``ground-truth.json``.
"""
from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

FIXTURES_DIR = Path(__file__).resolve().parent


def list_fixtures() -> list[str]:
    return sorted(p.name for p in FIXTURES_DIR.iterdir() if (p / "ground-truth.json").exists())


def fixture_path(name: str) -> Path:
    path = FIXTURES_DIR / name
    if not (path / "ground-truth.json").exists():
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(list_fixtures())}")
    return path


def ground_truth(name: str) -> dict:
    return json.loads((fixture_path(name) / "ground-truth.json").read_text(encoding="utf-8"))


@dataclass
class Mismatch:
    artifact: str
    key: str
    expected: object
    actual: object

    def __str__(self) -> str:
        return f"{self.artifact}[{self.key}]: expected {self.expected!r}, got {self.actual!r}"


@dataclass
class FixtureResult:
    name: str
    workspace: Path
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def diff(self) -> str:
        return "\n".join(map(str, self.mismatches))


def _tuples(rows) -> list[tuple]:
    return sorted(tuple(r) for r in rows)


def compare(name: str, workspace: Path) -> FixtureResult:
    """Diff the artifacts in ``workspace`` against the fixture's ground truth."""
    truth = ground_truth(name)
    ws = Path(workspace)
    res = FixtureResult(name, ws)

    def check(artifact, key, expected, actual):
        if expected != actual:
            res.mismatches.append(Mismatch(artifact, key, expected, actual))

    def load(file):
        return json.loads((ws / file).read_text(encoding="utf-8"))

    check("targets.json", "ids", sorted(truth["targets"]), sorted(t["id"] for t in load("targets.json")))

    plans = {p["cut"]: [p["alpha"], p["beta"]] for p in load("plans.json")["plans"]}
    check("plans.json", "cuts", sorted(truth["plans"]), sorted(plans))
    for cut, ab in truth["plans"].items():
        check("plans.json", cut, ab, plans.get(cut))

    unions = load("union.json")
    check("union.json", "targets", sorted(truth["unions"]), sorted(unions))
    for target, exp in truth["unions"].items():
        got = unions.get(target, {"tuples": [], "provenance": []})
        check("union.json", f"{target}.tuples", _tuples(exp["tuples"]), _tuples(got["tuples"]))
        originals = [t for t, p in zip(got["tuples"], got["provenance"]) if "original" in p]
        check("union.json", f"{target}.originals", _tuples(exp["originals"]), _tuples(originals))

    manifest = load("puts.json")
    providers = load("providers.json")
    classes = load("classification.json")
    executed = {e["put_id"]: e for e in manifest if not e["ill_formed_by_construction"]}
    check("puts.json", "put_ids", sorted(truth["puts"]), sorted(executed))
    check("puts.json", "ill_formed_by_construction", sorted(truth["ill_formed_by_construction"]),
          sorted(e["put_id"] for e in manifest if e["ill_formed_by_construction"]))
    for pid, exp in truth["puts"].items():
        c = classes.get(pid)
        if c is None or pid not in executed:
            check("classification.json", pid, exp["category"], None)
            continue
        rows = providers[executed[pid]["provider"]]["rows"]
        check("classification.json", f"{pid}.category", exp["category"], c["category"])
        check("classification.json", f"{pid}.pass", _tuples(exp["pass"]), _tuples(rows[r] for r in c["pass_rows"]))

    fin = load("finalized.json")
    actual_fin = {
        "puts": len(fin["puts"]),
        "merged": sum(1 for p in fin["puts"] if len(p["merged_from"]) > 1),
        "green": fin["green"],
    }
    check("finalized.json", "summary", truth["finalized"], actual_fin)

    report = load("report.json")["totals"]
    check("report.json", "partition",
          report["executed"] - report["ill_formed"],
          report["strongly"] + report["falsifiably"] + report["decoupled"])
    return res


def verify_fixture(name: str, workspace: str | Path | None = None, **overrides) -> FixtureResult:
    """Run the whole pipeline on fixture ``name`` and diff against its ground truth."""
    from ..config import load_config
    from ..pipeline import run_all

    if workspace is None:
        workspace = Path(tempfile.mkdtemp(prefix=f"putforge-{name}-"))
    cfg = load_config(fixture_path(name), {"workspace": str(workspace), **overrides})
    run_all(cfg)
    return compare(name, cfg.workspace)


__all__ = ["FIXTURES_DIR", "FixtureResult", "Mismatch", "compare", "fixture_path", "ground_truth",
           "list_fixtures", "verify_fixture"]

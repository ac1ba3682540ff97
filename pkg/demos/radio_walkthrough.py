"""Walk the radio_form fixture through every stage and look at each artifact.

Run with ``python3 demos/radio_walkthrough.py``.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from putforge import canonical, pipeline
from putforge.config import load_config
from putforge.fixtures import fixture_path
from putforge.kinds import ScalarKind

ws = Path(tempfile.mkdtemp(prefix="radio-demo-"))
cfg = load_config(fixture_path("radio_form"), {"workspace": str(ws)})
print("workspace:", ws)

# the test the tool starts from
print((cfg.project_root / "tests" / "test_form.py").read_text())

# static analysis: which methods are directly called with scalar arguments
print(pipeline.analyze(cfg).summary)
for t in json.loads((ws / "targets.json").read_text()):
    print("  target", t["id"])

# capture arguments once from the test suite, once from the field workload
print(pipeline.capture(cfg, "test").summary)
print(pipeline.capture(cfg, "field").summary)

# one PUT per (target, assertion); both share one argument provider
print(pipeline.generate(cfg).summary)
generated = sorted((ws / "puts-project" / "generated-puts").rglob("*.py"))
print(generated[0].read_text())

# the union of everything seen for select_option, originals first
target = "radio.form.RadioButton.select_option(text)"
union = json.loads((ws / "union.json").read_text())[target]
values = [canonical.decode(ScalarKind.TEXT, row[0]) for row in union["tuples"]]
print(f"{len(values)} distinct values for select_option:", values)

# run every row, classify, finalize
print(pipeline.classify(cfg).summary)
classes = json.loads((ws / "classification.json").read_text())
providers = json.loads((ws / "providers.json").read_text())
for pid, c in classes.items():
    rows = next(p["rows"] for p in providers.values() if pid in p["put_ids"])
    passing = [canonical.decode(ScalarKind.TEXT, rows[r][0]) for r in c["pass_rows"]]
    print(f"{c['category']:>20}  passes on {passing}  ({pid.split('#')[1]})")

# the falsifiably-coupled PUT keeps only the rows it passes on
finalized = sorted((ws / "puts-project" / "finalized-puts").rglob("*.py"))
print(finalized[0].read_text())
print((ws / "report.md").read_text())

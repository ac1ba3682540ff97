"""Finalization merges PUTs whose pruned providers coincide; coverage gain
compares union size against the original arguments.

Run with ``python3 demos/merge_and_gain.py``.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from putforge import store
from putforge.fixtures import verify_fixture

# xmp_bag: one test, one target, five assertions
res = verify_fixture("xmp_bag", Path(tempfile.mkdtemp(prefix="xmp-demo-")))
print("matches ground truth:", res.ok)
ws = res.workspace

classes = json.loads((ws / "classification.json").read_text())
for pid, c in classes.items():
    print(f"#{pid.split('#')[1]}  {c['category']:<20} pass rows {c['pass_rows']}")

# assertions #0 and #1 pass on the same rows, so they become one PUT
fin = json.loads((ws / "finalized.json").read_text())
for p in fin["puts"]:
    print(p["name"], "assertions", p["assertion_indices"], "rows", p["provider_size"])
    print((ws / "puts-project" / p["file"]).read_text())
print("all finalized rows pass:", fin["green"])

# gain per target in this run
for t in json.loads((ws / "report.json").read_text())["targets"]:
    print(t["target"], f"{t['original_count']} -> {t['union_count']}", "factor", t["factor"])

# 2 original arguments against 2,694 captured ones
gain = store.coverage_gain(2694, 2)
print("factor", gain.factor, "orders of magnitude", gain.orders_of_magnitude)

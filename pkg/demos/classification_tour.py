"""Run every bundled fixture and print one report row per fixture.

Shows each PUT category at least once, including PUTs filtered as
ill-formed. Run with ``python3 demos/classification_tour.py``.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from putforge.fixtures import list_fixtures, verify_fixture

root = Path(tempfile.mkdtemp(prefix="tour-"))
cols = ["puts", "ill_formed", "strongly", "falsifiably", "decoupled"]
print(f"{'fixture':<12}" + "".join(f"{c:>13}" for c in cols) + "   ok")
for name in list_fixtures():
    res = verify_fixture(name, root / name)
    totals = json.loads((res.workspace / "report.json").read_text())["totals"]
    print(f"{name:<12}" + "".join(f"{totals[c]:>13}" for c in cols) + f"   {res.ok}")
    if not res.ok:
        print(res.diff())

# sideeffect: deleting `assert queue.pop() == 5` also deletes that pop, so
# the PUT keeping `assert queue.pop() == 9` fails on its original row
ws = root / "sideeffect"
for pid, c in json.loads((ws / "classification.json").read_text()).items():
    print(pid.split("::")[1], c["category"])

"""pytest plugin loaded into subject test runs (``PYTEST_PLUGINS``).

* exports the running test's node id as ``PUTFORGE_TEST_ID`` so the capture
  emitter can attribute records;
* appends one verdict line per test to ``PUTFORGE_VERDICTS`` when set;
* bounds each test call by ``PUTFORGE_TIMEOUT`` seconds when set;
* with ``PUTFORGE_ISOLATE`` set to a directory, runs every test in a fresh
  copy of that directory as working directory.
"""
from __future__ import annotations

import json
import os
import shutil
import signal
import tempfile
import threading

import pytest


class CellTimeout(BaseException):
    """Raised inside a test that ran past its time budget."""


_phases: dict[str, dict[str, str]] = {}
_timed_out: set[str] = set()


def _on_alarm(signum, frame):
    raise CellTimeout("per-row timeout exceeded")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_protocol(item, nextitem):
    previous = os.environ.get("PUTFORGE_TEST_ID")
    os.environ["PUTFORGE_TEST_ID"] = item.nodeid
    template = os.environ.get("PUTFORGE_ISOLATE")
    scratch = cwd = None
    if template:
        cwd = os.getcwd()
        scratch = tempfile.mkdtemp(prefix="putforge-cell-")
        work = os.path.join(scratch, "work")
        shutil.copytree(template, work, symlinks=True)
        os.chdir(work)
    try:
        yield
    finally:
        if scratch is not None:
            os.chdir(cwd)
            shutil.rmtree(scratch, ignore_errors=True)
        if previous is None:
            os.environ.pop("PUTFORGE_TEST_ID", None)
        else:
            os.environ["PUTFORGE_TEST_ID"] = previous


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    timeout = float(os.environ.get("PUTFORGE_TIMEOUT") or 0)
    armed = (timeout > 0 and hasattr(signal, "setitimer")
             and threading.current_thread() is threading.main_thread())
    if armed:
        old = signal.signal(signal.SIGALRM, _on_alarm)
        signal.setitimer(signal.ITIMER_REAL, timeout)
    try:
        yield
    finally:
        if armed:
            signal.setitimer(signal.ITIMER_REAL, 0)
            signal.signal(signal.SIGALRM, old)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    yield
    if call.excinfo is not None and call.excinfo.errisinstance(CellTimeout):
        _timed_out.add(item.nodeid)


def pytest_runtest_logreport(report):
    _phases.setdefault(report.nodeid, {})[report.when] = report.outcome


def outcome_of(nodeid: str, phases: dict[str, str]) -> str:
    if phases.get("setup") != "passed":
        return "error"
    call = phases.get("call")
    if nodeid in _timed_out:
        return "timeout"
    if call == "failed":
        return "fail"
    if call != "passed":
        return "error"
    if phases.get("teardown", "passed") != "passed":
        return "error"
    return "pass"


def pytest_runtest_logfinish(nodeid, location):
    sink = os.environ.get("PUTFORGE_VERDICTS")
    phases = _phases.pop(nodeid, {})
    if not sink:
        return
    line = json.dumps({"nodeid": nodeid, "o": outcome_of(nodeid, phases)}) + "\n"
    with open(sink, "a", encoding="utf-8") as fh:
        fh.write(line)

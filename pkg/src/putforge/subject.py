"""Running commands inside a (copy of a) subject project."""
from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from .code_model import SKIP_DIRS

PLUGIN = "putforge.pytest_plugin"


def expand_command(command: str | list[str]) -> list[str]:
    if isinstance(command, str):
        command = shlex.split(command)
    return [part.replace("{python}", sys.executable) for part in command]


def subject_env(root: Path, **extra: str | None) -> dict[str, str]:
    env = dict(os.environ)
    for key in [k for k in env if k.startswith("PUTFORGE_") or k.startswith("PYTEST_")]:
        del env[key]
    pkg_parent = str(Path(__file__).resolve().parent.parent)
    paths = [str(root)]
    if (root / "src").is_dir():
        paths.append(str(root / "src"))
    paths.append(pkg_parent)
    if env.get("PYTHONPATH"):
        paths.append(env["PYTHONPATH"])
    env["PYTHONPATH"] = os.pathsep.join(paths)
    env["PYTHONDONTWRITEBYTECODE"] = "1"
    env["PYTEST_PLUGINS"] = PLUGIN
    for key, value in extra.items():
        if value is not None:
            env[key] = value
    return env


def copy_project(src: Path, dst: Path, skip: Path | None = None) -> None:
    src = Path(src).resolve()
    skip = Path(skip).resolve() if skip else None

    def ignore(dirpath, names):
        out = [n for n in names if n in SKIP_DIRS or n == ".pytest_cache"]
        if skip is not None:
            out += [n for n in names if (Path(dirpath) / n).resolve() == skip]
        return out

    shutil.copytree(src, dst, ignore=ignore)


@dataclass
class RunResult:
    returncode: int
    stdout: str
    stderr: str
    timed_out: bool = False


def run(command: list[str], cwd: Path, env: dict[str, str], timeout: float | None = None) -> RunResult:
    try:
        proc = subprocess.run(command, cwd=cwd, env=env, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        out = exc.stdout.decode() if isinstance(exc.stdout, bytes) else (exc.stdout or "")
        err = exc.stderr.decode() if isinstance(exc.stderr, bytes) else (exc.stderr or "")
        return RunResult(-9, out, err, timed_out=True)
    return RunResult(proc.returncode, proc.stdout, proc.stderr)


def read_verdicts(path: Path) -> dict[str, str]:
    out = {}
    if not path.exists():
        return out
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            out[rec["nodeid"]] = rec["o"]
    return out


def run_test_suite(root: Path, command: str | list[str], timeout: float | None = None,
                   **env_extra: str | None) -> dict[str, str]:
    """Run a test command in ``root`` and return {node id: outcome}."""
    root = Path(root)
    sink = root / ".putforge-verdicts.jsonl"
    if sink.exists():
        sink.unlink()
    env = subject_env(root, PUTFORGE_VERDICTS=str(sink), **env_extra)
    run(expand_command(command), root, env, timeout)
    verdicts = read_verdicts(sink)
    sink.unlink(missing_ok=True)
    return verdicts

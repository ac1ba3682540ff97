from __future__ import annotations

import json
import subprocess
import sys

import pytest

from putforge import cli
from putforge.config import ConfigError, load_config
from putforge.fixtures import fixture_path


def test_config_defaults_and_overrides(tmp_path):
    cfg = load_config(fixture_path("codec"), {"workspace": str(tmp_path / "ws"), "retries": 2})
    assert cfg.test_command.startswith("{python} -m pytest")
    assert cfg.workload_command == "{python} workload.py"
    assert cfg.retries == 2 and cfg.per_row_timeout == 30.0 and cfg.provider_row_cap == 10_000
    assert cfg.workspace == (tmp_path / "ws").resolve()


def test_workspace_inside_project_is_excluded_from_analysis(make_project):
    root = make_project({"putforge.toml": 'workspace = "out"\ntest_command = "pytest"\n'})
    cfg = load_config(root)
    assert cfg.workspace == root.resolve() / "out"
    assert cfg.analysis_exclude == ("out/*",)


@pytest.mark.parametrize("toml,overrides,match", [
    ('test_command = "x"\n', {}, "workspace"),
    ('workspace = "."\ntest_command = "x"\n', {}, "differ"),
    ('workspace = "w"\n', {}, "test_command"),
    ('workspace = "w"\ntest_command = "x"\nbogus = 1\n', {}, "unknown keys"),
    ('workspace = "w"\ntest_command = "x"\nprovider_row_cap = 0\n', {}, "provider_row_cap"),
    ('workspace = "w"\ntest_command = "x"\n', {"per_row_timeout": -1.0}, "per_row_timeout"),
    ('workspace = "w"\ntest_command = "x"\n', {"adapter": "junit"}, "adapter"),
    ('workspace = "w"\ntest_command = "x"\nretries = -1\n', {}, "retries"),
    ('workspace = \n', {}, "putforge.toml"),
])
def test_config_errors(make_project, toml, overrides, match):
    root = make_project({"putforge.toml": toml})
    with pytest.raises(ConfigError, match=match):
        load_config(root, overrides)


def test_workspace_may_not_contain_project(tmp_path):
    proj = tmp_path / "p"
    proj.mkdir()
    with pytest.raises(ConfigError, match="contain"):
        load_config(proj, {"workspace": str(tmp_path), "test_command": "x"})


def test_bad_path_exits_2(tmp_path, capsys):
    assert cli.main(["analyze", str(tmp_path / "missing"), "--workspace", str(tmp_path / "w")]) == 2
    assert "not a directory" in capsys.readouterr().err


def test_missing_workspace_exits_2(capsys):
    assert cli.main(["analyze", str(fixture_path("codec"))]) == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 2


def test_stage_prerequisites_exit_3(tmp_path, capsys):
    ws = str(tmp_path / "w")
    proj = str(fixture_path("codec"))
    assert cli.main(["capture", proj, "--mode", "test", "--workspace", ws]) == 3
    assert cli.main(["generate", proj, "--workspace", ws]) == 3
    assert "capture" in capsys.readouterr().err
    assert cli.main(["classify", proj, "--workspace", ws]) == 3
    assert cli.main(["report", proj, "--workspace", ws]) == 3


def test_parse_error_exits_4(make_project, tmp_path, capsys):
    root = make_project({"bad.py": "def f(:\n", "putforge.toml": 'test_command = "pytest"\n'})
    assert cli.main(["analyze", str(root), "--workspace", str(tmp_path / "w")]) == 4
    assert "bad.py:1" in capsys.readouterr().err


def test_empty_project_analyzes(make_project, tmp_path, capsys):
    root = make_project({"putforge.toml": 'test_command = "pytest"\n', "README": ""})
    ws = tmp_path / "w"
    assert cli.main(["analyze", str(root), "--workspace", str(ws)]) == 0
    assert json.loads((ws / "tests.json").read_text()) == []
    assert json.loads((ws / "targets.json").read_text()) == []
    assert '"targets": 0' in capsys.readouterr().out


def test_stages_end_to_end(tmp_path, capsys):
    ws = tmp_path / "w"
    proj = str(fixture_path("radio_form"))
    common = [proj, "--workspace", str(ws)]
    assert cli.main(["analyze", *common]) == 0
    targets = json.loads((ws / "targets.json").read_text())
    assert [t["id"] for t in targets] == ["radio.form.RadioButton.select_option(text)"]
    tests = json.loads((ws / "tests.json").read_text())
    assert tests[0] == {
        "id": "tests/test_form.py::test_radio_buttons",
        "file": "tests/test_form.py",
        "span": tests[0]["span"],
        "assertion_count": 2,
        "target_ids": ["radio.form.RadioButton.select_option(text)"],
    }
    assert cli.main(["capture", *common, "--mode", "test"]) == 0
    assert cli.main(["capture", *common, "--mode", "field", "--cmd", "{python} workload.py"]) == 0
    assert (ws / "capture.test.jsonl").exists() and (ws / "capture.field.jsonl").exists()
    assert cli.main(["generate", *common]) == 0
    manifest = (ws / "puts.json").read_bytes()
    assert cli.main(["generate", *common]) == 0
    assert (ws / "puts.json").read_bytes() == manifest
    puts = json.loads(manifest)
    assert {p["assertion_index"] for p in puts} == {0, 1}
    assert {p["provider_size"] for p in puts} == {12}
    assert cli.main(["classify", *common]) == 0
    out = capsys.readouterr().out
    assert '"falsifiably-coupled": 1' in out and '"strongly-coupled": 1' in out
    lines = (ws / "verdicts.jsonl").read_text().splitlines()
    assert len(lines) == 24 and json.loads(lines[0]) == {"put": puts[0]["put_id"], "row": 0, "o": "pass"}
    report = (ws / "report.json").read_bytes()
    (ws / "report.json").unlink()
    assert cli.main(["report", *common]) == 0
    assert (ws / "report.json").read_bytes() == report
    assert (ws / "report.md").read_text().startswith("# PUT classification")
    assert list((ws / "puts-project" / "finalized-puts").rglob("*.py"))


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "putforge", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("analyze", "capture", "generate", "classify", "report"):
        assert sub in out.stdout

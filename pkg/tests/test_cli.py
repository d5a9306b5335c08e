import json
from pathlib import Path

import pytest

from qtunnel import cli, errors


def run_cli(args):
    return cli.main(list(args))


def test_missing_config_file(tmp_path):
    code = run_cli(["bound-states", "--config", str(tmp_path / "nope.cfg"),
                    "--out", str(tmp_path / "out")])
    assert code == 2


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("k_max = 5\n")  # below sqrt(2 U0)
    code = run_cli(["bound-states", "--config", str(cfg), "--out", str(tmp_path / "o")])
    captured = capsys.readouterr()
    assert code == 2
    assert "INVALID_GRID" in captured.err
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_override_wins_over_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("xi = -1\n")  # invalid unless overridden
    out = tmp_path / "out"
    code = run_cli(["bound-states", "--config", str(cfg), "--xi", "0.5",
                    "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "complete"


def test_bound_states_outputs_and_determinism(tmp_path, capsys):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli(["bound-states", "--out", str(out1)]) == 0
    assert run_cli(["bound-states", "--out", str(out2)]) == 0
    csv1 = (out1 / "bound_states.csv").read_bytes()
    csv2 = (out2 / "bound_states.csv").read_bytes()
    assert csv1 == csv2
    lines = csv1.decode().splitlines()
    assert lines[0] == "j,k,E,kappa,lifetime"
    assert len(lines) == 3  # header + two bound states
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["config_hash"] == m2["config_hash"]
    for field in ("subcommand", "config_path", "output_directory", "tool_version",
                  "config_hash", "duration_s", "status"):
        assert field in m1


def test_numerical_failure_leaves_incomplete_manifest(tmp_path, monkeypatch):
    def boom(config, outdir, args):
        raise errors.PhaseUnresolvedError("forced for the test")

    monkeypatch.setitem(cli.COMMANDS, "bound-states", boom)
    out = tmp_path / "out"
    code = run_cli(["bound-states", "--out", str(out)])
    assert code == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "incomplete"


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["render-everything"])


def test_max_workers_env(monkeypatch):
    monkeypatch.delenv("QTUNNEL_THREADS", raising=False)
    assert cli.max_workers() == 1
    monkeypatch.setenv("QTUNNEL_THREADS", "4")
    assert cli.max_workers() == 4
    monkeypatch.setenv("QTUNNEL_THREADS", "zero")
    assert cli.max_workers() == 1


def test_float_format_is_16_digits(tmp_path):
    rows = [(1.0 / 3.0, 2, True, "txt")]
    path = tmp_path / "t.csv"
    cli.write_csv(path, ["a", "b", "c", "d"], rows)
    assert path.read_text() == "a,b,c,d\n0.3333333333333333,2,true,txt\n"

import json
import subprocess
import sys

import pytest

from wienersets import cli


def _run(args, tmp_path):
    return cli.main(args + ["--outdir", str(tmp_path)])


def test_every_command_documents_its_criterion(capsys):
    for name, cmd in cli.COMMANDS.items():
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args([name, "--help"])
        out = capsys.readouterr().out
        assert "PASS criterion" in out and cmd.criterion.split()[0] in out


def test_command_set():
    assert set(cli.COMMANDS) == {
        "sample-path", "extract-set", "slln", "disjoint", "disjoint-neg", "split-indep",
        "split-dual", "triviality", "supermult", "avoid-stopping", "stabilise", "chaos-check",
        "spectral-check", "nestedness"}


def test_sample_path_csv(tmp_path, capsys):
    assert _run(["sample-path", "--level", "3", "--seed", "0"], tmp_path) == 0
    assert capsys.readouterr().out.startswith("REPORT sample-path")
    lines = (tmp_path / "sample-path-0.csv").read_text().splitlines()
    assert lines[0] == "t,value" and len(lines) == 2 ** 3 + 2
    assert lines[1].split(",") == ["0", "0"]
    assert float(lines[-1].split(",")[0]) == 1.0
    doc = json.loads((tmp_path / "sample-path-0.json").read_text())
    assert doc["schema_version"] == "1.0" and doc["command"] == "sample-path"
    assert doc["config"]["level"] == 3


def test_chaos_check_passes(tmp_path, capsys):
    assert _run(["chaos-check", "--m", "10", "--seed", "1", "--n", "100"], tmp_path) == 0
    assert capsys.readouterr().out.startswith("PASS chaos-check")


def test_failure_exit_code(tmp_path, capsys):
    code = _run(["slln", "--d", "1.0", "--level", "10", "--n", "20", "--band", "1e-9"], tmp_path)
    assert code == 1 and capsys.readouterr().out.startswith("FAIL slln")


def test_usage_errors(tmp_path, capsys):
    assert _run(["sample-path", "--bogus", "1"], tmp_path) == 2
    assert _run(["slln", "--d", "2.5", "--n", "2"], tmp_path) == 2
    assert _run(["slln", "--n", "x"], tmp_path) == 2
    assert _run(["sample-path", "--threads", "0"], tmp_path) == 2
    assert _run(["extract-set", "--builder", "nope"], tmp_path) == 2
    assert cli.main([]) == 2
    capsys.readouterr()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nlevel = 4\nseed = 5\nright = 2\n")
    assert _run(["sample-path", "--config", str(cfg), "--level", "2"], tmp_path) == 0
    lines = (tmp_path / "sample-path-5.csv").read_text().splitlines()
    assert len(lines) == 2 * 2 ** 2 + 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert _run(["sample-path", "--config", str(bad)], tmp_path) == 2
    bad.write_text("no equals sign\n")
    assert _run(["sample-path", "--config", str(bad)], tmp_path) == 2
    capsys.readouterr()


@pytest.mark.parametrize("args", [
    ["extract-set", "--builder", "bessel:0.5", "--level", "10", "--depth", "4"],
    ["nestedness", "--indexer", "bessel:0.5", "--level", "10", "--paths", "6", "--n", "20"],
    ["disjoint", "--levels", "8,10", "--n", "12", "--depth", "5", "--min-depth", "3"],
])
def test_threads_do_not_change_csv(tmp_path, args, capsys):
    outs = []
    for t in (1, 4, 8):
        d = tmp_path / str(t)
        cli.main(args + ["--seed", "9", "--threads", str(t), "--outdir", str(d)])
        outs.append(next(d.glob("*.csv")).read_bytes())
    assert outs[0] == outs[1] == outs[2]
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "wienersets", "sample-path", "--level", "2",
                        "--outdir", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("REPORT")

import csv
import io
import json
import re
import subprocess
import sys

import pytest

from geodensity import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_line_format(capsys):
    code, out, _ = run(["eval", "--h", "0.5", "--x", "0", "--t", "1"], capsys)
    assert code == 0
    assert re.fullmatch(r"p= \S+ err= \d\.\d{3}e[+-]\d\d n_used= \d+\n", out)
    assert float(out.split()[1]) == pytest.approx(0.30246972040188, rel=1e-11)


def test_eval_terms_and_density_choice(capsys):
    code, out, _ = run(["eval", "--h", "0.5", "--x", "0.7", "--t", "1", "--terms"], capsys)
    lines = out.splitlines()
    n_used = int(lines[0].split()[-1])
    assert code == 0 and len(lines) == 1 + n_used
    assert all(line.startswith(f"term {k} |c|= ") for k, line in enumerate(lines[1:], 1))
    code, out, _ = run(["eval", "--h", "1", "--x", "0", "--t", "1", "--density", "ut-tail"], capsys)
    assert code == 0 and out.startswith("ut_tail= ")


def test_eval_json(capsys):
    code, out, _ = run(["eval", "--h", "0.5", "--x", "0", "--t", "1", "--json"], capsys)
    rec = json.loads(out)
    assert code == 0
    assert set(rec) == {"value", "err_estimate", "terms", "n_used", "config"}
    assert rec["config"]["engine"] == "fredholm"


def test_eval_x_symmetry_via_cli(capsys):
    _, a, _ = run(["eval", "--h", "1", "--x", "0.8", "--t", "1"], capsys)
    _, b, _ = run(["eval", "--h", "1", "--x", "-0.8", "--t", "1"], capsys)
    assert float(a.split()[1]) == pytest.approx(float(b.split()[1]), rel=1e-10)


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--h", "0", "--x", "0", "--t", "0"],
        ["eval", "--h", "0", "--x", "0"],
        ["eval", "--h", "0", "--x", "0", "--t", "1", "--nmax", "0"],
        ["grid", "--h-range", "0:1", "--x-range", "0:1:2", "--t", "1"],
        ["prelimit", "--h", "0.5", "--x", "0", "--t", "1", "--L", "0.9"],
        ["frobnicate"],
    ],
)
def test_argument_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = cli.main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2


def test_numerical_failure_exit_3(capsys):
    code, _, err = run(["eval", "--h", "1000", "--x", "0", "--t", "1"], capsys)
    assert code == 3 and "numerical failure" in err


def test_grid_csv(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code, _, err = run(["grid", "--h-range", "-1:1:3", "--x-range", "-0.5:0.5:3", "--t", "1", "--out", str(out)], capsys)
    assert code == 0 and "argmax_h" in err
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert rows[0] == cli.CSV_HEADER and len(rows) == 10
    by_key = {(r[0], r[1]): float(r[3]) for r in rows[1:]}
    assert by_key[("-1", "-0.5")] == pytest.approx(by_key[("-1", "0.5")], rel=1e-10)


def test_grid_unwritable_exit_4(tmp_path, capsys):
    code, _, _ = run(["grid", "--h-range", "0:0:1", "--x-range", "0:0:1", "--t", "1", "--out", str(tmp_path / "no" / "x.csv")], capsys)
    assert code == 4


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nh = 0.5\nx=0\nt=1\nnmax = 1\n")
    code, out, _ = run(["eval", "--config", str(cfg)], capsys)
    assert code == 0 and out.endswith("n_used= 1\n")
    code, out2, _ = run(["eval", "--config", str(cfg), "--h", "1.0"], capsys)
    assert code == 0 and out2.split()[1] != out.split()[1]
    cfg.write_text("h=0.5\ncolour=blue\n")
    code, _, err = run(["eval", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err
    code, _, _ = run(["eval", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 2


def test_validate_fast(tmp_path, capsys):
    log = tmp_path / "v.log"
    code, out, _ = run(["validate", "--suite", "fast", "--log", str(log)], capsys)
    assert code == 0
    assert out.splitlines()[-1].startswith("ALL PASS suite=fast")
    assert log.read_text() == out


def test_prelimit_json(capsys):
    code, out, _ = run(["prelimit", "--h", "0.5", "--x", "0", "--t", "1", "--L", "4", "--nodes", "12", "--json"], capsys)
    rec = json.loads(out)
    assert code == 0
    assert set(rec) == {"h", "x", "t", "L", "tau", "n_max", "ratio", "p", "rel_gap"}
    assert rec["tau"] == pytest.approx(0.125) and rec["n_max"] == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "geodensity", "eval", "--h", "0.5", "--x", "0", "--t", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("p= 0.3024697204")

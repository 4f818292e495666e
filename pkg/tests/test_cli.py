import csv
import json
import subprocess
import sys

import pytest

from mfgbench.cli import LOG_COLUMNS, SUMMARY_COLUMNS, main
from mfgbench.equilibrium import SCHEMES


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def quick(tmp_path, *extra, name="run"):
    out = tmp_path / name
    code = main(["run", "--env", "two_state", "--iters", "6", "--out", str(out), *extra])
    return code, out


def test_four_rooms_run_writes_one_row_per_iteration(tmp_path):
    out = tmp_path / "fp"
    code = main(["run", "--env", "four_rooms", "--algo", "fictitious_play", "--iters", "200",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    log = rows(out / "exploitability.csv")
    assert len(log) == 200
    assert tuple(log[0]) == LOG_COLUMNS
    assert [int(r["iter"]) for r in log] == list(range(1, 201))
    snap = rows(out / "dist_iter200_t40.csv")
    assert tuple(snap[0]) == ("row", "col", "mass") and len(snap) == 68
    assert sum(float(r["mass"]) for r in snap) == pytest.approx(1.0)
    assert sorted(p.name for p in out.glob("dist_iter*_t0.csv")) == [
        "dist_iter100_t0.csv", "dist_iter1_t0.csv", "dist_iter200_t0.csv"]


def test_all_writes_seven_scheme_directories(tmp_path):
    code, out = quick(tmp_path, "--algo", "all")
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(SCHEMES)
    for scheme in SCHEMES:
        assert len(rows(out / scheme / "exploitability.csv")) == 6
        assert json.loads((out / scheme / "metadata.json").read_text())["scheme"] == scheme


def test_unknown_scheme_exits_2_and_lists_valid_ones(tmp_path, capsys):
    code, _ = quick(tmp_path, "--algo", "gradient_descent")
    assert code == 2
    err = capsys.readouterr().err
    assert "gradient_descent" in err
    assert all(s in err for s in SCHEMES)


def test_state_snapshots_and_cadence(tmp_path):
    code, out = quick(tmp_path, "--snapshot-every", "4")
    assert code == 0
    iters = {int(p.name.split("_")[1][4:]) for p in out.glob("dist_iter*_t0.csv")}
    assert iters == {1, 4, 6}
    snap = rows(out / "dist_iter4_t3.csv")
    assert tuple(snap[0]) == ("state", "mass") and len(snap) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "env": {"name": "two_state", "crowd": 2.0},
        "algo": {"name": "omd", "iterations": 3, "omd_rate": 0.5},
        "output": {"dir": str(tmp_path / "from_file")},
    }))
    assert main(["run", "--config", str(cfg), "--omd-rate", "0.25"]) == 0
    meta = json.loads((tmp_path / "from_file" / "metadata.json").read_text())
    assert meta["config"]["env"]["crowd"] == 2.0
    assert meta["config"]["algo"]["omd_rate"] == 0.25
    assert meta["solver"]["omd_rate"] == 0.25
    assert len(rows(tmp_path / "from_file" / "exploitability.csv")) == 3


def test_metadata_materialises_defaults(tmp_path):
    _, out = quick(tmp_path)
    cfg = json.loads((out / "metadata.json").read_text())["config"]
    assert set(cfg) == {"env", "algo", "metrics", "output"}
    assert cfg["algo"]["seed"] == 0 and cfg["algo"]["damping"] == 0.5
    assert cfg["env"]["noise"] == 0.0 and cfg["metrics"]["exploitability_tol"] is None
    assert cfg["output"]["dir"] == str(out)


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps([1, 2]),
    json.dumps({"solver": {}}),
    json.dumps({"algo": {"unknown_knob": 1}}),
    json.dumps({"env": {"name": "two_state", "noise": 2.0}}),
    json.dumps({"algo": {"iterations": 0}}),
])
def test_bad_config_exits_2(tmp_path, content):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    assert main(["run", "--config", str(cfg), "--env", "two_state", "--out", str(tmp_path / "o")]) == 2


def test_unknown_env_exits_2(tmp_path):
    assert main(["run", "--env", "moon_base", "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_strict_exit_code(tmp_path):
    cfg = tmp_path / "tol.json"
    cfg.write_text(json.dumps({"metrics": {"exploitability_tol": -1.0}}))
    base = ["run", "--config", str(cfg), "--env", "two_state", "--iters", "3"]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--out", str(tmp_path / "b"), "--strict"]) == 3
    meta = json.loads((tmp_path / "b" / "metadata.json").read_text())
    assert meta["flags"]


def test_rl_fictitious_play_run(tmp_path):
    cfg = tmp_path / "rl.json"
    cfg.write_text(json.dumps({"algo": {"q_learning": {"episodes": 200}}}))
    code, out = quick(tmp_path, "--config", str(cfg), "--algo", "rl_fictitious_play", "--seed", "3")
    assert code == 0
    assert len(rows(out / "exploitability.csv")) == 6


def test_compare_single_dir(tmp_path, capsys):
    _, out = quick(tmp_path, "--algo", "omd")
    assert main(["compare", str(out), "--out", str(tmp_path)]) == 0
    summary = rows(tmp_path / "summary.csv")
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert len(summary) == 1 and summary[0]["scheme"] == "omd"
    log = rows(out / "exploitability.csv")
    assert float(summary[0]["final_exploitability"]) == float(log[-1]["exploitability"])
    assert "omd" in capsys.readouterr().out


def test_compare_requires_directories():
    with pytest.raises(SystemExit) as exc:
        main(["compare"])
    assert exc.value.code == 2


def test_compare_missing_file_exits_2(tmp_path):
    assert main(["compare", str(tmp_path / "empty"), "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mfgbench", "run", "--env", "two_state", "--algo", "nope"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2 and "valid schemes" in proc.stderr

import json
import subprocess
import sys

import pytest

from smoothgreedy.cli import main

CFG = {
    "environment": {"kind": "smoothed", "k": 3, "p": 6, "sigma": 0.4,
                    "strategy": {"name": "equal_means"}},
    "agent": {"algo": "single", "t_min": 4},
    "truth": {"mode": "single", "structure": "sparse", "norm": "l1", "s": 2},
    "horizon": 128,
    "seeds": [0, 1, 2, 3, 4],
}


def _cfg_file(tmp_path, obj=CFG):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return path


def test_run_and_summarize(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", "--config", str(_cfg_file(tmp_path)), "--out", str(out)]) == 0
    assert (out / "summary.json").is_file()
    capsys.readouterr()
    assert main(["summarize", "--in", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_traces"] == 5


def test_run_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SMOOTHGREEDY_SEEDS", "7,8")
    out = tmp_path / "res"
    assert main(["run", "--config", str(_cfg_file(tmp_path)), "--out", str(out)]) == 0
    assert sorted(f.name for f in out.glob("trace_seed*.csv")) == ["trace_seed7.csv",
                                                                   "trace_seed8.csv"]


def test_config_error_exit_code(tmp_path, capsys):
    bad = dict(CFG, truth={"mode": "single", "norm": "tv"})
    assert main(["run", "--config", str(_cfg_file(tmp_path, bad))]) == 2
    assert "truth.norm" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_runtime_error_exit_code(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", "--config", str(_cfg_file(tmp_path)), "--out", str(blocker / "x")]) == 3
    assert main(["summarize", "--in", str(tmp_path / "nowhere")]) == 3


@pytest.mark.parametrize("kind,params", [
    ("width", {"family": "l1", "p": 20, "s": 2, "n": 200, "directions": 200}),
    ("margin", {"sigma": 1.0, "r": 1.0, "n": 20000}),
    ("eigen", {"family": "l1", "p": 10, "s": 2, "T": 100, "directions": 100, "reps": 3}),
    ("argmaxvar", {"k": 3, "n": 20000}),
    ("tail", {"k": 10, "delta": 0.1, "n": 20000}),
    ("width", {"family": "nuclear", "shape": [3, 3], "rank": 1, "n": 200, "directions": 200}),
])
def test_diag_outputs_json(kind, params, capsys):
    assert main(["diag", kind, "--params", json.dumps(params)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert {"value", "std_error", "n"} <= set(out)


def test_diag_bad_params(capsys):
    assert main(["diag", "margin", "--params", "{oops"]) == 2
    assert main(["diag", "margin", "--params", "{}"]) == 2
    assert main(["diag", "margin", "--params", '{"sigma": 1, "r": 6, "n": 10000, '
                 '"method": "rejection"}']) == 3


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "smoothgreedy.cli", "diag", "argmaxvar",
                           "--params", '{"k": 2, "n": 10000}'], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 10000

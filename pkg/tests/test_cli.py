import csv
import json
import math
import shutil
import subprocess

import pytest

from lrcomplexity.cli import run


def run_json(capsys, argv):
    assert run(argv) == 0
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_closed_form_one_parameter(tmp_path, capsys):
    out = run_json(capsys, ["complexity", "--closed-form", "--n", "1", "--outdir", str(tmp_path)])
    assert out["value"] == pytest.approx(math.pi, rel=1e-15) and out["method"] == "closed_form"
    manifest = json.loads((tmp_path / "manifest_complexity.json").read_text())
    for key in ("command", "config", "seed", "version", "start", "end", "outputs"):
        assert key in manifest


def test_uniform_two_by_quadrature(tmp_path, capsys):
    out = run_json(capsys, ["complexity", "--uniform", "--n", "2", "--method", "quadrature",
                            "--outdir", str(tmp_path)])
    assert abs(out["value"] - math.pi ** 2 / 2) <= 1e-3 * math.pi ** 2 / 2


def test_missing_file_exits_two(tmp_path, capsys):
    assert run(["complexity", "--input", "nofile.csv", "--outdir", str(tmp_path)]) == 2
    assert "nofile.csv" in capsys.readouterr().err


def test_monte_carlo_needs_seed(tmp_path):
    assert run(["complexity", "--uniform", "--n", "4", "--method", "monte_carlo",
                "--outdir", str(tmp_path)]) == 2


def test_bad_argument_exits_two(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["complexity", "--method", "guess"])
    assert info.value.code == 2
    assert run(["complexity", "--uniform", "--n", "5", "--method", "quadrature",
                "--outdir", str(tmp_path)]) == 2


def test_console_script_runs(tmp_path):
    exe = shutil.which("lrcomplexity")
    if exe is None:
        pytest.skip("console script not installed")
    proc = subprocess.run([exe, "complexity", "--closed-form", "--n", "1", "--outdir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == pytest.approx(math.pi)


SIM = ["simulate", "--N", "6", "--k", "5,20", "--beta", "0.01", "--sparsity", "0,0.5",
       "--realizations", "2", "--criteria", "heuristic,bic,aic", "--burn-in", "20", "--thinning", "2",
       "--seed", "7"]


def test_simulate_is_deterministic_across_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(SIM + ["--outdir", str(a), "--threads", "1"]) == 0
    assert run(SIM + ["--outdir", str(b), "--threads", "2"]) == 0
    for name in ("results.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = list(csv.DictReader((a / "results.csv").open()))
    assert len(rows) == 2 * 2 * 3 * 2
    assert list(rows[0]) == ["beta", "k", "sparsity", "criterion", "realization", "error"]


def test_simulate_needs_seed(tmp_path):
    assert run([a for a in SIM if a not in ("--seed", "7")] + ["--outdir", str(tmp_path)]) == 2


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# small sweep\nN = 5\nk_values = 5\nbeta_values = 0.01\nsparsity_values = 0.4\n"
                   "realizations = 1\ncriteria = bic,aic\nseed = 3\nburn_in = 10\nthinning = 1\n")
    assert run(["simulate", "--config", str(cfg), "--outdir", str(tmp_path / "o")]) == 0
    assert len(list(csv.reader((tmp_path / "o" / "results.csv").open()))) == 1 + 2
    cfg.write_text("colour = red\n")
    assert run(["simulate", "--config", str(cfg), "--seed", "1", "--outdir", str(tmp_path / "p")]) == 2


def test_manifest_replay_is_byte_identical(tmp_path):
    a = tmp_path / "a"
    assert run(SIM + ["--outdir", str(a)]) == 0
    assert run(["replay", str(a / "manifest_simulate.json"), "--outdir", str(tmp_path / "b")]) == 0
    for name in ("results.csv", "summary.csv"):
        assert (a / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulated_data_round_trips_into_select(tmp_path, capsys):
    assert run(SIM + ["--save-data", "--outdir", str(tmp_path)]) == 0
    data = sorted((tmp_path / "data").glob("*.csv"))
    assert len(data) == 4
    capsys.readouterr()
    assert run(["select", str(data[0]), "--criterion", "all", "--search", "decimation", "--seed", "1",
                "--outdir", str(tmp_path / "sel")]) == 0
    report = json.loads((tmp_path / "sel" / "select.json").read_text())
    assert set(report["criteria"]) == {"heuristic", "bic", "aic", "l1"}
    for block in report["criteria"].values():
        assert len(block["candidates"]) >= 1 and "chosen" in block


def test_select_exhaustive_and_forward(tmp_path):
    assert run(SIM + ["--save-data", "--outdir", str(tmp_path)]) == 0
    path = str(sorted((tmp_path / "data").glob("*.csv"))[0])
    for search in ("forward", "exhaustive"):
        assert run(["select", path, "--criterion", "bic", "--search", search, "--seed", "1",
                    "--outdir", str(tmp_path / search)]) == 0


def test_keys_top_rows(tmp_path, capsys):
    assert run(["keys", "example", "--top", "42", "--outdir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "keys_posterior.csv").open()))
    assert len(rows) == 42
    scores = [float(r["score"]) for r in rows]
    assert scores == sorted(scores, reverse=True)
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["models"] == 2 ** 13
    hist = list(csv.DictReader((tmp_path / "keys_delta_rank_hist.csv").open()))
    assert sum(int(h["count"]) for h in hist) == 2 ** 13 - 1


def test_degenerate_curves(tmp_path):
    assert run(["degenerate", "--n-values", "1,2,10", "--outdir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "degenerate_curves.csv").open()))
    assert [int(r["n"]) for r in rows] == [1, 2, 10]
    assert float(rows[0]["uniform_configurations"]) == pytest.approx(math.pi, rel=1e-15)
    # 17 significant digits
    assert len(rows[2]["binomial_bound"].replace(".", "").lstrip("0")) >= 16

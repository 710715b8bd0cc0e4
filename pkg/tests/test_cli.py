import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gpclust import DegenerateComponentError, load_csv, read_labels
from gpclust import cli
from gpclust.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def sim(tmp_path):
    out = tmp_path / "s2.csv"
    assert run("simulate", "--scenario", 2, "--seed", 7, "--p", 60, "--out", out) == 0
    return out


def test_simulate_writes_dataset_and_truth(tmp_path, capsys):
    out = tmp_path / "s1.csv"
    assert run("simulate", "--scenario", 1, "--seed", 7, "--out", out) == 0
    ds = load_csv(out)
    assert (ds.N, ds.p) == (20, 300)
    np.testing.assert_array_equal(read_labels(tmp_path / "s1.truth.csv"), [1] * 10 + [2] * 10)
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and "N=20 p=300" in lines[0]


def test_simulate_defaults_scenario_2(tmp_path):
    assert run("simulate", "--scenario", 2, "--out", tmp_path / "d.csv") == 0
    ds = load_csv(tmp_path / "d.csv")
    assert (ds.N, ds.p) == (20, 300)


def test_simulate_unknown_scenario(tmp_path):
    assert run("simulate", "--scenario", 3, "--out", tmp_path / "x.csv") == 2


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("simulate", "--scenario", 1, "--seed", 3, "--p", 40, "--out", a)
    run("simulate", "--scenario", 1, "--seed", 3, "--p", 40, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.truth.csv").read_bytes() == (tmp_path / "b.truth.csv").read_bytes()


def test_simulate_unwritable_path(tmp_path):
    assert run("simulate", "--scenario", 1, "--out", tmp_path / "missing" / "x.csv") == 1


def test_fit_vecchia_writes_results(sim, tmp_path):
    assert run("fit", "--backend", "vecchia", "--m", 10, "--G", 2, sim) == 0
    result = json.loads((tmp_path / "s2.fit.json").read_text())
    assert result["backend"] == "vecchia" and result["m"] == 10
    assert len(result["labels"]) == 20
    assert len(result["objective_trace"]) == result["iterations"]
    assert set(result["wall_times"]) == {"setup", "evaluate", "e_step", "m_step"}
    assert len(result["model"]["components"]) == 2
    labels = read_labels(tmp_path / "s2.labels.csv")
    np.testing.assert_array_equal(labels, result["labels"])


def test_fit_recovers_truth_end_to_end(sim, tmp_path, capsys):
    run("fit", "--backend", "exact", "--G", 2, sim)
    capsys.readouterr()
    assert run("eval", tmp_path / "s2.truth.csv", tmp_path / "s2.labels.csv") == 0
    assert capsys.readouterr().out.strip() == "1.000000"


def test_fit_labels_are_deterministic(sim, tmp_path):
    run("fit", "--G", 2, "--seed", 4, "--labels-out", tmp_path / "a.csv", "--out-json", tmp_path / "a.json", sim)
    run("fit", "--G", 2, "--seed", 4, "--labels-out", tmp_path / "b.csv", "--out-json", tmp_path / "b.json", sim)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    a.pop("wall_times"), b.pop("wall_times")
    assert a == b


def test_fit_vecchia_requires_m(sim):
    assert run("fit", "--backend", "vecchia", "--G", 2, sim) == 2


def test_fit_matern_three_classes_with_smoothing(sim, tmp_path):
    assert run("fit", "--backend", "exact", "--G", 3, "--kernel", "matern12", "--window", 5, sim) == 0
    result = json.loads((tmp_path / "s2.fit.json").read_text())
    assert result["p"] == 56
    assert {c["family"] for c in result["model"]["components"]} == {"matern12"}


def test_fit_bad_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,a\n0,1\n1,zz\n")
    assert run("fit", "--G", 1, bad) == 2
    assert run("fit", "--G", 1, tmp_path / "nope.csv") == 1


def test_fit_degenerate_component_exit_code(sim, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise DegenerateComponentError(1)

    monkeypatch.setattr(cli, "fit", boom)
    assert run("fit", "--G", 2, sim) == 3
    assert "component 1" in capsys.readouterr().err


def write_labels_file(path, labels):
    path.write_text("curve,label\n" + "".join(f"y{i},{v}\n" for i, v in enumerate(labels)))
    return path


@pytest.mark.parametrize(
    "a,b,expect",
    [
        ([1, 2, 2, 3], [1, 2, 2, 3], "1.000000"),
        ([1, 1, 1, 1], [1, 2, 1, 2], "0.000000"),
        ([1, 1, 2, 2], [1, 2, 1, 2], "0.000000"),
    ],
)
def test_eval_prints_six_decimals(tmp_path, capsys, a, b, expect):
    fa = write_labels_file(tmp_path / "a.csv", a)
    fb = write_labels_file(tmp_path / "b.csv", b)
    assert run("eval", fa, fb) == 0
    assert capsys.readouterr().out.strip() == expect


def test_eval_length_mismatch(tmp_path):
    fa = write_labels_file(tmp_path / "a.csv", [1, 2, 1])
    fb = write_labels_file(tmp_path / "b.csv", [1, 2])
    assert run("eval", fa, fb) == 2


def test_bench_single_trial(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert run("bench", "--scenario", 2, "--p", 60, "--ms", 5, 10, "--trials", 1, "--restarts", 2, "--out", out) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["trial", "backend", "m", "p", "iterations", "seconds_per_iteration", "nmi"]
    assert [(r["backend"], r["m"]) for r in rows] == [("exact", ""), ("vecchia", "5"), ("vecchia", "10")]
    assert all(float(r["seconds_per_iteration"]) > 0 for r in rows)
    printed = capsys.readouterr().out
    assert "m=5" in printed and "m=10" in printed


def test_bench_deterministic_apart_from_timing(tmp_path):
    def body(path):
        run("bench", "--p", 40, "--ms", 5, "--trials", 2, "--restarts", 2, "--out", path)
        with open(path, newline="") as fh:
            return [{k: v for k, v in r.items() if k != "seconds_per_iteration"} for r in csv.DictReader(fh)]

    assert body(tmp_path / "a.csv") == body(tmp_path / "b.csv")


def test_config_file_and_flag_precedence(sim, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"backend": "vecchia", "m": 7, "G": 2, "restarts": 2}))
    assert run("--config", cfg, "fit", sim) == 0
    result = json.loads((tmp_path / "s2.fit.json").read_text())
    assert (result["backend"], result["m"]) == ("vecchia", 7)
    assert run("--config", cfg, "fit", "--m", 12, sim) == 0
    assert json.loads((tmp_path / "s2.fit.json").read_text())["m"] == 12


def test_config_unknown_key_rejected(sim, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"G": 2, "learning_rat": 0.1}))
    assert run("--config", cfg, "fit", sim) == 2


def test_threads_flag(sim):
    assert run("--threads", 1, "fit", "--G", 2, "--restarts", 2, sim) == 0
    assert run("--threads", 0, "fit", "--G", 2, sim) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gpclust", "simulate", "--scenario", "9", "--out", str(tmp_path / "x.csv")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    assert "invalid choice" in proc.stderr

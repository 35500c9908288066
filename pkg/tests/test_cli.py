"""End-to-end tests of the command-line interface."""

from pathlib import Path

import numpy as np
import pytest

from kolnet.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
PUT_D1 = str(PROBLEMS / "put_d1_gbm.txt")


def run(argv):
    return main(argv)


# ---------------------------------------------------------------------------
# certify


def test_certify_writes_table_and_csv(tmp_path, capsys):
    code = run([
        "certify", "--d", "1", "--eps", "0.1", "--rho", "0.05",
        "--C", "1.0", "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "certificate for d=1" in out
    csv = (tmp_path / "certificate.csv").read_text().splitlines()
    assert csv[0].startswith("# config_hash=")
    assert csv[1] == "quantity,value,formula"
    names = [line.split(",")[0] for line in csv[2:]]
    assert {"m", "P(a)", "R"} <= set(names)


def test_certify_rejects_bad_eps(tmp_path, capsys):
    code = run([
        "certify", "--d", "1", "--eps", "1.5", "--rho", "0.05",
        "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_USAGE
    assert "eps" in capsys.readouterr().err


def test_certify_deterministic(tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    for d in (a_dir, b_dir):
        assert run([
            "certify", "--d", "2", "--eps", "0.2", "--rho", "0.1",
            "--out-dir", str(d),
        ]) == EXIT_OK
    assert (a_dir / "certificate.csv").read_bytes() == (b_dir / "certificate.csv").read_bytes()


# ---------------------------------------------------------------------------
# simulate


def test_simulate_reference_csv(tmp_path):
    code = run([
        "simulate", PUT_D1, "--seed", "1", "--out-dir", str(tmp_path),
        "--grid", "8", "--paths", "2000",
    ])
    assert code == EXIT_OK
    lines = (tmp_path / "reference.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "x_1,estimate,std_error"
    assert len(lines) == 10
    est = [float(line.split(",")[1]) for line in lines[2:]]
    assert all(-1.0 <= e <= 1.0 for e in est)


def test_simulate_missing_problem(tmp_path, capsys):
    code = run([
        "simulate", str(tmp_path / "nope.txt"), "--seed", "1",
        "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_USAGE


def test_simulate_reproducible(tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    for d in (a_dir, b_dir):
        run([
            "simulate", PUT_D1, "--seed", "7", "--out-dir", str(d),
            "--grid", "4", "--paths", "1000",
        ])
    assert (a_dir / "reference.csv").read_bytes() == (b_dir / "reference.csv").read_bytes()


# ---------------------------------------------------------------------------
# build + evaluate


def test_build_then_evaluate(tmp_path, capsys):
    code = run([
        "build", PUT_D1, "--n", "64", "--retries", "2", "--seed", "2",
        "--out-dir", str(tmp_path), "--grid", "16", "--paths", "2000",
    ])
    assert code == EXIT_OK
    net_file = tmp_path / "built_network.txt"
    assert net_file.exists()
    report = (tmp_path / "build_report.csv").read_text().splitlines()
    assert report[0] == "retry,l2_error_estimate,theta_norm,param_count"
    assert len(report) == 3

    code = run([
        "evaluate", PUT_D1, str(net_file), "--seed", "3",
        "--out-dir", str(tmp_path), "--grid", "32", "--paths", "1000",
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "closed_form" in out
    lines = (tmp_path / "evaluation.csv").read_text().splitlines()
    assert lines[1] == "l2_error,noise_floor,reference,grid"
    err = float(lines[2].split(",")[0])
    assert err < 1e-2  # n=64 Monte-Carlo width is already accurate


# ---------------------------------------------------------------------------
# train

def test_train_pipeline_small(tmp_path, capsys):
    code = run([
        "train", PUT_D1, "--m", "4000", "--arch", "1,16,1",
        "--iters", "3000", "--lr", "0.003", "--seed", "5",
        "--out-dir", str(tmp_path), "--grid", "64", "--paths", "1000",
    ])
    assert code == EXIT_OK
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[1].split(",")[0] == "d"
    vals = dict(zip(summary[1].split(","), summary[2].split(",")))
    assert vals["reference"] == "closed_form"
    assert float(vals["l2_error"]) < 1e-2
    assert (tmp_path / "trained_network.txt").exists()
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "iter,batch_risk,full_risk"


def test_train_missing_args_usage_error(tmp_path):
    assert run(["train", PUT_D1, "--seed", "1"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# scaling-study


def test_scaling_study_needs_three_dims(tmp_path, capsys):
    code = run([
        "scaling-study", "--dims", "1,2", "--seed", "1",
        "--out-dir", str(tmp_path),
    ])
    assert code == EXIT_USAGE
    assert "3 distinct" in capsys.readouterr().err


def test_scaling_study_tiny(tmp_path, capsys):
    # Deliberately small budgets: exercises the loop, CSV shape, and audit
    # wiring; the acceptance suite runs the full-scale version.
    code = run([
        "scaling-study", "--dims", "1,2,3", "--m-base", "2000",
        "--iters", "4000", "--lr", "0.003", "--width", "16",
        "--grid", "32", "--paths", "2000", "--target", "0.05",
        "--seed", "9", "--out-dir", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code in (EXIT_OK, EXIT_NUMERIC)
    lines = (tmp_path / "scaling.csv").read_text().splitlines()
    assert lines[1] == "d,m,l2_error,noise_floor,target_hit,slope,r_squared,verdict"
    assert len(lines) == 5
    slope = float(lines[2].split(",")[5])
    assert slope == pytest.approx(2.0, abs=1e-9)  # m = m_base * d^2 exactly


# ---------------------------------------------------------------------------
# top-level


def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == EXIT_USAGE


def test_no_wall_clock_seed_default():
    # Seed is mandatory for every experiment command.
    assert run(["simulate", PUT_D1]) == EXIT_USAGE

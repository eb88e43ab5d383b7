"""End-to-end tests for the command-line front end.

Commands run in-process through main(argv) so exit codes and outputs are
checked directly; one subprocess test covers the installed entry point.
"""

import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from plds import (
    REPORT_COLUMNS,
    Sequence,
    TrainingSet,
    kalman_filter,
    load_model,
    read_posterior_csv,
    read_sequence_csv,
    require_valid,
    sample_static_pairs,
    write_sequence_csv,
    write_posterior_csv,
    write_training_csv,
)
from plds.cli import main

from conftest import random_model


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def generator_block(n_modes=2, obs_dim=3, latent_dim=2, **extra):
    block = {"n_modes": n_modes, "obs_dim": obs_dim, "latent_dim": latent_dim}
    block.update(extra)
    return block


def run_simulate(tmp_path, subdir, seed=5, T=50, n_sequences=1, **gen_kwargs):
    out = tmp_path / subdir
    config = write_config(tmp_path / f"{subdir}.json", {
        "generator": generator_block(**gen_kwargs),
        "T": T, "n_sequences": n_sequences, "seed": seed,
    })
    code = main(["simulate", "--config", config, "--out", str(out)])
    assert code == 0
    return out


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_model_and_sequences(tmp_path, capsys):
    out = run_simulate(tmp_path, "sim", T=50, n_sequences=2)
    listed = capsys.readouterr().out.splitlines()
    assert listed == [str(out / "model.json"),
                      str(out / "seq_000.csv"), str(out / "seq_001.csv")]
    theta, phi = load_model(out / "model.json")
    require_valid(theta, phi)
    for name in ("seq_000.csv", "seq_001.csv"):
        seq = read_sequence_csv(out / name)
        assert seq.T == 50
        assert seq.x is not None and seq.z is not None


def test_simulate_is_deterministic(tmp_path):
    out_a = run_simulate(tmp_path, "a", seed=9)
    out_b = run_simulate(tmp_path, "b", seed=9)
    for name in ("model.json", "seq_000.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_simulate_seed_flag_overrides_config(tmp_path):
    config = write_config(tmp_path / "c.json", {
        "generator": generator_block(), "T": 20, "seed": 1,
    })
    main(["simulate", "--config", config, "--out", str(tmp_path / "x"),
          "--seed", "2"])
    main(["simulate", "--config", config, "--out", str(tmp_path / "y")])
    a = (tmp_path / "x" / "seq_000.csv").read_bytes()
    b = (tmp_path / "y" / "seq_000.csv").read_bytes()
    assert a != b


def test_simulate_warns_on_zero_separation(tmp_path):
    config = write_config(tmp_path / "c.json", {
        "generator": generator_block(separation=0.0), "T": 10, "seed": 1,
    })
    with pytest.warns(UserWarning, match="SEPARATION_ZERO"):
        code = main(["simulate", "--config", config,
                     "--out", str(tmp_path / "z")])
    assert code == 0


def test_missing_config_file_is_validation_error(tmp_path, capsys):
    code = main(["simulate", "--config", str(tmp_path / "nope.json")])
    assert code == 2
    assert "BAD_CONFIG" in capsys.readouterr().err


def test_missing_input_file_is_validation_error(tmp_path, capsys):
    config = write_config(tmp_path / "c.json", {
        "method": "static", "training": str(tmp_path / "nope.csv"),
        "out": str(tmp_path / "out"),
    })
    code = main(["fit", "--config", config])
    assert code == 2
    assert "BAD_CONFIG" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# fit


def test_fit_static_then_dynamic_compose(tmp_path, rng):
    theta_true, _ = random_model(rng, K=2, D=3, L=2, separation=3.0)
    data = sample_static_pairs(theta_true, 500, rng=3)
    train_csv = tmp_path / "train.csv"
    write_training_csv(train_csv, data)

    static_out = tmp_path / "static"
    config = write_config(tmp_path / "fs.json", {
        "method": "static", "training": str(train_csv),
        "n_modes": 2, "n_restarts": 2, "seed": 4,
    })
    assert main(["fit", "--config", config, "--out", str(static_out)]) == 0
    theta_fit, phi_default = load_model(static_out / "model.json")
    require_valid(theta_fit, phi_default)
    assert theta_fit.K == 2

    sim_out = run_simulate(tmp_path, "seqs", T=80)
    dyn_out = tmp_path / "dyn"
    config = write_config(tmp_path / "fd.json", {
        "method": "dynamic-var", "model": str(static_out / "model.json"),
        "sequences": [str(sim_out / "seq_000.csv")],
        "config": {"max_em_iters": 5},
    })
    assert main(["fit", "--config", config, "--out", str(dyn_out)]) == 0
    theta_dyn, phi_dyn = load_model(dyn_out / "model.json")
    require_valid(theta_dyn, phi_dyn)
    assert_allclose(theta_dyn.A, theta_fit.A)

    rows = (dyn_out / "trace.csv").read_text().strip().splitlines()
    assert rows[0] == "iteration,elbo"
    assert 1 <= len(rows) - 1 <= 5


def test_fit_dynamic_var_single_mode_trace_monotone(tmp_path):
    sim_out = run_simulate(tmp_path, "k1", n_modes=1, T=60)
    fit_out = tmp_path / "fit"
    config = write_config(tmp_path / "f.json", {
        "method": "dynamic-var", "model": str(sim_out / "model.json"),
        "sequences": str(sim_out / "seq_000.csv"),
        "config": {"max_em_iters": 10},
    })
    assert main(["fit", "--config", config, "--out", str(fit_out)]) == 0
    rows = (fit_out / "trace.csv").read_text().strip().splitlines()[1:]
    values = np.array([float(r.split(",")[1]) for r in rows])
    assert np.all(np.diff(values) >= -1e-7 * np.maximum(1.0, np.abs(values[:-1])))


def test_fit_dynamic_gpb2_runs(tmp_path):
    sim_out = run_simulate(tmp_path, "g", T=60)
    fit_out = tmp_path / "fit"
    config = write_config(tmp_path / "f.json", {
        "method": "dynamic-gpb2", "model": str(sim_out / "model.json"),
        "sequences": str(sim_out / "seq_000.csv"),
        "config": {"max_em_iters": 5},
    })
    assert main(["fit", "--config", config, "--out", str(fit_out)]) == 0
    rows = (fit_out / "trace.csv").read_text().strip().splitlines()
    assert rows[0] == "iteration,loglik"


def test_fit_unknown_method_exits_2(tmp_path, capsys):
    config = write_config(tmp_path / "f.json", {"method": "boost"})
    assert main(["fit", "--config", config]) == 2
    assert "UNKNOWN_METHOD" in capsys.readouterr().err


def test_fit_dimension_mismatch_exits_2(tmp_path, capsys):
    sim_small = run_simulate(tmp_path, "small", obs_dim=2, T=20)
    sim_big = run_simulate(tmp_path, "big", obs_dim=4, T=20)
    config = write_config(tmp_path / "f.json", {
        "method": "dynamic-var", "model": str(sim_big / "model.json"),
        "sequences": str(sim_small / "seq_000.csv"),
    })
    assert main(["fit", "--config", config, "--out", str(tmp_path / "o")]) == 2
    assert "DIMENSION_MISMATCH" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# track


def test_track_kalman_matches_exact_filter(tmp_path):
    sim_out = run_simulate(tmp_path, "k1", n_modes=1, T=40)
    track_out = tmp_path / "track"
    config = write_config(tmp_path / "t.json", {
        "method": "kalman", "model": str(sim_out / "model.json"),
        "sequence": str(sim_out / "seq_000.csv"),
    })
    assert main(["track", "--config", config, "--out", str(track_out)]) == 0

    mean, cov, resp = read_posterior_csv(track_out / "estimates.csv")
    theta, phi = load_model(sim_out / "model.json")
    seq = read_sequence_csv(sim_out / "seq_000.csv")
    ref = kalman_filter(theta, phi, seq.y)
    assert mean.shape[0] == 40
    assert_allclose(mean, ref.filt_mean, atol=1e-8)
    assert_allclose(cov, ref.filt_cov, atol=1e-8)
    assert_allclose(resp, 1.0)


@pytest.mark.parametrize("method", ["static", "gpb2-filter", "gpb2-smoother",
                                    "var-filter", "var-smoother"])
def test_track_row_count_matches_sequence(tmp_path, method):
    sim_out = run_simulate(tmp_path, "m", T=30)
    track_out = tmp_path / f"track_{method}"
    config = write_config(tmp_path / f"t_{method}.json", {
        "method": method, "model": str(sim_out / "model.json"),
        "sequence": str(sim_out / "seq_000.csv"),
    })
    assert main(["track", "--config", config, "--out", str(track_out)]) == 0
    mean, _, resp = read_posterior_csv(track_out / "estimates.csv")
    assert mean.shape[0] == 30
    assert_allclose(resp.sum(axis=1), 1.0, atol=1e-8)


def test_track_unknown_method_exits_2(tmp_path, capsys):
    sim_out = run_simulate(tmp_path, "u", T=10)
    config = write_config(tmp_path / "t.json", {
        "method": "imm", "model": str(sim_out / "model.json"),
        "sequence": str(sim_out / "seq_000.csv"),
    })
    assert main(["track", "--config", config]) == 2
    assert "UNKNOWN_METHOD" in capsys.readouterr().err


def test_track_method_failure_exits_3(tmp_path, capsys):
    # exact Kalman on a two-mode model fails inside the method runner
    sim_out = run_simulate(tmp_path, "k2", n_modes=2, T=10)
    config = write_config(tmp_path / "t.json", {
        "method": "kalman", "model": str(sim_out / "model.json"),
        "sequence": str(sim_out / "seq_000.csv"),
    })
    assert main(["track", "--config", config,
                 "--out", str(tmp_path / "o")]) == 3
    assert "NOT_SINGLE_MODE" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evaluate


def make_truth_file(tmp_path, x, z=None, name="truth.csv"):
    y = np.zeros((x.shape[0], 1))
    path = tmp_path / name
    write_sequence_csv(path, Sequence(y=y, x=x, z=z))
    return path


def make_estimates_file(tmp_path, mean, resp=None, name="est.csv"):
    T, L = mean.shape
    resp = np.ones((T, 1)) if resp is None else resp
    cov = np.broadcast_to(np.eye(L), (T, L, L))
    path = tmp_path / name
    write_posterior_csv(path, mean, cov, resp)
    return path


def test_evaluate_identity_scores_zero(tmp_path, rng, capsys):
    x = rng.standard_normal((25, 2))
    truth = make_truth_file(tmp_path, x)
    est = make_estimates_file(tmp_path, x)
    code = main(["evaluate", "--estimates", str(est), "--truth", str(truth),
                 "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "evaluation.json").read_text())
    assert report["mae"] == 0.0 and report["rmse"] == 0.0
    assert json.loads(capsys.readouterr().out) == report


def test_evaluate_constant_offset_per_dimension(tmp_path, rng):
    x = rng.standard_normal((30, 2))
    truth = make_truth_file(tmp_path, x)
    est = make_estimates_file(tmp_path, x + np.array([1.0, 0.0]))
    main(["evaluate", "--estimates", str(est), "--truth", str(truth),
          "--out", str(tmp_path)])
    report = json.loads((tmp_path / "evaluation.json").read_text())
    assert_allclose(report["per_dimension_mae"], [1.0, 0.0], atol=1e-12)
    assert_allclose(report["std"], 0.5, atol=1e-12)


def test_evaluate_half_normal_mae(tmp_path):
    gen = np.random.default_rng(77)
    x = np.zeros((10000, 1))
    truth = make_truth_file(tmp_path, x)
    est = make_estimates_file(tmp_path, gen.standard_normal((10000, 1)))
    main(["evaluate", "--estimates", str(est), "--truth", str(truth),
          "--out", str(tmp_path)])
    report = json.loads((tmp_path / "evaluation.json").read_text())
    assert abs(report["mae"] - np.sqrt(2.0 / np.pi)) < 0.03


def test_evaluate_reports_mode_accuracy(tmp_path, rng):
    x = rng.standard_normal((40, 1))
    z = np.array([1] * 20 + [2] * 20)
    truth = make_truth_file(tmp_path, x, z=z)
    resp = np.zeros((40, 2))
    resp[np.arange(40), (z - 1 + 1) % 2] = 1.0   # every label flipped
    est = make_estimates_file(tmp_path, x, resp=resp)
    main(["evaluate", "--estimates", str(est), "--truth", str(truth),
          "--out", str(tmp_path)])
    report = json.loads((tmp_path / "evaluation.json").read_text())
    assert report["mode_acc"] == 1.0   # alignment undoes the relabeling


def test_evaluate_needs_truth_columns(tmp_path, rng, capsys):
    x = rng.standard_normal((10, 1))
    est = make_estimates_file(tmp_path, x)
    bare = tmp_path / "bare.csv"
    write_sequence_csv(bare, Sequence(y=np.zeros((10, 1))))
    assert main(["evaluate", "--estimates", str(est),
                 "--truth", str(bare)]) == 2
    assert "BAD_CONFIG" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# compare


def test_compare_report_and_pipeline_consistency(tmp_path, capsys):
    sim_out = run_simulate(tmp_path, "cmp", seed=6, T=40)
    compare_out = tmp_path / "compare"
    methods = ["static", "gpb2-filter", "var-filter"]
    config = write_config(tmp_path / "c.json", {
        "model": str(sim_out / "model.json"),
        "methods": methods, "T": 40, "seeds": [7],
    })
    assert main(["compare", "--config", config,
                 "--out", str(compare_out)]) == 0
    printed = capsys.readouterr().out

    report_lines = (compare_out / "report.csv").read_text().strip().splitlines()
    assert report_lines[0] == ",".join(REPORT_COLUMNS)
    assert len(report_lines) == 1 + len(methods)
    assert (compare_out / "report.txt").exists()
    assert (compare_out / "trajectory_000.csv").exists()
    summary = json.loads((compare_out / "summary.json").read_text())
    assert summary["seeds"] == [7] and summary["methods"] == methods
    assert [r["method"] for r in summary["rows"]] == methods
    assert "method" in printed

    # the same sequence tracked and evaluated separately gives the same MAE:
    # simulate with seed 6 draws seq_000 from stream 7, matching seeds=[7]
    track_out = tmp_path / "track"
    config = write_config(tmp_path / "t.json", {
        "method": "gpb2-filter", "model": str(sim_out / "model.json"),
        "sequence": str(sim_out / "seq_000.csv"),
    })
    assert main(["track", "--config", config, "--out", str(track_out)]) == 0
    assert main(["evaluate", "--estimates", str(track_out / "estimates.csv"),
                 "--truth", str(sim_out / "seq_000.csv"),
                 "--out", str(track_out)]) == 0
    evaluation = json.loads((track_out / "evaluation.json").read_text())
    row = next(r for r in summary["rows"] if r["method"] == "gpb2-filter")
    assert_allclose(evaluation["mae"], row["mae"], atol=1e-12)
    assert_allclose(evaluation["rmse"], row["rmse"], atol=1e-12)


def test_compare_marks_failed_methods(tmp_path):
    sim_out = run_simulate(tmp_path, "k2", n_modes=2, T=20)
    compare_out = tmp_path / "cmp"
    config = write_config(tmp_path / "c.json", {
        "model": str(sim_out / "model.json"),
        "methods": ["kalman", "static"], "T": 20, "seeds": [3],
    })
    assert main(["compare", "--config", config,
                 "--out", str(compare_out)]) == 0
    text = (compare_out / "report.txt").read_text()
    assert "FAILED" in text
    summary = json.loads((compare_out / "summary.json").read_text())
    static_row = next(r for r in summary["rows"] if r["method"] == "static")
    assert np.isfinite(static_row["mae"])


def test_compare_rejects_unknown_method(tmp_path, capsys):
    sim_out = run_simulate(tmp_path, "s", T=10)
    config = write_config(tmp_path / "c.json", {
        "model": str(sim_out / "model.json"), "methods": ["imm"],
    })
    assert main(["compare", "--config", config]) == 2
    assert "UNKNOWN_METHOD" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({
        "generator": generator_block(), "T": 15, "seed": 2,
    }))
    proc = subprocess.run(
        [sys.executable, "-m", "plds.cli", "simulate", "--config", str(config),
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "out" / "model.json").exists()

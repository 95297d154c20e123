import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmfpurify import config as C
from nmfpurify.analysis import RECORD_FIELDS
from nmfpurify.cli import main
from nmfpurify.errors import ConfigError
from nmfpurify.matcore import load_matrix_csv, save_matrix_csv

SMALL = """\
seed = 7
model.m = 12
model.n = 5
weights.s = 1.5
algo.T = 3
algo.N = 3000
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config ------------------------------------------------------------------------


def test_config_round_trip(small_cfg):
    cfg = C.load_config(str(small_cfg))
    again = C.resolve(C.parse_config_text(C.format_config(cfg)))
    assert again == cfg
    assert C.format_config(again) == C.format_config(cfg)


def test_config_errors_name_key():
    with pytest.raises(ConfigError) as exc:
        C.parse_config_text("model.nn = 3\n")
    assert exc.value.key == "model.nn"
    with pytest.raises(ConfigError) as exc:
        C.resolve({})
    assert exc.value.key == "seed"
    with pytest.raises(ConfigError) as exc:
        C.resolve({"seed": "1", "algo.T": "many"})
    assert exc.value.key == "algo.T"
    with pytest.raises(ConfigError):
        C.parse_config_text("just words\n")


def test_config_comments_and_auto():
    cfg = C.resolve(C.parse_config_text("# header\nseed = 3  # trailing\nalgo.eta = 0.05\n"))
    assert cfg["seed"] == 3 and cfg["algo.eta"] == 0.05 and cfg["algo.alpha"] == C.AUTO
    algo = C.build_algo(cfg)
    assert algo.eta == 0.05 and algo.alpha == pytest.approx(1 / 80)


@settings(max_examples=50)
@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(0, 2**64 - 1))
def test_float_and_seed_round_trip(x, seed):
    cfg = C.resolve({"seed": seed, "noise.level": x})
    again = C.resolve(C.parse_config_text(C.format_config(cfg)))
    assert again["noise.level"] == x and again["seed"] == seed


def test_two_group_weights():
    cfg = C.resolve({"seed": 1, "model.n": 6, "weights.kind": "two_group", "weights.s": 1.2})
    w = C.build_weights(cfg)
    assert np.allclose(w.second_moments(), [0.1] * 3 + [0.01] * 3)


# -- gen ----------------------------------------------------------------------------


def test_gen_identity(tmp_path, small_cfg):
    out = tmp_path / "g"
    assert _run("gen", "--config", small_cfg, "--out", out, "--set", "model.ground_truth=identity") == 0
    assert np.array_equal(load_matrix_csv(out / "a_star.csv"), np.eye(12, 5))
    assert (out / "a0.csv").exists() and (out / "resolved_config.cfg").exists()


def test_gen_deterministic(tmp_path, small_cfg):
    for d in ("a", "b"):
        assert _run("gen", "--config", small_cfg, "--out", tmp_path / d) == 0
    for name in ("a_star.csv", "a0.csv", "resolved_config.cfg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_bad_dims(tmp_path, small_cfg, capsys):
    assert _run("gen", "--config", small_cfg, "--out", tmp_path, "--set", "model.m=3") == 2
    err = capsys.readouterr().err
    assert "m=3" in err and "n=5" in err


@pytest.mark.parametrize("override, key", [("model.bogus=1", "model.bogus"), ("algo.eta=2.0", "algo.eta"),
                                           ("noise.kind=loud", "noise.kind")])
def test_config_exit_two(tmp_path, small_cfg, capsys, override, key):
    assert _run("run", "--config", small_cfg, "--out", tmp_path, "--set", override) == 2
    assert key in capsys.readouterr().err


def test_missing_seed_exit_two(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("model.n = 3\n")
    assert _run("gen", "--config", cfg, "--out", tmp_path) == 2
    assert "seed" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert _run("gen", "--config", tmp_path / "nope.cfg", "--out", tmp_path) == 2


# -- run -----------------------------------------------------------------------------


def test_run_artifacts(tmp_path, small_cfg):
    out = tmp_path / "r"
    assert _run("run", "--config", small_cfg, "--out", out) == 0
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == list(RECORD_FIELDS) and len(rows) == 1 + 4
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"final_col_err", "iterations", "wall_time_s", "params_echo", "git_describe"}
    assert summary["iterations"] == 3
    assert summary["params_echo"] == (out / "resolved_config.cfg").read_text()
    assert float(rows[-1][-1]) == pytest.approx(summary["final_col_err"], rel=1e-12)
    A = load_matrix_csv(out / "a_normalized.csv")
    assert np.allclose(np.abs(A).sum(axis=0), 1.0, atol=1e-12)


def test_run_zero_iterations(tmp_path, small_cfg):
    assert _run("run", "--config", small_cfg, "--out", tmp_path, "--set", "algo.T=0") == 0
    assert len(_rows(tmp_path / "trajectory.csv")) == 2


def test_rerun_from_params_echo_and_threads(tmp_path, small_cfg):
    assert _run("run", "--config", small_cfg, "--out", tmp_path / "a") == 0
    echo = tmp_path / "echo.cfg"
    echo.write_text(json.loads((tmp_path / "a" / "summary.json").read_text())["params_echo"])
    assert _run("run", "--config", echo, "--out", tmp_path / "b", "--threads", 4) == 0
    for name in ("trajectory.csv", "a_final.csv", "a_normalized.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_overrides(tmp_path, small_cfg):
    assert _run("gen", "--config", small_cfg, "--out", tmp_path / "a", "--seed", 8) == 0
    assert _run("gen", "--config", small_cfg, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "a_star.csv").read_bytes() != (tmp_path / "b" / "a_star.csv").read_bytes()
    assert "seed = 8" in (tmp_path / "a" / "resolved_config.cfg").read_text()


def test_rank_deficient_exit_three(tmp_path, small_cfg, capsys):
    bad = tmp_path / "a0.csv"
    save_matrix_csv(bad, np.ones((12, 5)))
    out = tmp_path / "r"
    assert _run("run", "--config", small_cfg, "--out", out, "--set", f"init.a0_path={bad}") == 3
    assert "iteration 0" in capsys.readouterr().err
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == list(RECORD_FIELDS) and len(rows) == 2


def test_a0_path_wrong_shape(tmp_path, small_cfg):
    bad = tmp_path / "a0.csv"
    save_matrix_csv(bad, np.ones((4, 2)))
    assert _run("run", "--config", small_cfg, "--out", tmp_path, "--set", f"init.a0_path={bad}") == 2


# -- equilibrate ------------------------------------------------------------------------

EQUIL = """\
seed = 3
model.m = 16
model.n = 8
weights.kind = two_group
weights.s = 2.0
init.ell = 0.02
init.e_sign = nonnegative
equil.T_inner = 1
equil.epsilon = 0.05
equil.N = 4000
algo.T = 3
algo.N = 3000
"""


def test_equilibrate_artifacts(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(EQUIL)
    out = tmp_path / "e"
    assert _run("equilibrate", "--config", cfg, "--out", out, "--then-purify") == 0
    log = _rows(out / "equil_log.csv")
    assert log[0] == ["pass", "S_size", "lambda", "balance_ratio"]
    assert int(log[-1][1]) == 8 and float(log[-1][3]) <= 2.0
    D = json.loads((out / "d.json").read_text())
    assert len(D) == 8 and min(D) >= 1.0
    assert load_matrix_csv(out / "a_balanced.csv").shape == (16, 8)
    assert len(_rows(out / "trajectory.csv")) == 1 + 4


def test_equilibrate_bad_epsilon(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(EQUIL)
    assert _run("equilibrate", "--config", cfg, "--out", tmp_path, "--set", "equil.epsilon=1.5") == 2


def test_equilibrate_cap_exit_four(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text(EQUIL)
    assert _run("equilibrate", "--config", cfg, "--out", tmp_path, "--set", "equil.max_outer=2") == 4


# -- sweep ----------------------------------------------------------------------------


def test_single_value_sweep_equals_run(tmp_path, small_cfg):
    assert _run("run", "--config", small_cfg, "--out", tmp_path / "run") == 0
    assert _run("sweep", "--config", small_cfg, "--out", tmp_path / "sw", "--axis", "noise_level",
                "--values", "0.0") == 0
    rows = _rows(tmp_path / "sw" / "sweep.csv")
    assert rows[0] == ["value", "replicate", "seed", "status", "final_col_err", "wall_time_s"]
    assert rows[1][3] == "ok"
    run_err = json.loads((tmp_path / "run" / "summary.json").read_text())["final_col_err"]
    assert float(rows[1][4]) == run_err
    assert ((tmp_path / "run" / "trajectory.csv").read_bytes()
            == (tmp_path / "sw" / "rep0_v0" / "trajectory.csv").read_bytes())


def test_sweep_records_failures(tmp_path, small_cfg):
    # ell = 0.7 is invalid for the warm start, so that point fails and is recorded
    assert _run("sweep", "--config", small_cfg, "--out", tmp_path, "--axis", "warm_start_ell",
                "--values", "0.05,0.7", "--set", "sweep.replicates=2") == 0
    rows = _rows(tmp_path / "sweep.csv")[1:]
    assert len(rows) == 4
    status = {(r[0], r[1]): r[3] for r in rows}
    assert status[("0.05", "0")] == "ok" and status[("0.7", "1")].startswith("error:")
    seeds = {r[1]: r[2] for r in rows}
    assert seeds["0"] == "7" and seeds["1"] != "7"


def test_sweep_all_fail_nonzero(tmp_path, small_cfg):
    assert _run("sweep", "--config", small_cfg, "--out", tmp_path, "--axis", "warm_start_ell",
                "--values", "0.7") != 0


def test_sweep_without_values(tmp_path, small_cfg):
    assert _run("sweep", "--config", small_cfg, "--out", tmp_path) == 2


# -- verify, pinv, oracle ------------------------------------------------------------------


def test_verify_zero_draws(capsys):
    assert _run("verify", "--draws", 0) == 0
    assert json.loads(capsys.readouterr().out) == []


@pytest.mark.parametrize("suite", ["norms", "pinv", "recurrences", "lemmas"])
def test_verify_suites_pass(suite, capsys):
    assert _run("verify", "--suite", suite, "--draws", 10) == 0
    report = json.loads(capsys.readouterr().out)
    assert report and all(r["failures"] == 0 and r["draws"] == 10 for r in report)
    assert all(set(r) == {"name", "draws", "failures", "worst_slack", "hypothesis_violations"}
               for r in report)


def test_verify_pinv_hundred(capsys):
    assert _run("verify", "--suite", "pinv", "--draws", 100) == 0


def test_verify_failure_exit_five(monkeypatch, capsys):
    import nmfpurify.cli as cli
    monkeypatch.setattr(cli, "run_suite", lambda s, seed, d: [
        {"name": "fake", "draws": d, "failures": 1, "worst_slack": -1.0, "hypothesis_violations": 0}])
    assert _run("verify", "--suite", "norms", "--draws", 1) == 5
    assert "fake" in capsys.readouterr().err


def test_pinv_command(tmp_path):
    src = tmp_path / "a.csv"
    save_matrix_csv(src, np.array([[2.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    assert _run("pinv", "--input", src, "--out", tmp_path / "p") == 0
    assert np.allclose(load_matrix_csv(tmp_path / "p" / "pinv.csv"), [[0.5, 0, 0], [0, 1, 0]])
    side = json.loads((tmp_path / "p" / "pinv.json").read_text())
    assert side["inf_norm"] == pytest.approx(1.0) and side["shape"] == [2, 3]


def test_pinv_errors(tmp_path):
    assert _run("pinv", "--out", tmp_path) == 2
    src = tmp_path / "a.csv"
    save_matrix_csv(src, np.ones((3, 2)))
    assert _run("pinv", "--input", src, "--out", tmp_path) == 3


def test_oracle_command(tmp_path, capsys):
    cfg = tmp_path / "o.cfg"
    cfg.write_text("seed = 1\nmodel.m = 4\nmodel.n = 2\nmodel.ground_truth = identity\n"
                   "weights.s = 1\ninit.ell = 0\nalgo.alpha = 0\n")
    assert _run("oracle", "--config", cfg, "--out", tmp_path) == 0
    M = load_matrix_csv(tmp_path / "expected_update.csv")
    assert np.allclose(M, np.eye(4, 2) * 0.5)
    big = tmp_path / "b.cfg"
    big.write_text("seed = 1\nmodel.m = 20\nmodel.n = 15\n")
    assert _run("oracle", "--config", big, "--out", tmp_path) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nmfpurify", "verify", "--draws", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "[]"

import csv
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import ndtri

from conftest import TRUE_ANGLE, TRUE_BETA


def run_cli(*args, threads=None):
    env = os.environ.copy()
    env.pop("RANKDIR_THREADS", None)
    if threads is not None:
        env["RANKDIR_THREADS"] = str(threads)
    return subprocess.run(
        [sys.executable, "-m", "rankdir.cli", *map(str, args)],
        capture_output=True, text=True, env=env,
    )


def parse_output(text):
    """Split CLI CSV output into (comment, header, data rows)."""
    lines = text.splitlines()
    assert lines[0].startswith("# rankdir ")
    rows = list(csv.reader(lines[1:]))
    return lines[0], rows[0], rows[1:]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    rng = np.random.default_rng(123)

    X3 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    write_csv(root / "three.csv", ["x1", "x2", "y"],
              [[*row, yv] for row, yv in zip(X3.tolist(), [1.0, 2.0, 3.0])])

    X = rng.standard_normal((30, 2)) * np.sqrt([1.0, 2.0])
    y = X @ TRUE_BETA + rng.standard_normal(30)
    write_csv(root / "data30.csv", ["x1", "x2", "y"],
              np.column_stack([X, y]).tolist())

    Xn = rng.standard_normal((60, 2)) * np.sqrt([1.0, 2.0])
    write_csv(root / "noiseless60.csv", ["x1", "x2", "y"],
              np.column_stack([Xn, Xn @ TRUE_BETA]).tolist())

    index = Xn @ TRUE_BETA
    groups = np.repeat(["a", "b"], 30)
    yg = np.where(groups == "a", index, 1000.0 + 0.001 * index)
    write_csv(root / "grouped.csv", ["x1", "x2", "y", "g"],
              [[*r, g] for r, g in zip(np.column_stack([Xn, yg]).tolist(), groups)])

    X3c = rng.standard_normal((40, 3))
    y3 = X3c @ [2.0, 1.0, 0.5] + rng.standard_normal(40)
    write_csv(root / "three_cov.csv", ["x1", "x2", "x3", "y"],
              np.column_stack([X3c, y3]).tolist())

    write_csv(root / "collinear.csv", ["x1", "x2", "y"],
              [[v, v, t] for v, t in zip(X[:, 0], y)])
    write_csv(root / "constant_y.csv", ["x1", "x2", "y"],
              [[*r, 5.0] for r in X.tolist()])
    write_csv(root / "text_y.csv", ["x1", "x2", "y"],
              [[1.0, 2.0, "apple"], [2.0, 1.0, "pear"], [0.0, 1.0, "plum"]])
    rows = np.column_stack([X[:10], y[:10]]).tolist()
    rows[4][0] = ""  # one missing covariate entry
    write_csv(root / "missing.csv", ["x1", "x2", "y"], rows)

    (root / "scenario.ini").write_text(
        "[scenario]\n"
        "beta0 = 2 1\n"
        "n = 40\n"
        "trials = 3\n"
        "seed = 3\n"
        "methods = ols, tgqr\n\n"
        "[covariates]\n"
        "kind = gaussian\n"
        "covariance = 1 0; 0 2\n\n"
        "[error]\n"
        "kind = gaussian\n"
        "variance = 1.0\n\n"
        "[sweep]\n"
        "name = n\n"
        "values = 20, 40\n"
    )
    return root


# ---------------------------------------------------------------------------
# fit


def test_fit_three_rows_hand_checked(data_dir):
    res = run_cli("fit", "--input", data_dir / "three.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 0, res.stderr
    comment, header, rows = parse_output(res.stdout)
    assert header == ["term", "estimate", "direction"]
    assert comment.startswith("# rankdir 0.1.0 | command: fit ")
    assert comment.endswith("| seed: 0")

    # oracle: ranks (1,2,3) -> levels (1/4, 2/4, 3/4); no clamping at n=3;
    # exact solve of the square system [1 | X] beta = quantiles
    z = ndtri([0.25, 0.5, 0.75])
    D = np.column_stack([np.ones(3), [[1, 0], [0, 1], [1, 1]]])
    full = np.linalg.solve(D, z)
    got = {r[0]: r for r in rows}
    assert float(got["x1"][1]) == pytest.approx(full[1], rel=1e-9)
    assert float(got["x2"][1]) == pytest.approx(full[2], rel=1e-9)
    assert float(got["intercept"][1]) == pytest.approx(full[0], rel=1e-9)
    direction = full[1:] / np.linalg.norm(full[1:])
    assert float(got["x1"][2]) == pytest.approx(direction[0], rel=1e-9)
    expected_angle = math.degrees(math.atan(full[2] / full[1]))
    assert float(got["angle_degrees"][1]) == pytest.approx(expected_angle, rel=1e-9)
    assert "ad_statistic" not in got  # diagnostic needs 8 rows
    assert "at least 8 rows" in res.stderr


@pytest.mark.parametrize("method", ["gqr", "tgqr", "eqr", "spearmax", "ols"])
def test_fit_all_methods(data_dir, method):
    res = run_cli("fit", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--method", method)
    assert res.returncode == 0, res.stderr
    _, _, rows = parse_output(res.stdout)
    got = {r[0]: r for r in rows}
    assert set(got) == {"x1", "x2", "intercept", "angle_degrees",
                        "ad_statistic", "ad_reject_at_0.001"}
    angle = math.radians(float(got["angle_degrees"][1]))
    assert abs(angle - TRUE_ANGLE) < math.radians(20.0)
    d = np.array([float(got["x1"][2]), float(got["x2"][2])])
    assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-9)
    if method == "spearmax":
        assert float(got["intercept"][1]) == 0.0


def test_fit_is_reproducible_bytes(data_dir):
    args = ("fit", "--input", data_dir / "data30.csv",
            "--response", "y", "--covariates", "x1,x2")
    a, b = run_cli(*args), run_cli(*args)
    assert a.stdout == b.stdout
    assert a.stdout.count("\n") >= 7


def test_fit_grouped_column(data_dir):
    res = run_cli("fit", "--input", data_dir / "grouped.csv",
                  "--response", "y", "--covariates", "x1,x2", "--group", "g")
    assert res.returncode == 0, res.stderr
    _, _, rows = parse_output(res.stdout)
    got = {r[0]: r for r in rows}
    angle = math.radians(float(got["angle_degrees"][1]))
    assert abs(angle - TRUE_ANGLE) < math.radians(5.0)


def test_fit_reports_dropped_rows(data_dir):
    res = run_cli("fit", "--input", data_dir / "missing.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 0
    assert "dropped 1 incomplete row" in res.stderr


def test_fit_writes_output_file(data_dir, tmp_path):
    out = tmp_path / "fit.csv"
    res = run_cli("fit", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--output", out)
    assert res.returncode == 0
    assert res.stdout == ""
    comment, header, rows = parse_output(out.read_text())
    assert header == ["term", "estimate", "direction"]
    assert len(rows) == 6


# ---------------------------------------------------------------------------
# exit codes


def test_exit_code_usage_errors(data_dir):
    assert run_cli().returncode == 2  # no subcommand
    res = run_cli("fit", "--input", data_dir / "data30.csv",
                  "--response", "nope", "--covariates", "x1,x2")
    assert res.returncode == 2
    assert "usage error" in res.stderr and "nope" in res.stderr
    res = run_cli("fit", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", " , ")
    assert res.returncode == 2


def test_exit_code_data_errors(data_dir):
    res = run_cli("fit", "--input", data_dir / "no_such.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 3
    assert "data error" in res.stderr and "cannot read" in res.stderr
    res = run_cli("fit", "--input", data_dir / "text_y.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 3
    assert "not numeric" in res.stderr
    res = run_cli("fit", "--input", data_dir / "constant_y.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 3
    assert "degenerate ranks" in res.stderr


def test_exit_code_numerical_error(data_dir):
    res = run_cli("fit", "--input", data_dir / "collinear.csv",
                  "--response", "y", "--covariates", "x1,x2")
    assert res.returncode == 4
    assert "numerical error" in res.stderr and "singular design" in res.stderr


def test_thread_env_validation(data_dir):
    for bad in ("abc", "0", "-3"):
        res = run_cli("fit", "--input", data_dir / "data30.csv",
                      "--response", "y", "--covariates", "x1,x2", threads=bad)
        assert res.returncode == 2
        assert "RANKDIR_THREADS" in res.stderr


# ---------------------------------------------------------------------------
# ci


def test_ci_bootstrap(data_dir):
    res = run_cli("ci", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2",
                  "--replicates", 25, "--level", "0.9")
    assert res.returncode == 0, res.stderr
    _, header, rows = parse_output(res.stdout)
    assert header == ["term", "estimate", "lower", "upper", "excludes_zero"]
    assert [r[0] for r in rows] == ["x1", "x2"]
    for r in rows:
        point, lower, upper = map(float, r[1:4])
        assert lower <= point <= upper


def test_ci_bootstrap_flags_nonzero_coordinates(data_dir):
    res = run_cli("ci", "--input", data_dir / "noiseless60.csv",
                  "--response", "y", "--covariates", "x1,x2", "--replicates", 50)
    assert res.returncode == 0, res.stderr
    _, _, rows = parse_output(res.stdout)
    assert all(r[4] == "*" for r in rows)


def test_ci_bootstrap_two_replicates_ignore_level(data_dir):
    args = ("ci", "--input", data_dir / "data30.csv",
            "--response", "y", "--covariates", "x1,x2", "--replicates", 2)
    a = run_cli(*args, "--level", "0.5")
    b = run_cli(*args, "--level", "0.99")
    _, _, rows_a = parse_output(a.stdout)
    _, _, rows_b = parse_output(b.stdout)
    for ra, rb in zip(rows_a, rows_b):
        assert ra[2] == rb[2] and ra[3] == rb[3]


def test_ci_bootstrap_width_grows_with_level(data_dir):
    args = ("ci", "--input", data_dir / "data30.csv",
            "--response", "y", "--covariates", "x1,x2", "--replicates", 199)
    lo = parse_output(run_cli(*args, "--level", "0.80").stdout)[2]
    hi = parse_output(run_cli(*args, "--level", "0.95").stdout)[2]
    for rl, rh in zip(lo, hi):
        assert float(rh[3]) - float(rh[2]) >= float(rl[3]) - float(rl[2])


def test_ci_bootstrap_thread_count_does_not_change_bytes(data_dir):
    args = ("ci", "--input", data_dir / "data30.csv",
            "--response", "y", "--covariates", "x1,x2", "--replicates", 40)
    assert run_cli(*args).stdout == run_cli(*args, threads=2).stdout


@pytest.mark.parametrize("ci_method", ["jackknife", "jackknife-bc", "percentile-jackknife"])
def test_ci_jackknife_variants(data_dir, ci_method):
    res = run_cli("ci", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--ci", ci_method)
    assert res.returncode == 0, res.stderr
    _, header, rows = parse_output(res.stdout)
    assert header == ["term", "estimate", "lower", "upper", "excludes_zero"]
    assert len(rows) == 1 and rows[0][0] == "angle_degrees"
    lower, upper = float(rows[0][2]), float(rows[0][3])
    assert lower < upper


def test_ci_jackknife_bias_correction_moves_center(data_dir):
    args = ("ci", "--input", data_dir / "data30.csv",
            "--response", "y", "--covariates", "x1,x2")
    plain = parse_output(run_cli(*args, "--ci", "jackknife").stdout)[2][0]
    bc = parse_output(run_cli(*args, "--ci", "jackknife-bc").stdout)[2][0]
    center_plain = (float(plain[2]) + float(plain[3])) / 2.0
    center_bc = (float(bc[2]) + float(bc[3])) / 2.0
    # correction subtracts the leave-one-out mean, relocating the interval
    assert abs(center_bc - center_plain) > 1.0


def test_ci_studentized(data_dir):
    res = run_cli("ci", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--ci", "studentized")
    assert res.returncode == 0, res.stderr
    _, _, rows = parse_output(res.stdout)
    assert rows[0][0] == "angle_degrees"
    assert float(rows[0][2]) <= float(rows[0][1]) <= float(rows[0][3])


def test_ci_usage_errors(data_dir):
    res = run_cli("ci", "--input", data_dir / "three_cov.csv",
                  "--response", "y", "--covariates", "x1,x2,x3", "--ci", "jackknife")
    assert res.returncode == 2
    assert "exactly 2" in res.stderr
    res = run_cli("ci", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--level", "1.5")
    assert res.returncode == 2
    res = run_cli("ci", "--input", data_dir / "data30.csv",
                  "--response", "y", "--covariates", "x1,x2", "--replicates", 1)
    assert res.returncode == 2


# ---------------------------------------------------------------------------
# simulate


def test_simulate_config_roundtrip(data_dir, tmp_path):
    args = ("simulate", "--config", data_dir / "scenario.ini")
    res = run_cli(*args)
    assert res.returncode == 0, res.stderr
    comment, header, rows = parse_output(res.stdout)
    assert header == ["method", "sweep_value", "bias_deg", "sd_deg", "trials_completed"]
    assert len(rows) == 4  # 2 sweep cells x 2 methods
    assert {r[0] for r in rows} == {"ols", "tgqr"}
    assert res.stdout == run_cli(*args).stdout
    assert res.stdout == run_cli(*args, threads=2).stdout
    out = tmp_path / "sim.csv"
    res = run_cli(*args, "--output", out)
    assert res.stdout == ""
    assert parse_output(out.read_text())[2] == rows


def test_simulate_preset_grid(data_dir):
    res = run_cli("simulate", "--scenario", "gaussian_grid", "--trials", 1, "--seed", 1)
    assert res.returncode == 0, res.stderr
    comment, header, rows = parse_output(res.stdout)
    assert "| seed: 1" in comment
    assert len(rows) == 28  # 7 sample sizes x 4 methods
    assert [r[0] for r in rows[:4]] == ["ols", "tgqr", "eqr", "spearmax"]
    assert {r[1] for r in rows} == {"25", "50", "100", "250", "500", "1000", "3000"}


def test_simulate_usage_errors(data_dir):
    assert run_cli("simulate").returncode == 2
    res = run_cli("simulate", "--scenario", "gaussian_grid",
                  "--config", data_dir / "scenario.ini")
    assert res.returncode == 2
    assert "exactly one" in res.stderr
    res = run_cli("simulate", "--scenario", "bogus")
    assert res.returncode == 2
    assert "unknown scenario" in res.stderr
    res = run_cli("simulate", "--scenario", "gaussian_grid", "--trials", 0)
    assert res.returncode == 2


# ---------------------------------------------------------------------------
# check


def test_check_reports_known_failure(data_dir, tmp_path):
    out = tmp_path / "checks.csv"
    res = run_cli("check", "--seed", 0, "--output", out)
    assert res.returncode == 5
    lines = [l for l in res.stdout.splitlines() if l]
    assert len(lines) == 5
    assert sum(l.startswith("PASS") for l in lines) == 4
    fail_lines = [l for l in lines if l.startswith("FAIL")]
    assert len(fail_lines) == 1 and "clt_dispersion" in fail_lines[0]
    assert "failed checks: clt_dispersion" in res.stderr

    comment, header, rows = parse_output(out.read_text())
    assert header == ["check_name", "statistic", "threshold", "passed",
                      "n_used", "replicates"]
    assert [r[0] for r in rows] == ["lemma1_identity", "lemma4_fourth_moment",
                                    "lemma10_rank_gap", "slope_identity",
                                    "clt_dispersion"]
    assert [r[3] for r in rows] == ["1", "1", "1", "1", "0"]


def test_check_perturbation_is_detected():
    res = run_cli("check", "--perturb", "1.25")
    assert res.returncode == 5
    lines = [l for l in res.stdout.splitlines() if l]
    assert len(lines) == 5
    assert all(l.startswith("FAIL") for l in lines)

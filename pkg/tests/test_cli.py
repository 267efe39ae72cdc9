import json
import math

import numpy as np
import pytest

from paraosc.cli import main
from paraosc.output import manifest_hash, read_csv


def run(tmp_path, *argv, out="out"):
    target = tmp_path / out
    code = main([*argv, "--out", str(target)])
    return code, target


def column(rows, columns, name):
    return np.array([r[columns.index(name)] for r in rows])


def test_stability_chart_grid(tmp_path):
    code, out = run(tmp_path, "stability-chart", "--a", "0:5", "--b", "-1:1", "--res", "20")
    assert code == 0
    comments, columns, rows = read_csv(out / "chart.csv")
    assert columns == ["a", "b", "stable", "imF"]
    assert len(rows) == 400
    manifest = json.loads((out / "manifest.json").read_text())
    assert f"manifest_sha256={manifest['sha256']}" in comments
    assert manifest_hash({k: v for k, v in manifest.items() if k not in ("sha256", "summary")}) == manifest["sha256"]


def test_default_chart_has_first_tongue_tip_at_one(tmp_path):
    code, out = run(tmp_path, "stability-chart", "--a", "0.5:1.5", "--b", "0:0.2", "--res", "21")
    assert code == 0
    _, columns, rows = read_csv(out / "chart.csv")
    a, b, stable = (column(rows, columns, k) for k in ("a", "b", "stable"))
    unstable_a = a[(stable == 0) & (b > 0)]
    assert unstable_a.min() < 1 < unstable_a.max()
    # at b = 0 the tongue has closed to the single point a = 1
    tip = (b == 0) & (np.abs(a - 1) < 1e-12)
    assert tip.sum() == 1


def test_resolution_one_is_usage_error(tmp_path, capsys):
    code, out = run(tmp_path, "stability-chart", "--res", "1")
    assert code == 2
    assert not out.exists()
    assert "--res" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["entropy", "--g", "0.1", "--delta-g", "0.2"],
    ["entropy", "--samples", "1"],
    ["mode-line", "--g-range", "0.5:0.3"],
    ["wigner", "--times", "-1"],
    ["nosuch"],
    ["entropy", "--g", "0.3", "--delta-g", "0.01", "--delta-ratio", "0.1"],
    ["entropy", "--rel-tol", "0.5"],
])
def test_usage_errors_write_nothing(tmp_path, argv):
    code, out = run(tmp_path, *argv)
    assert code == 2
    assert not out.exists()


def test_mode_line(tmp_path):
    code, out = run(tmp_path, "mode-line", "--delta-ratio", "0.1", "--g-range", "0.3:0.5", "--n", "101")
    assert code == 0
    _, columns, rows = read_csv(out / "mode_line.csv")
    g = column(rows, columns, "g")
    assert np.all(np.diff(g) > 0)
    unstable = column(rows, columns, "stable_minus") == 0
    edges = np.flatnonzero(np.diff(unstable.astype(int)))
    assert len(edges) == 2 and g[edges[0] + 1] <= 0.38 <= g[edges[1]]
    assert np.all(column(rows, columns, "stable_plus") == 1)


def test_mode_line_without_drive(tmp_path):
    code, out = run(tmp_path, "mode-line", "--delta-ratio", "0", "--g-range", "0:0.499", "--n", "51")
    assert code == 0
    _, columns, rows = read_csv(out / "mode_line.csv")
    assert np.all(column(rows, columns, "stable_minus") == 1)


def test_entropy_static_and_uncoupled(tmp_path):
    code, out = run(tmp_path, "entropy", "--g", "0.4", "--delta-g", "0", "--t-max", "20", "--samples", "101")
    assert code == 0
    _, columns, rows = read_csv(out / "entropy.csv")
    assert np.max(np.abs(column(rows, columns, "L") - (1 - math.sqrt(3) / 2))) < 1e-9
    _, aux_cols, aux_rows = read_csv(out / "aux.csv")
    assert len(aux_rows) == 101 and "wronskian_err_minus" in aux_cols
    code, out = run(tmp_path, "entropy", "--g", "0", "--delta-g", "0", "--t-max", "5", out="free")
    assert code == 0
    _, columns, rows = read_csv(out / "entropy.csv")
    assert np.all(np.abs(column(rows, columns, "L")) < 1e-12)


def test_entropy_unstable_growth(tmp_path):
    code, out = run(tmp_path, "entropy", "--g", "0.38", "--t-max", "50", "--samples", "1001")
    assert code == 0
    _, columns, rows = read_csv(out / "entropy.csv")
    L = column(rows, columns, "L")
    assert L[-100:].mean() > L[:100].mean()


def test_wigner_default_times(tmp_path):
    code, out = run(tmp_path, "wigner", "--g", "0.4", "--res", "200")
    assert code == 0
    for name in ("wigner_t0.csv", "wigner_t32.csv", "wigner_t50.csv"):
        _, columns, rows = read_csv(out / name)
        assert columns == ["q", "p", "W"] and len(rows) == 200 * 200
        W = np.array(rows)[:, 2]
        assert abs(W.sum() * (16 / 199) ** 2 - 1) < 1e-3


def test_density_grids(tmp_path):
    code, out = run(tmp_path, "density", "--g", "0", "--delta-g", "0", "--times", "0,5", "--res", "41")
    assert code == 0
    _, _, rows = read_csv(out / "density_t5.csv")
    rho = np.array(rows)[:, 2].reshape(41, 41)
    assert np.array_equal(rho, rho.T)
    code, out = run(tmp_path, "density", "--g", "0.4", "--res", "400", out="paper")
    assert code == 0
    _, columns, rows = read_csv(out / "density_summary.csv")
    assert np.all(np.abs(column(rows, columns, "total") - 1) < 1e-3)


def test_density_stretching_in_unstable_zone(tmp_path):
    code, out = run(tmp_path, "density", "--g", "0.38", "--times", "0,32,50", "--x-range=-12:12", "--res", "300")
    assert code == 0
    _, columns, rows = read_csv(out / "density_summary.csv")
    stretch = column(rows, columns, "stretch")
    assert np.all(np.diff(stretch) > 0)
    assert stretch[-1] > 5 * stretch[0]


def test_general_check(tmp_path):
    code, out = run(tmp_path, "general-check", "--periods", "10", "--samples", "51")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert all(item["pass"] for item in manifest["summary"].values())


def test_general_check_corrupted_seed(tmp_path, capsys):
    code, _ = run(tmp_path, "general-check", "--periods", "1", "--corrupt", "1.01")
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_fixed_step_rerun_is_byte_identical(tmp_path):
    code, first = run(tmp_path, "--fixed-step", "0.02", "entropy", "--g", "0.38", "--t-max", "10",
                      "--samples", "51", out="a")
    assert code == 0
    assert main(["rerun", str(first / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    for name in ("entropy.csv", "aux.csv"):
        assert (first / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_global_flags_after_subcommand(tmp_path):
    code, out = run(tmp_path, "mode-line", "--n", "5", "--fixed-step", "0.05")
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["integrator"]["method"] == "rk4"


def test_config_file(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"g": 0.3, "delta_g": 0.0}))
    code, out = run(tmp_path, "--config", str(cfg), "entropy", "--t-max", "2", "--samples", "3")
    assert code == 0
    params = json.loads((out / "manifest.json").read_text())["params"]
    assert params["g"] == 0.3 and params["delta_g"] == 0.0
    cfg.write_text(json.dumps({"g": 0.3, "bogus": 1}))
    assert run(tmp_path, "--config", str(cfg), "entropy", out="bad")[0] == 2

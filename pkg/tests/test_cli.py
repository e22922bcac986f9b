import csv
import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from rbfrank import __version__, indexcomb
from rbfrank import io as rio
from rbfrank.cli import main, read_metadata
from rbfrank.pointgen import GENERATOR_ID


def run(*argv):
    return main([str(a) for a in argv])


def body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def rows(path):
    return list(csv.DictReader(body(path)))


# ---------------------------------------------------------------- factorize

@pytest.mark.derived
def test_factorize_cheb_rank(tmp_path):
    assert run("factorize", "--profile", "gaussian", "--construction", "cheb", "--d", 3, "--n", 8,
               "--D", 1, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["declared_rank"] == indexcomb.rank_chebyshev(8, 3) == 1287
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert plan["construction"] == "chebyshev" and len(plan["terms"]) == 1287


def test_factorize_n0(tmp_path):
    assert run("factorize", "--d", 4, "--n", 0, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "report.json").read_text())["declared_rank"] == 1


@pytest.mark.derived
def test_factorize_ft_rank(tmp_path):
    assert run("factorize", "--construction", "ft", "--mf", 1, "--mt", 9, "--d", 2, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["declared_rank"] == 4 * math.comb(11, 2) == 220
    assert report["retained_rank"] <= report["declared_rank"]


def test_factorize_ratio_violation_exit_code(tmp_path, capsys):
    assert run("factorize", "--construction", "ft", "--mf", 2, "--mt", 9, "--d", 2, "--out", tmp_path) == 2
    assert "9" in capsys.readouterr().err


def test_factorize_resource_exit_code(tmp_path):
    assert run("sample", "--scheme", "uniform", "--N", 5000, "--d", 2, "--out", tmp_path) == 3


def test_factorize_with_points(tmp_path):
    assert run("sample", "--scheme", "uniform", "--N", 40, "--d", 2, "--box", "0,0.7",
               "--seed", 1, "--out", tmp_path) == 0
    pts = tmp_path / "points.csv"
    assert run("factorize", "--d", 2, "--n", 8, "--points", pts, "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["empirical_max_error"] <= report["error_bound"]
    G = rio.read_matrix(tmp_path / "G.csv")
    assert G.shape == (40, indexcomb.rank_chebyshev(8, 2))
    assert run("factorize", "--d", 2, "--n", 4, "--points", pts, "--factor-format", "bin",
               "--out", tmp_path / "b") == 0
    assert (tmp_path / "b" / "H.bin").read_bytes()[:4] == b"RBFK"


def test_factorize_ft_with_points_attaches_bound(tmp_path):
    d = 2
    lo, hi = 0.0, 0.3 / math.sqrt(d)
    run("sample", "--scheme", "uniform", "--N", 50, "--d", d, "--box", f"{lo},{hi}", "--out", tmp_path)
    assert run("factorize", "--construction", "ft", "--mf", 1, "--mt", 9, "--d", d,
               "--points", tmp_path / "points.csv", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["error_bound"] is not None
    assert report["empirical_max_error"] <= report["error_bound"]


# ---------------------------------------------------------------- bounds

@pytest.mark.derived
def test_bounds_worked_rows(tmp_path):
    out = tmp_path
    assert run("bounds", "--d", 3, "--n-list", 3, "--rho-sq", 2, "--C", 1, "--out", out / "a") == 0
    (row,) = rows(out / "a" / "bounds.csv")
    assert float(row["deterministic_bound"]) == pytest.approx(0.25)
    assert int(row["rank"]) == indexcomb.rank_chebyshev(3, 3)

    assert run("bounds", "--d", 1, "--ft", "1:9", "--norm-f", 1, "--vq", 1, "--q", 2, "--D", 1,
               "--dx", 0.5, "--dy", 0.5, "--out", out / "b") == 0
    (row,) = rows(out / "b" / "bounds.csv")
    expect = 0.25**10 + (1 / (2 * math.pi)) * (2 / math.pi) ** 2
    assert float(row["deterministic_bound"]) == pytest.approx(expect)
    assert int(row["rank"]) == 40

    assert run("bounds", "--d", 100, "--n-list", 1, "--rho-sq", 2, "--C", 1,
               "--delta", repr(math.sqrt(0.1)), "--out", out / "c") == 0
    (row,) = rows(out / "c" / "bounds.csv")
    assert float(row["prob_bound"]) == pytest.approx(0.00952, rel=1e-3)
    assert 0 < float(row["probability"]) <= 1 and row["vacuous"] == "0"


def test_bounds_metadata_and_json(tmp_path):
    run("bounds", "--n-list", "0:4", "--out", tmp_path)
    meta = read_metadata(tmp_path / "bounds.csv")
    assert meta["version"] == __version__ and meta["generator"] == GENERATOR_ID
    assert "--out" not in meta["config"]["argv"]
    got = [float(r["deterministic_bound"]) for r in rows(tmp_path / "bounds.csv")]
    assert got == sorted(got, reverse=True)
    run("bounds", "--n-list", "2", "--format", "json", "--out", tmp_path / "j")
    payload = json.loads((tmp_path / "j" / "bounds.json").read_text())
    assert payload["rows"][0]["n"] == 2 and "config" in payload["metadata"]


# ---------------------------------------------------------------- rank sweep

def test_rank_sweep_bounds(tmp_path):
    assert run("rank-sweep", "--d-list", 2, "--N", 200, "--tol", 0.5, "--norm", "max",
               "--out", tmp_path) == 0
    (row,) = rows(tmp_path / "rank_sweep.csv")
    assert 1 <= int(row["rank"]) <= 200
    assert float(row["std"]) == 0.0


def test_rank_sweep_repeats_and_grid(tmp_path):
    assert run("rank-sweep", "--d-list", 3, "--N", 120, "--tol", 0.01, "--repeats", 3,
               "--grid-search-p", "--out", tmp_path) == 0
    (row,) = rows(tmp_path / "rank_sweep.csv")
    per_seed = [int(v) for v in row["rank"].split(";")]
    assert len(per_seed) == 3 and float(row["mean"]) == pytest.approx(np.mean(per_seed))
    assert "3" in read_metadata(tmp_path / "rank_sweep.csv")["grid_search_p"]


@pytest.mark.slow
def test_rank_sweep_scenario_ordering(tmp_path):
    ranks = {}
    for sc in ("complete", "partial", "none"):
        out = tmp_path / sc
        run("rank-sweep", "--d-list", 6, "--N", 500, "--tol", 0.01, "--norm", "max", "--p", 0.1,
            "--scenario", sc, "--repeats", 5, "--out", out)
        (row,) = rows(out / "rank_sweep.csv")
        ranks[sc] = [int(v) for v in row["rank"].split(";")]
    ok = sum(c >= p >= n for c, p, n in zip(ranks["complete"], ranks["partial"], ranks["none"]))
    assert ok >= 4


@pytest.mark.derived
@pytest.mark.slow
def test_rank_sweep_slope(tmp_path):
    run("rank-sweep", "--d-list", "4:12", "--N", 500, "--tol", 0.1, "--norm", "max", "--p", 0.1,
        "--out", tmp_path)
    table = rows(tmp_path / "rank_sweep.csv")
    d = np.array([float(r["d"]) for r in table])
    r = np.array([float(r["mean"]) for r in table])
    slope = np.polyfit(np.log(d), np.log(r), 1)[0]
    assert math.isfinite(slope) and slope <= 6


# ---------------------------------------------------------------- spectrum

def test_spectrum_gaussian_d3(tmp_path):
    assert run("spectrum", "--d", 3, "--N", 500, "--scheme", "endpoint", "--p", 0, "--seed", 1,
               "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert [i for i, _ in rep["ratio_spikes"]["4.0"]] == [1, 4, 10, 20]
    assert rep["matched_grouping"] == [1, 3, 6, 10]
    sv = rows(tmp_path / "singular_values.csv")
    assert len(sv) == 500 and sv[0]["index"] == "1"


def test_spectrum_cauchy_plateaus(tmp_path):
    assert run("spectrum", "--profile", "cauchy", "--d", 6, "--N", 500, "--p", 0.1,
               "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert len(rep["ratio_spikes"]["2.0"]) >= 3


def test_spectrum_injected_matrix(tmp_path):
    M = np.diag([8.0, 4.0, 0.5, 0.25, 0.2])
    rio.write_matrix_csv(tmp_path / "m.csv", M)
    assert run("spectrum", "--matrix", tmp_path / "m.csv", "--d", 1, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert rep["ratio_spikes"]["4.0"] == [[2, 8.0]]
    assert rep["ratio_spikes"]["2.0"] == [[2, 8.0]]
    ratios = [r["ratio_next"] for r in rows(tmp_path / "singular_values.csv")]
    assert [float(v) for v in ratios[:4]] == [2.0, 8.0, 2.0, 1.25] and ratios[4] == ""


# ---------------------------------------------------------------- reconstruct

def test_reconstruct_exact_rank(tmp_path):
    rng = np.random.default_rng(0)
    M = rng.standard_normal((30, 4)) @ rng.standard_normal((4, 30))
    rio.write_matrix_binary(tmp_path / "m.bin", M)
    assert run("reconstruct", "--matrix", tmp_path / "m.bin", "--ranks", "0:8", "--out", tmp_path) == 0
    errs = {int(r["rank"]): float(r["rel_fro_error"]) for r in rows(tmp_path / "curve.csv")}
    assert errs[0] == 1.0
    assert all(errs[r] <= 1e-12 for r in range(4, 9))


@pytest.mark.derived
def test_reconstruct_nystrom_vs_svd(tmp_path):
    assert run("reconstruct", "--d", 6, "--N", 600, "--scheme", "uniform", "--ranks", "7,28",
               "--methods", "svd,nystrom", "--oversample", 30, "--out", tmp_path) == 0
    table = rows(tmp_path / "curve.csv")
    by = {(int(r["rank"]), r["method"]): float(r["rel_fro_error"]) for r in table}
    for r in (7, 28):
        assert by[(r, "svd")] <= by[(r, "nystrom")] <= 3 * by[(r, "svd")]


# ---------------------------------------------------------------- reproducibility

def test_replay_from_metadata(tmp_path):
    first = tmp_path / "first"
    assert run("reconstruct", "--d", 3, "--N", 150, "--scheme", "endpoint", "--p", 0.2, "--seed", 4,
               "--ranks", "0:12", "--methods", "svd,rsvd,nystrom", "--repeats", 2, "--out", first) == 0
    second = tmp_path / "second"
    assert run("reconstruct", "--from-metadata", first / "curve.csv", "--out", second) == 0
    assert (first / "curve.csv").read_bytes() == (second / "curve.csv").read_bytes()


def test_replay_rank_sweep_json(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("rank-sweep", "--d-list", "2,3", "--N", 100, "--format", "json", "--out", a)
    run("rank-sweep", "--from-metadata", a / "rank_sweep.json", "--out", b)
    assert (a / "rank_sweep.json").read_bytes() == (b / "rank_sweep.json").read_bytes()


def test_threads_do_not_change_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["spectrum", "--d", 4, "--N", 300, "--p", 0.2, "--seed", 2]
    run(*args, "--threads", 1, "--out", a)
    run(*args, "--threads", 2, "--out", b)
    ra = json.loads((a / "spectrum.json").read_text())
    rb = json.loads((b / "spectrum.json").read_text())
    assert ra["ranks"] == rb["ranks"]
    for k in ra["ratio_spikes"]:
        assert [i for i, _ in ra["ratio_spikes"][k]] == [i for i, _ in rb["ratio_spikes"][k]]
    # threaded BLAS may reorder reductions, so floats agree to round-off only
    sa, sb = np.array(ra["singular_values"]), np.array(rb["singular_values"])
    assert np.allclose(sa, sb, rtol=1e-12, atol=1e-14 * sa[0])


def test_sample_command_outputs(tmp_path):
    assert run("sample", "--scheme", "halton", "--N", 5, "--d", 2, "--out", tmp_path) == 0
    pts = rio.read_matrix(tmp_path / "points.csv")
    assert np.allclose(pts[0], [0.5, 1 / 3])
    side = json.loads((tmp_path / "points.csv.json").read_text())
    assert side["generator"] == GENERATOR_ID and side["version"] == __version__
    assert run("sample", "--scenario", "none", "--N", 10, "--d", 3, "--format", "bin",
               "--out", tmp_path / "s") == 0
    assert (tmp_path / "s" / "points_y.bin").exists()


def test_console_script_exit_code(tmp_path):
    exe = shutil.which("rbfrank")
    cmd = [exe] if exe else [sys.executable, "-m", "rbfrank.cli"]
    res = subprocess.run(cmd + ["factorize", "--construction", "ft", "--mf", "2", "--mt", "9", "--d", "2",
                                "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 2
    assert res.stderr.startswith("rbfrank: error:")

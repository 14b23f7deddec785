"""Experiment kinds, artifacts and reproducibility of runs."""
from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from sosputil import *
from sosputil.benchmarks import quadratic
from sosputil.harness import build_problem, resolve_schedule
from sosputil.relu import ReluInstance, make_relu_pair

SMALL_ZPSGD = {"problem": "double-well", "d": 2, "eps": 0.1, "nu": 0.001, "iters": 30, "batch_m": 20}


def artifacts(out):
    return {suffix: (out.parent / (out.name + suffix)) for suffix in (".csv", ".summary.json", ".meta.json")}


def read_csv(path):
    with path.open() as handle:
        return list(csv.DictReader(handle))


def test_run_writes_three_artifacts(tmp_path):
    out = tmp_path / "zp.run"
    assert run(ExperimentSpec("zpsgd-run", SMALL_ZPSGD, seed=7, output_path=str(out))) == 0
    paths = artifacts(out)
    assert all(p.exists() for p in paths.values())
    rows = read_csv(paths[".csv"])
    assert len(rows) == 31
    assert list(rows[0]) == ["step", "x1", "x2", "grad_norm", "f_probe"]
    summary = json.loads(paths[".summary.json"].read_text())
    assert summary["spec"]["kind"] == "zpsgd-run"
    assert summary["resolved"]["batch_m"] == 20
    assert summary["resolved"]["delta"] == 0.1
    assert summary["results"]["queries_used"] == 30 * 21
    assert summary["derived"]["batch"] == 20
    assert "wall_time" not in summary
    meta = json.loads(paths[".meta.json"].read_text())
    assert meta["seed"] == 7
    assert meta["stream_ids"] == [1]
    assert meta["package"] == "sosputil"


def test_same_seed_gives_identical_bytes(tmp_path):
    out = tmp_path / "det"
    spec = ExperimentSpec("zpsgd-run", {**SMALL_ZPSGD, "trials": 3}, seed=3, output_path=str(out))
    assert run(spec) == 0
    first = {k: p.read_bytes() for k, p in artifacts(out).items()}
    assert run(spec) == 0
    second = {k: p.read_bytes() for k, p in artifacts(out).items()}
    assert first == second


def test_worker_count_does_not_change_results(tmp_path):
    params = {**SMALL_ZPSGD, "trials": 3}
    run(ExperimentSpec("zpsgd-run", params, seed=4, output_path=str(tmp_path / "serial")))
    run(ExperimentSpec("zpsgd-run", params, seed=4, output_path=str(tmp_path / "threads"), workers=3))
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "threads.csv").read_bytes()


def test_different_seeds_differ(tmp_path):
    run(ExperimentSpec("zpsgd-run", SMALL_ZPSGD, seed=1, output_path=str(tmp_path / "a")))
    run(ExperimentSpec("zpsgd-run", SMALL_ZPSGD, seed=2, output_path=str(tmp_path / "b")))
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_rerun_from_summary(tmp_path):
    out = tmp_path / "again"
    run(ExperimentSpec("zpsgd-run", SMALL_ZPSGD, seed=5, output_path=str(out)))
    before = (tmp_path / "again.csv").read_bytes()
    summary = json.loads((tmp_path / "again.summary.json").read_text())
    spec = ExperimentSpec.from_summary(summary)
    assert spec.params["iters"] == 30
    assert run(spec) == 0
    assert (tmp_path / "again.csv").read_bytes() == before


def test_wall_time_only_on_request(tmp_path):
    out = tmp_path / "timed"
    run(ExperimentSpec("gd-run", {"iters": 5}, output_path=str(out), record_wall_time=True))
    summary = json.loads((tmp_path / "timed.summary.json").read_text())
    assert summary["wall_time"] >= 0.0


def test_errors_become_documents(tmp_path, capsys):
    out = tmp_path / "bad"
    assert run(ExperimentSpec("zpsgd-run", {"eps": -1}, output_path=str(out))) == 2
    doc = json.loads((tmp_path / "bad.error.json").read_text())
    assert doc["error"] == "ConversionFromError"
    assert doc["kind"] == "zpsgd-run"
    assert json.loads(capsys.readouterr().out) == doc
    assert not (tmp_path / "bad.csv").exists()

    assert run(ExperimentSpec("no-such-kind", {}, output_path=str(out))) == 2
    assert json.loads((tmp_path / "bad.error.json").read_text())["error"] == "ExperimentNotFound"


def test_run_time_errors_are_documented(tmp_path):
    out = tmp_path / "dim"
    assert run(ExperimentSpec("zpsgd-run", {"problem": "quartic-ripple", "d": 2}, output_path=str(out))) == 2
    assert json.loads((tmp_path / "dim.error.json").read_text())["error"] == "ConfigError"


def test_spec_validation():
    with pytest.raises(ConfigError):
        ExperimentSpec("zpsgd-run", seed=-1)
    with pytest.raises(ConfigError):
        ExperimentSpec("zpsgd-run", workers=0)


def test_build_problem_checks():
    assert build_problem("quadratic", 3, nu=0.01, tau=0.02).dim == 3
    with pytest.raises(ConfigError):
        build_problem("saddle", 2, nu=0.1)
    with pytest.raises(ConfigError):
        build_problem("double-well", 3)


def test_schedule_overrides():
    bench = quadratic(d=2)
    cfg = resolve_schedule(bench, 0.1, 0, sigma=0.05, perturb_r=0.0, batch_m=7, iters=9)
    assert (cfg.sigma, cfg.perturb_radius, cfg.batch, cfg.max_iters) == (0.05, 0.0, 7, 9)
    assert resolve_schedule(bench, 0.1, 0).perturb_radius > 0


def test_psgd_run_escapes_saddle(tmp_path):
    out = tmp_path / "psgd"
    params = {"iters": 300, "stop_on_escape": True}
    assert run(ExperimentSpec("psgd-run", params, seed=6, output_path=str(out))) == 0
    results = json.loads((tmp_path / "psgd.summary.json").read_text())["results"]
    assert results["escaped"] is True
    assert results["steps"] < 300


def test_psgd_run_uses_every_iteration_by_default(tmp_path):
    out = tmp_path / "full"
    assert run(ExperimentSpec("psgd-run", {"iters": 50}, seed=6, output_path=str(out))) == 0
    summary = json.loads((tmp_path / "full.summary.json").read_text())
    assert summary["resolved"]["stop_on_escape"] is False
    assert summary["results"]["steps"] == 50


def test_psgd_escapes_saddle_from_most_seeds(tmp_path):
    horizon = math.ceil(default_config(2, 0.1, 1.0, 0.1, 1.0, 0.1).escape_horizon)
    out = tmp_path / "seeds"
    params = {"trials": 20, "stop_on_escape": True, "iters": horizon}
    assert run(ExperimentSpec("psgd-run", params, seed=11, output_path=str(out))) == 0
    results = json.loads((tmp_path / "seeds.summary.json").read_text())["results"]
    assert results["escaped_count"] >= 19
    assert all(r["steps"] <= horizon for r in results["runs"])


def test_fpsgd_run_on_corrupted_quadratic(tmp_path):
    out = tmp_path / "fp"
    params = {"iters": 20, "batch_m": 500, "trials": 3}
    assert run(ExperimentSpec("fpsgd-run", params, seed=2, output_path=str(out))) == 0
    summary = json.loads((tmp_path / "fp.summary.json").read_text())
    assert summary["derived"]["corruption"] == pytest.approx(0.1 / (2 * math.sqrt(2)))
    assert summary["resolved"]["corruption"] == 0
    assert summary["results"]["sosp_rate"] == 1.0


def test_corruption_only_for_corrupted_quadratic(tmp_path):
    out = tmp_path / "nocorr"
    params = {"problem": "quadratic", "corruption": 0.1, "iters": 2}
    assert run(ExperimentSpec("fpsgd-run", params, output_path=str(out))) == 2
    assert json.loads((tmp_path / "nocorr.error.json").read_text())["error"] == "ConfigError"


def test_slow_zpsgd_beats_gd_on_rippled_double_well(tmp_path):
    shared = {"problem": "double-well", "nu": 0.1**1.5 / 2, "trials": 20, "random_start": True, "iters": 400}
    run(ExperimentSpec("zpsgd-run", {**shared, "batch_m": 400}, seed=21, output_path=str(tmp_path / "zp")))
    run(ExperimentSpec("gd-run", shared, seed=21, output_path=str(tmp_path / "gd")))
    zp = json.loads((tmp_path / "zp.summary.json").read_text())["results"]
    gd = json.loads((tmp_path / "gd.summary.json").read_text())["results"]
    assert zp["sosp_count"] >= 15
    assert gd["sosp_count"] <= 10
    assert zp["sosp_count"] > gd["sosp_count"]


def test_slow_exp_search_on_double_well(tmp_path):
    out = tmp_path / "dw"
    params = {"problem": "double-well", "d": 2, "eps": 0.5}
    assert run(ExperimentSpec("exp-search", params, output_path=str(out))) == 0
    assert read_csv(tmp_path / "dw.csv")[0]["sosp"] == "True"
    derived = json.loads((tmp_path / "dw.summary.json").read_text())["derived"]
    assert derived["bound_B"] == pytest.approx(1.5)
    assert derived["radius"] == pytest.approx(3.0)


class FailingExperiments(SospExperiments):
    @ExperimentKind(name="boom", description="Always fails.")
    def boom(self):
        raise RuntimeError("unexpected")


def test_unexpected_errors_become_documents(tmp_path, capsys):
    out = tmp_path / "boom"
    assert run(ExperimentSpec("boom", {}, output_path=str(out)), library=FailingExperiments()) == 2
    doc = json.loads((tmp_path / "boom.error.json").read_text())
    assert doc == {"error": "RuntimeError", "message": "unexpected", "kind": "boom"}
    assert json.loads(capsys.readouterr().out) == doc
    assert not (tmp_path / "boom.csv").exists()


def test_multi_trial_summary(tmp_path):
    out = tmp_path / "many"
    run(ExperimentSpec("zpsgd-run", {**SMALL_ZPSGD, "trials": 4, "random_start": True}, output_path=str(out)))
    rows = read_csv(tmp_path / "many.csv")
    assert [r["trial"] for r in rows] == ["0", "1", "2", "3"]
    summary = json.loads((tmp_path / "many.summary.json").read_text())
    assert summary["results"]["trials"] == 4
    assert 0.0 <= summary["results"]["sosp_rate"] <= 1.0
    assert json.loads((tmp_path / "many.meta.json").read_text())["stream_ids"] == [1, 2, 3, 4]


def test_exp_search_kind(tmp_path):
    out = tmp_path / "search"
    assert run(ExperimentSpec("exp-search", {}, output_path=str(out))) == 0
    row = read_csv(tmp_path / "search.csv")[0]
    assert row["sosp"] == "True"
    derived = json.loads((tmp_path / "search.summary.json").read_text())["derived"]
    assert derived["nu"] == pytest.approx((0.3**3 / 24.0) ** 0.5 / 1000.0)


def test_hard_instance_kind(tmp_path):
    out = tmp_path / "hard"
    params = {"audit": True, "symbolic": True, "samples": 20, "band_samples": 50,
              "lower_bound": True, "draws": 2, "query_budget": 300, "write_files": True}
    assert run(ExperimentSpec("hard-instance", params, seed=2, output_path=str(out))) == 0
    summary = json.loads((tmp_path / "hard.summary.json").read_text())["results"]
    assert summary["band_covers_ball"] is True
    assert summary["boundary_smoothness"]["smooth"] is True
    assert len(summary["lower_bound"]["runs"]) == 2
    assert 0.0 <= summary["lower_bound"]["non_informative_fraction"] <= 1.0
    assert "v" not in summary["instance"]
    assert (tmp_path / "hard.instance.json").exists()
    assert (tmp_path / "hard.secret.json").exists()
    rows = read_csv(tmp_path / "hard.csv")
    assert [r["check"] for r in rows[:2]] == ["smoothness", "band_gap"]
    assert all(r["passed"] == "True" for r in rows[:2])
    meta = json.loads((tmp_path / "hard.meta.json").read_text())
    assert meta["stream_ids"] == [0, 1, 2, 3, 4, 5, 6]


def test_smoothing_audit_kind(tmp_path):
    out = tmp_path / "smooth"
    params = {"points": 3, "inner_samples": 20_000, "tail": True, "nu": 0.01, "tau": 0.01}
    assert run(ExperimentSpec("smoothing-audit", params, output_path=str(out))) == 0
    results = json.loads((tmp_path / "smooth.summary.json").read_text())["results"]
    assert results["passed"] is True
    assert "slope" in results["variance_scaling"]


def test_relu_kinds(tmp_path):
    assert run(ExperimentSpec("relu-gap", {"d": 3, "n_list": [100, 400], "trials": 3, "grid_size": 32},
                              output_path=str(tmp_path / "gap"))) == 0
    assert len(read_csv(tmp_path / "gap.csv")) == 2
    params = {"d": 2, "n_list": [200, 2000], "trials": 2, "batch_m": 20, "iters": 50, "eps": 0.5}
    assert run(ExperimentSpec("relu-recovery", params, output_path=str(tmp_path / "rec"))) == 0
    rows = read_csv(tmp_path / "rec.csv")
    assert [r["n"] for r in rows] == ["200", "2000"]


def test_concentration_kind(tmp_path):
    out = tmp_path / "conc"
    assert run(ExperimentSpec("concentration", {"d": 50, "trials": 1000}, output_path=str(out))) == 0
    row = read_csv(tmp_path / "conc.csv")[0]
    assert row["passed"] == "True"


def test_landscape_of_constant_pair(tmp_path):
    out = tmp_path / "flat"
    assert run(ExperimentSpec("landscape", {"problem": "constant", "points": 3}, output_path=str(out))) == 0
    rows = read_csv(tmp_path / "flat.csv")
    assert len(rows) == 9
    assert list(rows[0]) == ["x1", "x2", "F", "f"]
    assert {r["F"] for r in rows} == {"0.0"}
    assert {r["f"] for r in rows} == {"0.0"}


def test_landscape_needs_slices_above_two_dimensions():
    pair = quadratic(d=3).pair
    with pytest.raises(ConfigError):
        emit_landscape_grid(pair, -1.0, 1.0, 5)
    rows = emit_landscape_grid(pair, -1.0, 1.0, 5, slice_axes=[0, 2], base=[0.0, 0.5, 0.0])
    assert len(rows) == 25
    assert set(rows[0]) == {"x1", "x3", "F", "f"}
    assert rows[0]["F"] == pytest.approx(0.5 * (1.0 + 0.25 + 1.0))
    with pytest.raises(ConfigError):
        emit_landscape_grid(pair, -1.0, 1.0, 5, slice_axes=[0, 0])
    with pytest.raises(ConfigError):
        emit_landscape_grid(pair, 1.0, -1.0, 5, slice_axes=[0])


def test_relu_landscape_shows_kinks_only_in_data():
    inst = ReluInstance.generate(2, 50, seed=9)
    rows = emit_landscape_grid(make_relu_pair(inst), -2.0, 2.0, 400, slice_axes=[0], base=[0.0, 0.5])
    F = np.array([r["F"] for r in rows])
    f = np.array([r["f"] for r in rows])
    assert np.all(np.isfinite(F))
    assert np.max(np.abs(np.diff(f, 3))) > 5 * np.max(np.abs(np.diff(F, 3)))

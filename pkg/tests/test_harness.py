import json

import numpy as np
import pytest

from qsurrogate import controller, engine, instances
from qsurrogate.harness import experiment, metrics, report
from qsurrogate.harness.experiment import ExperimentError
from qsurrogate.harness.heuristics import HEURISTIC_ANGLES, heuristic_angles, table_digest
from qsurrogate.instances import SpectrumExtrema

from conftest import write_tiny_spec

# ---------------------------------------------------------------- metrics


def ext(lo, hi):
    return SpectrumExtrema(lo, hi, None, None)


def test_ratio_endpoints():
    e = ext(-2.0, 6.0)
    assert metrics.approximation_ratio(-2.0, e) == 1.0
    assert metrics.approximation_ratio(6.0, e) == 0.0
    assert metrics.approximation_ratio(2.0, e) == 0.5
    np.testing.assert_allclose(metrics.approximation_ratio([6.0, -2.0], e), [0.0, 1.0])


def test_ratio_degenerate():
    with pytest.raises(metrics.DegenerateSpectrum):
        metrics.approximation_ratio(1.0, ext(1.0, 1.0))


def test_step_interpolation():
    out = metrics.step_interpolate([1, 3], [10.0, 5.0], [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(out[1:], [10.0, 10.0, 5.0, 5.0])
    assert np.isnan(out[0])


def test_aggregate_two_curves():
    a = [(1, 1.0), (2, 3.0)]
    b = [(1, 3.0), (2, 5.0)]
    agg = metrics.aggregate([a, b])
    np.testing.assert_array_equal(agg.grid, [1, 2])
    np.testing.assert_allclose(agg.mean, [2.0, 4.0])
    # population std of {1, 3} is 1, so 2 * 1 / sqrt(2)
    np.testing.assert_allclose(agg.half_width, [np.sqrt(2)] * 2)
    assert agg.n_curves == 2


def test_aggregate_union_grid_and_late_start():
    a = [(1, 4.0), (3, 2.0)]
    b = [(2, 6.0)]
    agg = metrics.aggregate([a, b])
    np.testing.assert_array_equal(agg.grid, [2, 3])
    np.testing.assert_allclose(agg.mean, [5.0, 4.0])


def test_aggregate_empty():
    with pytest.raises(ValueError):
        metrics.aggregate([])


def test_aggregate_single_curve_has_zero_width():
    agg = metrics.aggregate([[(1, 2.0), (5, 1.0)]], grid=[1, 2, 5, 9])
    np.testing.assert_allclose(agg.mean, [2.0, 2.0, 1.0, 1.0])
    np.testing.assert_array_equal(agg.half_width, 0.0)


# ---------------------------------------------------------------- tabulated angles


def test_tabulated_angles_verbatim():
    a3 = heuristic_angles(3)
    assert a3.gamma == (-0.14264, -0.26589, -0.34195)
    assert a3.beta == (0.50502, 0.35713, 0.19264)
    assert heuristic_angles(4).beta[-1] == 0.16041
    assert heuristic_angles(5).gamma == (-0.11764, -0.19946, -0.268736, -0.321586, -0.34583)
    assert sorted(HEURISTIC_ANGLES) == [3, 4, 5]
    with pytest.raises(KeyError):
        heuristic_angles(2)


def test_table_digest_is_stable():
    assert table_digest() == table_digest()
    assert len(table_digest()) == 64


@pytest.mark.parametrize("p", [3, 4, 5])
def test_tabulated_angles_fit_the_heavy_hex_box(p):
    from qsurrogate.optim import BoundBox

    assert BoundBox.heavy_hex(p).contains(heuristic_angles(p).to_theta())


# ---------------------------------------------------------------- manifests and specs


def test_manifest_generation(tmp_path):
    m = experiment.generate_manifest(tmp_path / "m.json", "maxcut", 3, seed=9, n=8)
    again = experiment.Manifest.load(tmp_path / "m.json")
    assert again.ids() == m.ids() == [f"maxcut-n8-s9-{k}" for k in range(3)]
    inst = again.instance("maxcut-n8-s9-1")
    ref = instances.generate_3regular_maxcut(8, experiment.instance_seeds(9, 3)[1])
    np.testing.assert_array_equal(inst.weights, ref.weights)
    with pytest.raises(ExperimentError):
        again.instance("nope")


def test_manifest_heavy_hex_and_append(tmp_path):
    path = tmp_path / "m.json"
    experiment.generate_manifest(path, "heavy_hex", 1, seed=0, rows=1, cols=2, keep=14)
    m = experiment.generate_manifest(path, "heavy_hex", 1, seed=1, rows=1, cols=1, append=True)
    assert m.ids() == ["hhex-1x2-n14-s0-0", "hhex-1x1-n12-s1-0"]
    assert m.instance("hhex-1x2-n14-s0-0").n == 14
    with pytest.raises(ExperimentError):
        experiment.generate_manifest(path, "ising", 1, seed=0)


@pytest.mark.parametrize("fmt", ["json", "toml"])
def test_load_spec(tmp_path, fmt):
    spec = experiment.load_spec(write_tiny_spec(tmp_path, fmt))
    assert spec.output_dir == tmp_path / "out"
    assert spec.master_seed == 1
    (cell,) = spec.cells
    assert cell.instances == ["maxcut-n8-s3-0", "maxcut-n8-s3-1"]
    assert cell.de == {"gtol": 15, "max_gens": 100}


def test_load_spec_overrides_and_errors(tmp_path):
    path = write_tiny_spec(tmp_path)
    spec = experiment.load_spec(path, {"master_seed": 7, "n_repeats": 5, "workers": None})
    assert spec.master_seed == 7 and spec.cells[0].n_repeats == 5
    bad = json.loads(path.read_text())
    bad["cells"][0]["instances"] = ["missing"]
    path.write_text(json.dumps(bad))
    with pytest.raises(ExperimentError):
        experiment.load_spec(path)
    bad["cells"][0]["bogus"] = 1
    path.write_text(json.dumps(bad))
    with pytest.raises(ExperimentError):
        experiment.load_spec(path)
    with pytest.raises(ExperimentError):
        experiment.load_spec(tmp_path / "absent.json")


def test_run_seed_distinguishes_everything():
    seeds = {
        experiment.run_seed(m, label, iid, rep)
        for m in (0, 1)
        for label in ("a", "b")
        for iid in ("x", "y")
        for rep in (0, 1)
    }
    assert len(seeds) == 16


# ---------------------------------------------------------------- batch runs


def test_run_skip_and_conflict(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    assert experiment.run_experiment(spec) == []
    summaries = experiment.load_summaries(spec, "tiny")
    assert len(summaries) == 4
    assert all(s["n_evaluations"] == 10 and s["total_shots"] == 500 for s in summaries)
    tasks = experiment.tasks_for(spec)
    assert experiment.execute(tasks[0]) == "skipped"
    changed = experiment.RunTask(**{**tasks[0].__dict__, "config": {**tasks[0].config, "n_it": 5}})
    with pytest.raises(controller.ArchiveConflict):
        experiment.execute(changed)


def test_interrupted_run_resumes_identically(tiny_spec, tmp_path):
    spec = experiment.load_spec(tiny_spec)
    task = experiment.tasks_for(spec)[0]
    experiment.execute(task)
    archive_path, summary_path = experiment.run_paths(spec.output_dir, task.label, task.instance_id, 0)
    reference = summary_path.read_bytes()
    lines = archive_path.read_text().splitlines()
    archive_path.write_text("\n".join(lines[:7]) + "\n")
    summary_path.unlink()
    assert experiment.execute(task) == "resumed"
    assert summary_path.read_bytes() == reference


def test_missing_summaries_reported(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    with pytest.raises(ExperimentError):
        experiment.load_summaries(spec, "tiny")
    with pytest.raises(ExperimentError):
        spec.cell("other")


def test_reevaluation_uses_archived_best(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    experiment.run_experiment(spec)
    assert experiment.reevaluate_experiment(spec) == 4
    manifest = spec.load_manifest()
    for summary in experiment.load_summaries(spec, "tiny"):
        archive_path, summary_path = experiment.run_paths(spec.output_dir, "tiny", summary["instance_id"], summary["repeat"])
        curve = json.loads(experiment.reeval_path(summary_path).read_text())["curve"]
        inst = manifest.instance(summary["instance_id"])
        archive = controller.Archive.load(archive_path)
        last = archive.records[summary["best_indices"][-1]]
        assert curve[-1][1] == pytest.approx(engine.exact_cost(inst, last.theta), abs=1e-12)
        assert [c[0] for c in curve] == [s for s, _ in summary["learning_curve"]]


def test_report_csv_and_plot(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    experiment.run_experiment(spec)
    experiment.reevaluate_experiment(spec)
    written = report.report(spec, ["r", "exact_r"])
    names = sorted(p.name for p in written)
    assert names == ["exact_r.png", "r.png", "tiny.exact_r.csv", "tiny.r.csv"]
    rows = report.read_csv(spec.output_dir / "report" / "tiny.r.csv")
    curve = report.aggregate_cell(spec, "tiny", "r")
    assert rows == list(curve.rows())
    assert [r[0] for r in rows] == [50.0 * k for k in range(1, 11)]
    assert all(0 <= r[1] <= 1 for r in rows)
    assert report.value_at(curve, 260) == (rows[4][1], rows[4][2])
    with pytest.raises(ValueError):
        report.value_at(curve, 10)


def test_report_rejects_unknown_metric(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    with pytest.raises(ExperimentError):
        report.run_curves(spec, "tiny", "regret")


def test_exact_mode_uses_evaluation_count(tmp_path):
    spec = experiment.load_spec(write_tiny_spec(tmp_path, shots=0, n_repeats=1))
    experiment.run_experiment(spec)
    curve = report.aggregate_cell(spec, "tiny", "cost")
    np.testing.assert_array_equal(curve.grid, np.arange(1, 11))


def test_cost_ratio_consistency(tiny_spec):
    spec = experiment.load_spec(tiny_spec)
    experiment.run_experiment(spec)
    costs = report.run_curves(spec, "tiny", "cost")
    ratios = report.run_curves(spec, "tiny", "r")
    manifest = spec.load_manifest()
    for summary, c, r in zip(experiment.load_summaries(spec, "tiny"), costs, ratios):
        e = instances.brute_force_extrema(manifest.instance(summary["instance_id"]))
        np.testing.assert_allclose([v for _, v in r], [(e.c_max - v) / (e.c_max - e.c_min) for _, v in c])


# ---------------------------------------------------------------- transfer


def test_transfer_rows():
    g = instances.generate_heavy_hex(1, 1)
    targets = [(f"t{k}", instances.generate_heavy_hex_instance(g, k)) for k in range(3)]
    angles = heuristic_angles(3)
    rows = experiment.transfer_eval(angles, targets, shots=500, seed=0)
    assert [r.instance_id for r in rows] == ["t0", "t1", "t2"]
    for r, (_, inst) in zip(rows, targets):
        assert r.margin == 0.0  # same angles as the reference
        assert r.exact == pytest.approx(engine.exact_cost(inst, angles))
    again = experiment.transfer_eval(angles, targets, shots=500, seed=0)
    assert rows == again

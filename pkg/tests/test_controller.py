import json

import numpy as np
import pytest

from qsurrogate import controller, instances
from qsurrogate.controller import Archive, ArchiveConflict, EvaluationRecord, RunConfig
from qsurrogate.engine import AngleVector
from qsurrogate.harness.heuristics import heuristic_angles
from qsurrogate.optim import BoundBox, DeConfig

CHEAP_DE = DeConfig(gtol=20, max_gens=150)


def bowl(theta, seed):
    """Deterministic quadratic truth with its minimum inside the box, plus seeded noise."""
    noise = np.random.default_rng(seed).normal(scale=0.01)
    return float(np.sum((np.asarray(theta) - 0.2) ** 2) + noise)


def config(**kw):
    base = dict(
        instance_id="toy",
        p=1,
        bounds=BoundBox.maxcut(1),
        n_init=6,
        n_it=10,
        shots=100,
        master_seed=5,
        de=CHEAP_DE,
        record_wall_time=False,
    )
    base.update(kw)
    return RunConfig(**base)


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        config(n_init=3)  # below d + 2
    with pytest.raises(ValueError):
        config(n_it=-1)
    with pytest.raises(ValueError):
        config(bounds=BoundBox.maxcut(2))
    with pytest.raises(ValueError):
        config(inner="bfgs")
    with pytest.raises(ValueError):
        config(heuristic_angles=(AngleVector((3.0,), (0.0,)),))


def test_config_round_trip():
    cfg = config(p=3, bounds=BoundBox.heavy_hex(3), n_init=20, heuristic_angles=(heuristic_angles(3),), inner="multistart")
    back = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()
    assert "record_wall_time" not in cfg.to_dict()


def test_derive_seed_is_stable_and_separates_purposes():
    assert controller.derive_seed(1, 2, 3) == controller.derive_seed(1, 2, 3)
    seeds = {controller.derive_seed(1, k, purpose) for k in range(50) for purpose in range(4)}
    assert len(seeds) == 200
    assert all(0 <= s < 2**63 for s in seeds)


# ---------------------------------------------------------------- initial sample


def test_initial_sample_counts_and_order():
    heur = heuristic_angles(3)
    cfg = config(p=3, bounds=BoundBox.heavy_hex(3), n_init=20, heuristic_angles=(heur,))
    archive = controller.initial_sample(cfg, bowl)
    assert len(archive) == 20
    assert archive.records[0].source == "heuristic_init"
    assert archive.records[0].theta == tuple(heur.to_theta())
    assert [r.source for r in archive.records[1:]] == ["random_init"] * 19
    assert all(r.iteration == -1 for r in archive)
    assert all(cfg.bounds.contains(r.theta) for r in archive)


def test_initial_sample_distribution_is_uniform():
    cfg = config(p=1, n_init=4000, n_it=0)
    pts = np.array([x for x, _ in controller.initial_points(cfg)])
    lo, hi = cfg.bounds.lo, cfg.bounds.hi
    u = (pts - lo) / (hi - lo)
    # mean and variance of U(0, 1)
    np.testing.assert_allclose(u.mean(axis=0), 0.5, atol=0.02)
    np.testing.assert_allclose(u.var(axis=0), 1 / 12, atol=0.01)


# ---------------------------------------------------------------- the loop


def test_affine_truth_sends_candidates_to_a_corner():
    cfg = config(n_it=3)
    truth = lambda theta, seed: float(theta[0] - 2 * theta[1])
    res = controller.run(cfg, truth)
    corner = np.array([-np.pi / 2, np.pi / 4])
    for rec in res.archive.records[cfg.n_init :]:
        np.testing.assert_allclose(rec.theta, corner, atol=1e-3)
    # the surrogate may re-propose the same corner; deduplication keeps the fit solvable
    assert res.fallbacks == 0


def test_run_finds_bowl_minimum():
    res = controller.run(config(n_it=15), bowl)
    np.testing.assert_allclose(res.theta_opt.to_theta(), [0.2, 0.2], atol=0.1)


def test_budget_accounting():
    cfg = config(n_it=12)
    res = controller.run(cfg, bowl)
    assert len(res.archive) == cfg.n_init + cfg.n_it
    shots = np.cumsum([r.shots for r in res.archive])
    for rec, total in zip(res.archive.records[cfg.n_init :], shots[cfg.n_init :]):
        assert total == cfg.shots * (cfg.n_init + rec.iteration)
    assert [s for s, _ in res.learning_curve] == list(shots)
    assert res.summary(cfg)["total_shots"] == shots[-1]


def test_zero_iterations_is_random_search():
    cfg = config(n_it=0, n_init=30)
    res = controller.run(cfg, bowl)
    assert len(res.archive) == 30
    assert {r.source for r in res.archive} == {"random_init"}
    assert res.c_opt == min(res.archive.values())


def test_learning_curve_is_monotone():
    res = controller.run(config(n_it=10), bowl)
    values = [v for _, v in res.learning_curve]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] == res.c_opt
    assert res.archive.records[res.best_indices[-1]].value == res.c_opt


def test_multistart_inner_solver():
    res = controller.run(config(n_it=5, inner="multistart", n_starts=3), bowl)
    assert {r.source for r in res.archive.records[6:]} == {"candidate"}


def test_fit_failure_falls_back_to_random(monkeypatch):
    def broken(*args, **kwargs):
        raise controller.surrogate.SingularSystem("forced")

    monkeypatch.setattr(controller.surrogate, "fit", broken)
    cfg = config(n_it=3)
    res = controller.run(cfg, bowl)
    assert res.fallbacks == 3
    assert all(r.source == "fallback_random" for r in res.archive.records[cfg.n_init :])
    assert all(cfg.bounds.contains(r.theta) for r in res.archive)


def test_non_finite_truth_is_refused():
    with pytest.raises(FloatingPointError):
        controller.run(config(), lambda theta, seed: float("nan"))


def test_exact_truth_on_a_qaoa_instance():
    inst = instances.generate_3regular_maxcut(8, 0)
    cfg = config(shots=0, n_it=5, rescale_by=8)
    res = controller.run(cfg, controller.qaoa_truth(inst, 0))
    ext = instances.brute_force_extrema(inst)
    assert ext.c_min <= res.c_opt < 0


# ---------------------------------------------------------------- archive persistence


def test_archive_round_trip(tmp_path):
    path = tmp_path / "run.jsonl"
    cfg = config(n_it=8, record_wall_time=True)
    res = controller.run(cfg, bowl, archive_path=path)
    back = Archive.load(path)
    assert back.records == res.archive.records
    assert len(path.read_text().splitlines()) == 14
    shots = 0
    for rec in back:
        shots += rec.shots
        if rec.iteration > 0:
            assert shots == cfg.shots * (cfg.n_init + rec.iteration)
    assert any(r.wall_time > 0 for r in back)


def test_record_json_round_trip():
    rec = EvaluationRecord((0.1, -0.2), 1.5, 200, 3, "candidate", 42, 0.01)
    assert EvaluationRecord.from_json(rec.to_json()) == rec


def test_archive_refuses_non_finite(tmp_path):
    a = Archive(tmp_path / "a.jsonl")
    with pytest.raises(ValueError):
        a.append(EvaluationRecord((0.0, 0.0), float("inf"), 1, -1, "random_init", 0))
    assert not (tmp_path / "a.jsonl").exists()


def test_existing_archive_without_resume_conflicts(tmp_path):
    path = tmp_path / "run.jsonl"
    controller.run(config(n_it=2), bowl, archive_path=path)
    with pytest.raises(ArchiveConflict):
        controller.run(config(n_it=2), bowl, archive_path=path)


def test_resume_matches_uninterrupted_run(tmp_path):
    cfg = config(n_it=10)
    full = controller.run(cfg, bowl)
    path = tmp_path / "partial.jsonl"
    controller.run(config(n_it=4), bowl, archive_path=path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop a record, as if killed mid-run
    resumed = controller.run(cfg, bowl, archive_path=path, resume=True)
    assert resumed.archive.records == full.archive.records


def test_resume_with_other_seed_conflicts(tmp_path):
    path = tmp_path / "run.jsonl"
    controller.run(config(n_it=2), bowl, archive_path=path)
    with pytest.raises(ArchiveConflict):
        controller.run(config(n_it=4, master_seed=6), bowl, archive_path=path, resume=True)
    with pytest.raises(ArchiveConflict):
        controller.run(config(n_it=4, shots=50), bowl, archive_path=path, resume=True)
    with pytest.raises(ArchiveConflict):
        controller.run(config(n_it=1), bowl, archive_path=path, resume=True)


def test_prefix_property():
    short = controller.run(config(n_it=4), bowl)
    long = controller.run(config(n_it=9), bowl)
    assert long.archive.records[:10] == short.archive.records


def test_summary_is_deterministic():
    cfg = config(n_it=6)
    a = json.dumps(controller.run(cfg, bowl).summary(cfg), sort_keys=True)
    b = json.dumps(controller.run(cfg, bowl).summary(cfg), sort_keys=True)
    assert a == b
    c = controller.with_seed(cfg, 99)
    assert json.dumps(controller.run(c, bowl).summary(c), sort_keys=True) != a


# ---------------------------------------------------------------- usefulness


def test_surrogate_beats_random_search_on_small_qaoa():
    inst = instances.generate_3regular_maxcut(8, 3)
    truth = controller.qaoa_truth(inst, 100)
    exact = controller.qaoa_truth(inst, 0)
    wins = 0
    for seed in range(20):
        common = dict(instance_id="q", p=1, bounds=BoundBox.maxcut(1), shots=100, master_seed=seed,
                      de=CHEAP_DE, rescale_by=8, record_wall_time=False)
        surr = controller.run(RunConfig(n_init=8, n_it=12, **common), truth)
        rand = controller.run(RunConfig(n_init=20, n_it=0, **common), truth)
        wins += exact(surr.theta_opt.to_theta(), 0) < exact(rand.theta_opt.to_theta(), 0)
    assert wins >= 12

"""Adaptive sampling loop: sample truth, fit the surrogate, minimize it, evaluate truth there.

Every random draw in a run is derived from ``(master_seed, evaluation index,
purpose)``, so evaluation k of a run does not depend on how many iterations
follow it, and an interrupted run resumes to the same result.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import optim, surrogate
from .engine import AngleVector, simulator_for
from .instances import Instance
from .optim import BoundBox, DeConfig

log = logging.getLogger(__name__)

SOURCES = ("random_init", "heuristic_init", "candidate", "fallback_random")

# purpose tags for derive_seed
_INIT, _TRUTH, _INNER, _FALLBACK = 0, 1, 2, 3

Truth = Callable[[np.ndarray, int], float]


class ArchiveConflict(RuntimeError):
    pass


def derive_seed(master_seed: int, *keys: int) -> int:
    state = np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(2)
    return int(state[0]) << 31 | int(state[1]) >> 1


def qaoa_truth(instance: Instance, shots: int) -> Truth:
    """Finite-shot QAOA cost estimate; ``shots == 0`` means the exact expectation."""
    sim = simulator_for(instance)

    def truth(theta, seed):
        angles = AngleVector.from_theta(theta)
        if shots == 0:
            return sim.exact_cost(angles)
        return sim.sampled_cost(angles, shots, seed).value

    return truth


@dataclass(frozen=True)
class EvaluationRecord:
    theta: tuple[float, ...]
    value: float
    shots: int
    iteration: int  # -1 for the initial sample, else 1..n_it
    source: str
    seed: int
    wall_time: float = 0.0

    @property
    def angles(self) -> AngleVector:
        return AngleVector.from_theta(self.theta)

    def to_json(self) -> str:
        return json.dumps(asdict(self) | {"theta": list(self.theta)})

    @classmethod
    def from_json(cls, line: str) -> "EvaluationRecord":
        data = json.loads(line)
        data["theta"] = tuple(float(v) for v in data["theta"])
        return cls(**data)


class Archive:
    """Append-only list of evaluations mirrored to a JSON-lines file."""

    def __init__(self, path: Optional[os.PathLike] = None, records=()):
        self.path = Path(path) if path is not None else None
        self._records: list[EvaluationRecord] = list(records)

    @classmethod
    def load(cls, path) -> "Archive":
        path = Path(path)
        records = []
        if path.exists():
            with path.open() as fh:
                records = [EvaluationRecord.from_json(line) for line in fh if line.strip()]
        return cls(path, records)

    def append(self, record: EvaluationRecord) -> None:
        if not np.isfinite(record.value):
            raise ValueError(f"refusing to archive non-finite value {record.value}")
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(record.to_json() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        self._records.append(record)

    @property
    def records(self) -> tuple[EvaluationRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self._records], dtype=float)

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self._records], dtype=float)


@dataclass(frozen=True)
class RunConfig:
    instance_id: str
    p: int
    bounds: BoundBox
    n_init: int
    n_it: int
    shots: int
    master_seed: int
    heuristic_angles: tuple[AngleVector, ...] = ()
    inner: str = "de"  # "de" or "multistart"
    de: DeConfig = field(default_factory=DeConfig)
    n_starts: int = 10
    rescale_by: int = 1  # surrogate divided by this (number of vertices) before minimizing
    surrogate_tail: bool = True
    record_wall_time: bool = True

    def __post_init__(self):
        d = 2 * self.p
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.bounds.d != d:
            raise ValueError(f"bounds have dimension {self.bounds.d}, expected {d}")
        if self.n_init < d + 2:
            raise ValueError(f"n_init must be >= {d + 2}")
        if self.n_it < 0:
            raise ValueError("n_it must be >= 0")
        if self.shots < 0:
            raise ValueError("shots must be >= 1, or 0 for exact evaluation")
        if len(self.heuristic_angles) > self.n_init:
            raise ValueError("more heuristic angles than initial evaluations")
        if self.inner not in ("de", "multistart"):
            raise ValueError(f"unknown inner solver {self.inner!r}")
        for a in self.heuristic_angles:
            if a.p != self.p or not self.bounds.contains(a.to_theta()):
                raise ValueError(f"heuristic angles {a} do not fit p={self.p} and the bounds")

    @property
    def dimension(self) -> int:
        return 2 * self.p

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "p": self.p,
            "bounds": self.bounds.to_dict(),
            "n_init": self.n_init,
            "n_it": self.n_it,
            "shots": self.shots,
            "master_seed": self.master_seed,
            "heuristic_angles": [list(a.to_theta()) for a in self.heuristic_angles],
            "inner": self.inner,
            "de": asdict(self.de),
            "n_starts": self.n_starts,
            "rescale_by": self.rescale_by,
            "surrogate_tail": self.surrogate_tail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        data["bounds"] = BoundBox.from_dict(data["bounds"])
        data["heuristic_angles"] = tuple(AngleVector.from_theta(t) for t in data.get("heuristic_angles", ()))
        data["de"] = DeConfig(**data.get("de", {}))
        return cls(**data)


@dataclass
class RunResult:
    archive: Archive
    theta_opt: AngleVector
    c_opt: float
    learning_curve: list[tuple[int, float]]  # (cumulative shots, best value so far)
    best_indices: list[int]  # archive index of the best value after each evaluation
    fallbacks: int = 0

    def summary(self, cfg: RunConfig) -> dict:
        return {
            "config": cfg.to_dict(),
            "theta_opt": list(self.theta_opt.to_theta()),
            "c_opt": self.c_opt,
            "best_index": self.best_indices[-1],
            "n_evaluations": len(self.archive),
            "total_shots": cfg.shots * len(self.archive),
            "fallbacks": self.fallbacks,
            "learning_curve": [[s, v] for s, v in self.learning_curve],
            "best_indices": self.best_indices,
        }


def _timed(truth: Truth, theta: np.ndarray, seed: int, record_time: bool) -> tuple[float, float]:
    start = time.perf_counter()
    value = float(truth(theta, seed))
    elapsed = time.perf_counter() - start if record_time else 0.0
    if not np.isfinite(value):
        raise FloatingPointError(f"truth returned {value} at {theta.tolist()}")
    return value, elapsed


def _record(cfg, truth, theta, index, iteration, source) -> EvaluationRecord:
    seed = derive_seed(cfg.master_seed, index, _TRUTH)
    value, elapsed = _timed(truth, theta, seed, cfg.record_wall_time)
    return EvaluationRecord(tuple(float(v) for v in theta), value, cfg.shots, iteration, source, seed, elapsed)


def initial_points(cfg: RunConfig) -> list[tuple[np.ndarray, str]]:
    heur = [(a.to_theta(), "heuristic_init") for a in cfg.heuristic_angles]
    rng = np.random.default_rng(derive_seed(cfg.master_seed, 0, _INIT))
    random_pts = cfg.bounds.sample(rng, cfg.n_init - len(heur))
    return heur + [(x, "random_init") for x in random_pts]


def initial_sample(cfg: RunConfig, truth: Truth, archive: Optional[Archive] = None) -> Archive:
    """Evaluate heuristic angles first, then uniform random points, up to n_init records.

    Records already present in ``archive`` are kept and skipped over.
    """
    archive = archive if archive is not None else Archive()
    for index, (theta, source) in enumerate(initial_points(cfg)):
        if index < len(archive):
            continue
        archive.append(_record(cfg, truth, theta, index, -1, source))
    return archive


def propose(archive: Archive, cfg: RunConfig, index: int) -> tuple[np.ndarray, str]:
    """Candidate angles for evaluation ``index``: the minimum of the refitted surrogate.

    Falls back to one uniform random point when the interpolation system
    cannot be solved.
    """
    training = surrogate.dedupe(archive.thetas(), archive.values())
    try:
        model = surrogate.fit(training, tail=cfg.surrogate_tail)
    except (surrogate.SingularSystem, surrogate.TooFewPoints) as exc:
        log.warning("surrogate fit failed at evaluation %d (%s); sampling at random", index, exc)
        rng = np.random.default_rng(derive_seed(cfg.master_seed, index, _FALLBACK))
        return cfg.bounds.sample(rng, 1)[0], "fallback_random"
    objective = optim.rescale_objective(model, max(1, cfg.rescale_by))
    inner_seed = derive_seed(cfg.master_seed, index, _INNER)
    if cfg.inner == "de":
        report = optim.differential_evolution(objective, cfg.bounds, cfg.de.with_seed(inner_seed))
    else:
        report = optim.multistart_local(objective, cfg.bounds, cfg.n_starts, seed=inner_seed)
    return cfg.bounds.clip(report.best_theta), "candidate"


def step(archive: Archive, cfg: RunConfig, truth: Truth) -> EvaluationRecord:
    index = len(archive)
    iteration = index - cfg.n_init + 1
    if iteration < 1:
        raise ValueError("step called before the initial sample is complete")
    theta, source = propose(archive, cfg, index)
    record = _record(cfg, truth, theta, index, iteration, source)
    archive.append(record)
    return record


def summarize(archive: Archive, shots: int) -> RunResult:
    values = archive.values()
    if values.size == 0:
        raise ValueError("empty archive")
    best_indices = []
    best = 0
    for k, v in enumerate(values):
        if v < values[best]:
            best = k
        best_indices.append(best)
    curve = [(shots * (k + 1), float(values[b])) for k, b in enumerate(best_indices)]
    fallbacks = sum(r.source == "fallback_random" for r in archive)
    b = best_indices[-1]
    return RunResult(archive, archive.records[b].angles, float(values[b]), curve, best_indices, fallbacks)


def run(cfg: RunConfig, truth: Truth, archive_path=None, resume: bool = False) -> RunResult:
    """initial_sample followed by exactly n_it refinement steps.

    With ``resume`` an existing archive file is continued; without it an
    existing non-empty file is an error.
    """
    if archive_path is not None:
        archive = Archive.load(archive_path)
        if len(archive) and not resume:
            raise ArchiveConflict(f"{archive_path} already holds {len(archive)} records")
        _check_prefix(archive, cfg)
    else:
        archive = Archive()
    initial_sample(cfg, truth, archive)
    while len(archive) < cfg.n_init + cfg.n_it:
        step(archive, cfg, truth)
    return summarize(archive, cfg.shots)


def _check_prefix(archive: Archive, cfg: RunConfig) -> None:
    total = cfg.n_init + cfg.n_it
    if len(archive) > total:
        raise ArchiveConflict(f"archive holds {len(archive)} records, config allows {total}")
    for k, rec in enumerate(archive):
        expected_iteration = -1 if k < cfg.n_init else k - cfg.n_init + 1
        if rec.seed != derive_seed(cfg.master_seed, k, _TRUTH) or rec.iteration != expected_iteration:
            raise ArchiveConflict(f"record {k} of {archive.path} was produced by a different config")
        if rec.shots != cfg.shots:
            raise ArchiveConflict(f"record {k} used {rec.shots} shots, config says {cfg.shots}")


def with_seed(cfg: RunConfig, master_seed: int) -> RunConfig:
    return replace(cfg, master_seed=int(master_seed))

"""Instance manifests, experiment specs, batch runs and post-hoc evaluation."""

from __future__ import annotations

import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .. import controller, engine, instances
from ..controller import ArchiveConflict, RunConfig
from ..optim import BoundBox, DeConfig
from .heuristics import heuristic_angles

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------- manifests


@dataclass
class Manifest:
    path: Path
    entries: dict[str, dict]  # id -> {"path", "seed", "kind", "n"}

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        data = json.loads(path.read_text())
        return cls(path, {e["id"]: e for e in data["instances"]})

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        data = {"instances": list(self.entries.values())}
        self.path.write_text(json.dumps(data, indent=1) + "\n")

    def instance(self, instance_id: str) -> instances.Instance:
        try:
            entry = self.entries[instance_id]
        except KeyError:
            raise ExperimentError(f"unknown instance id {instance_id!r} in {self.path}") from None
        return instances.load_instance(self.path.parent / entry["path"])

    def ids(self) -> list[str]:
        return list(self.entries)


def instance_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def generate_manifest(
    manifest_path,
    kind: str,
    count: int,
    seed: int,
    n: int = 16,
    rows: int = 1,
    cols: int = 1,
    keep: Optional[int] = None,
    append: bool = False,
) -> Manifest:
    """Write ``count`` seeded instances next to ``manifest_path`` and list them there."""
    manifest_path = Path(manifest_path)
    if append and manifest_path.exists():
        manifest = Manifest.load(manifest_path)
    else:
        manifest = Manifest(manifest_path, {})
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    for k, s in enumerate(instance_seeds(seed, count)):
        if kind == "maxcut":
            inst = instances.generate_3regular_maxcut(n, s)
            iid = f"maxcut-n{n}-s{seed}-{k}"
        elif kind == "heavy_hex":
            graph = instances.generate_heavy_hex(rows, cols)
            if keep is not None:
                graph = instances.truncate_graph(graph, keep)
            inst = instances.generate_heavy_hex_instance(graph, s)
            iid = f"hhex-{rows}x{cols}-n{graph.n}-s{seed}-{k}"
        else:
            raise ExperimentError(f"unknown instance kind {kind!r}")
        fname = f"{iid}.json"
        instances.save_instance(inst, manifest_path.parent / fname)
        manifest.entries[iid] = {"id": iid, "path": fname, "seed": s, "kind": inst.kind, "n": inst.n}
    manifest.save()
    return manifest


# ---------------------------------------------------------------- specs


@dataclass
class CellSpec:
    label: str
    instances: list[str]
    p: int
    shots: int
    n_init: int
    n_it: int
    n_repeats: int = 1
    bounds: Any = "maxcut"  # "maxcut", "heavy_hex", or a BoundBox dict
    heuristic: bool = False
    inner: str = "de"
    de: dict = field(default_factory=dict)
    n_starts: int = 10
    surrogate_tail: bool = True
    rescale: bool = True

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ExperimentError(f"cell {self.label!r}: n_repeats must be >= 1")

    def box(self) -> BoundBox:
        if self.bounds == "maxcut":
            return BoundBox.maxcut(self.p)
        if self.bounds == "heavy_hex":
            return BoundBox.heavy_hex(self.p)
        return BoundBox.from_dict(self.bounds)

    def run_config(self, instance_id: str, n: int, master_seed: int) -> RunConfig:
        return RunConfig(
            instance_id=instance_id,
            p=self.p,
            bounds=self.box(),
            n_init=self.n_init,
            n_it=self.n_it,
            shots=self.shots,
            master_seed=master_seed,
            heuristic_angles=(heuristic_angles(self.p),) if self.heuristic else (),
            inner=self.inner,
            de=DeConfig(**self.de),
            n_starts=self.n_starts,
            rescale_by=n if self.rescale else 1,
            surrogate_tail=self.surrogate_tail,
            record_wall_time=True,
        )


@dataclass
class ExperimentSpec:
    manifest: Path
    output_dir: Path
    cells: list[CellSpec]
    master_seed: int = 0
    workers: int = 1
    aggregation: dict = field(default_factory=dict)

    def load_manifest(self) -> Manifest:
        return Manifest.load(self.manifest)

    def cell(self, label: str) -> CellSpec:
        for c in self.cells:
            if c.label == label:
                return c
        raise ExperimentError(f"no cell labelled {label!r}")


def _read_config(path: Path) -> dict:
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def load_spec(path, overrides: Optional[dict] = None) -> ExperimentSpec:
    """Read a JSON or TOML experiment spec; relative paths resolve against its directory."""
    path = Path(path)
    try:
        data = _read_config(path)
    except (ValueError, OSError) as exc:
        raise ExperimentError(f"cannot read experiment spec {path}: {exc}") from exc
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    base = path.parent
    try:
        manifest = Path(data["manifest"])
        cells_raw = data["cells"]
    except KeyError as exc:
        raise ExperimentError(f"experiment spec {path} lacks {exc}") from None
    output_dir = Path(data.get("output_dir", "out"))
    spec = ExperimentSpec(
        manifest=manifest if manifest.is_absolute() else base / manifest,
        output_dir=output_dir if output_dir.is_absolute() else base / output_dir,
        cells=[],
        master_seed=int(data.get("master_seed", 0)),
        workers=int(data.get("workers", 1)),
        aggregation=dict(data.get("aggregation", {})),
    )
    manifest_ids = spec.load_manifest().ids()
    for raw in cells_raw:
        try:
            cell = CellSpec(**raw)
        except TypeError as exc:
            raise ExperimentError(f"malformed cell {raw.get('label')!r}: {exc}") from None
        if cell.instances in ("all", ["all"]):
            cell.instances = list(manifest_ids)
        for iid in cell.instances:
            if iid not in manifest_ids:
                raise ExperimentError(f"cell {cell.label!r}: unknown instance id {iid!r}")
        if "n_repeats" in (overrides or {}) and overrides["n_repeats"] is not None:
            cell.n_repeats = int(overrides["n_repeats"])
        spec.cells.append(cell)
    return spec


# ---------------------------------------------------------------- runs


def run_seed(master_seed: int, label: str, instance_id: str, repeat: int) -> int:
    return controller.derive_seed(
        master_seed, zlib.crc32(label.encode()), zlib.crc32(instance_id.encode()), repeat
    )


def run_paths(output_dir: Path, label: str, instance_id: str, repeat: int) -> tuple[Path, Path]:
    base = Path(output_dir) / "runs" / label / instance_id
    return base / f"rep{repeat:03d}.jsonl", base / f"rep{repeat:03d}.json"


@dataclass(frozen=True)
class RunTask:
    manifest: str
    output_dir: str
    label: str
    instance_id: str
    repeat: int
    config: dict


def write_json(path: Path, data) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    tmp.replace(path)


def execute(task: RunTask) -> str:
    """Run (or resume, or skip) one repeat; returns "done", "skipped" or "resumed"."""
    cfg = RunConfig.from_dict(task.config)
    archive_path, summary_path = run_paths(Path(task.output_dir), task.label, task.instance_id, task.repeat)
    archive_path.parent.mkdir(parents=True, exist_ok=True)
    if summary_path.exists():
        previous = json.loads(summary_path.read_text())
        if previous.get("config") != json.loads(json.dumps(cfg.to_dict())):
            raise ArchiveConflict(f"{summary_path} was written by a different configuration")
        return "skipped"
    status = "resumed" if archive_path.exists() and archive_path.stat().st_size else "done"
    instance = Manifest.load(task.manifest).instance(task.instance_id)
    truth = controller.qaoa_truth(instance, cfg.shots)
    result = controller.run(cfg, truth, archive_path, resume=True)
    summary = result.summary(cfg) | {
        "label": task.label,
        "instance_id": task.instance_id,
        "repeat": task.repeat,
    }
    write_json(summary_path, summary)
    return status


def tasks_for(spec: ExperimentSpec) -> list[RunTask]:
    manifest = spec.load_manifest()
    tasks = []
    for cell in spec.cells:
        for iid in cell.instances:
            n = int(manifest.entries[iid]["n"])
            for rep in range(cell.n_repeats):
                cfg = cell.run_config(iid, n, run_seed(spec.master_seed, cell.label, iid, rep))
                tasks.append(RunTask(str(manifest.path), str(spec.output_dir), cell.label, iid, rep, cfg.to_dict()))
    return tasks


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> list[tuple[RunTask, Exception]]:
    """Execute every (cell, instance, repeat); returns the failed tasks with their errors."""
    workers = workers or spec.workers
    tasks = tasks_for(spec)
    failures = []
    if workers <= 1:
        for task in tasks:
            try:
                status = execute(task)
                log.info("%s/%s/rep%d: %s", task.label, task.instance_id, task.repeat, status)
            except Exception as exc:  # one failed run must not stop the batch
                log.error("%s/%s/rep%d failed: %s", task.label, task.instance_id, task.repeat, exc)
                failures.append((task, exc))
        return failures
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(execute, t): t for t in tasks}
        for fut in as_completed(futures):
            task = futures[fut]
            try:
                log.info("%s/%s/rep%d: %s", task.label, task.instance_id, task.repeat, fut.result())
            except Exception as exc:
                log.error("%s/%s/rep%d failed: %s", task.label, task.instance_id, task.repeat, exc)
                failures.append((task, exc))
    return failures


def load_summaries(spec: ExperimentSpec, label: str) -> list[dict]:
    cell = spec.cell(label)
    out = []
    for iid in cell.instances:
        for rep in range(cell.n_repeats):
            _, summary_path = run_paths(spec.output_dir, label, iid, rep)
            if not summary_path.exists():
                raise ExperimentError(f"missing run summary {summary_path}; run the experiment first")
            out.append(json.loads(summary_path.read_text()))
    return out


# ---------------------------------------------------------------- post-hoc evaluation


def reevaluate_exact(summary: dict, archive: controller.Archive, instance) -> list[tuple[int, float]]:
    """Exact cost of the best-so-far angles at every learning-curve point.

    The best angles are still chosen by the archived finite-shot values, so the
    returned curve need not be monotone.
    """
    sim = engine.simulator_for(instance)
    records = archive.records
    cache: dict[int, float] = {}
    curve = []
    for (shots, _), b in zip(summary["learning_curve"], summary["best_indices"]):
        if b not in cache:
            cache[b] = sim.exact_cost(records[b].angles)
        curve.append((shots, cache[b]))
    return curve


def reeval_path(summary_path: Path) -> Path:
    return summary_path.with_name(summary_path.stem + ".reeval.json")


def reevaluate_experiment(spec: ExperimentSpec, labels: Optional[list[str]] = None) -> int:
    manifest = spec.load_manifest()
    count = 0
    for cell in spec.cells:
        if labels and cell.label not in labels:
            continue
        for iid in cell.instances:
            inst = manifest.instance(iid)
            for rep in range(cell.n_repeats):
                archive_path, summary_path = run_paths(spec.output_dir, cell.label, iid, rep)
                if not summary_path.exists():
                    raise ExperimentError(f"missing run summary {summary_path}")
                summary = json.loads(summary_path.read_text())
                curve = reevaluate_exact(summary, controller.Archive.load(archive_path), inst)
                write_json(reeval_path(summary_path), {"curve": [list(c) for c in curve]})
                count += 1
    return count


@dataclass(frozen=True)
class TransferRow:
    instance_id: str
    n: int
    label: str
    sampled: float
    exact: float
    heuristic_sampled: float
    heuristic_exact: float

    @property
    def margin(self) -> float:
        """exact(angles) - exact(heuristic); negative means the angles are better."""
        return self.exact - self.heuristic_exact


def transfer_eval(
    angles: engine.AngleVector,
    targets: list[tuple[str, instances.Instance]],
    shots: int,
    seed: int,
    label: str = "angles",
    reference: Optional[engine.AngleVector] = None,
) -> list[TransferRow]:
    """Evaluate fixed angles on unseen instances next to the tabulated transfer angles."""
    reference = reference if reference is not None else heuristic_angles(angles.p)
    rows = []
    for k, (iid, inst) in enumerate(targets):
        s = controller.derive_seed(seed, k)
        rows.append(
            TransferRow(
                instance_id=iid,
                n=inst.n,
                label=label,
                sampled=engine.sampled_cost(inst, angles, shots, s).value,
                exact=engine.exact_cost(inst, angles),
                heuristic_sampled=engine.sampled_cost(inst, reference, shots, s + 1).value,
                heuristic_exact=engine.exact_cost(inst, reference),
            )
        )
    return rows

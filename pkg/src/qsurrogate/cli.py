"""Command-line entry point: gen, run, aggregate, reeval, transfer, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import controller, engine
from .harness import experiment, report
from .harness.heuristics import heuristic_angles

log = logging.getLogger("qsurrogate")


def _pairs(tokens) -> dict:
    out = {}
    for tok in tokens or ():
        key, sep, value = tok.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {tok!r}")
        out[key.replace("-", "_")] = int(value)
    return out


def cmd_gen(args) -> int:
    if bool(args.maxcut is not None) == bool(args.heavy_hex is not None):
        raise experiment.ExperimentError("pass exactly one of --maxcut or --heavy-hex")
    kind, params = ("maxcut", args.maxcut) if args.maxcut is not None else ("heavy_hex", args.heavy_hex)
    params = _pairs(params)
    count = params.pop("count", 1)
    try:
        manifest = experiment.generate_manifest(
            args.manifest, kind, count, args.master_seed, append=args.append, **params
        )
    except TypeError as exc:
        raise experiment.ExperimentError(f"bad instance parameters {params}: {exc}") from None
    print(f"{manifest.path}: {len(manifest.entries)} instances")
    return 0


def _spec(args):
    overrides = {
        "master_seed": getattr(args, "master_seed", None),
        "workers": getattr(args, "workers", None),
        "output_dir": getattr(args, "output_dir", None),
        "n_repeats": getattr(args, "n_repeats", None),
    }
    return experiment.load_spec(args.spec, overrides)


def cmd_run(args) -> int:
    spec = _spec(args)
    failures = experiment.run_experiment(spec)
    for task, exc in failures:
        print(f"FAILED {task.label}/{task.instance_id}/rep{task.repeat}: {exc}", file=sys.stderr)
    return 1 if failures else 0


def cmd_aggregate(args) -> int:
    spec = _spec(args)
    out_dir = spec.output_dir / "aggregate"
    out_dir.mkdir(parents=True, exist_ok=True)
    for cell in spec.cells:
        if args.label and cell.label not in args.label:
            continue
        curve = report.aggregate_cell(spec, cell.label, args.metric)
        path = out_dir / f"{cell.label}.{args.metric}.json"
        experiment.write_json(path, curve.to_dict() | {"label": cell.label, "metric": args.metric})
        print(path)
    return 0


def cmd_reeval(args) -> int:
    spec = _spec(args)
    count = experiment.reevaluate_experiment(spec, args.label)
    print(f"re-evaluated {count} runs")
    return 0


def cmd_transfer(args) -> int:
    manifest = experiment.Manifest.load(args.manifest)
    ids = manifest.ids() if args.all else args.instances
    if not ids:
        raise experiment.ExperimentError("no target instances; use --instances or --all")
    if args.angles_from:
        summary = json.loads(Path(args.angles_from).read_text())
        angles = engine.AngleVector.from_theta(summary["theta_opt"])
        label = Path(args.angles_from).stem
    elif args.theta:
        angles = engine.AngleVector.from_theta(args.theta)
        label = "theta"
    else:
        angles = heuristic_angles(args.heuristic)
        label = f"heuristic_p{args.heuristic}"
    rows = experiment.transfer_eval(
        angles, [(i, manifest.instance(i)) for i in ids], args.shots, args.master_seed, label
    )
    header = ["instance_id", "n", "label", "sampled", "exact", "heuristic_sampled", "heuristic_exact", "margin"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        for r in rows:
            writer.writerow([r.instance_id, r.n, r.label, r.sampled, r.exact, r.heuristic_sampled, r.heuristic_exact, r.margin])
    finally:
        if args.out:
            out.close()
    return 0


def cmd_report(args) -> int:
    spec = _spec(args)
    for path in report.report(spec, args.metric, args.out_dir, plot=not args.no_plot):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsurrogate", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate seeded instances and a manifest")
    p.add_argument("--maxcut", nargs="*", metavar="KEY=VALUE", help="n=16 count=5")
    p.add_argument("--heavy-hex", nargs="*", metavar="KEY=VALUE", help="rows=1 cols=2 keep=16 count=5")
    p.add_argument("--master-seed", "--seed", dest="master_seed", type=int, default=0)
    p.add_argument("--manifest", default="instances/manifest.json")
    p.add_argument("--append", action="store_true", help="add to an existing manifest")
    p.set_defaults(func=cmd_gen)

    def spec_parser(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="experiment spec (.json or .toml)")
        p.add_argument("--master-seed", type=int)
        p.add_argument("--output-dir")
        p.set_defaults(func=func)
        return p

    p = spec_parser("run", "execute (or resume) every run of an experiment", cmd_run)
    p.add_argument("--workers", type=int)
    p.add_argument("--n-repeats", type=int)

    p = spec_parser("aggregate", "aggregate learning curves per cell to JSON", cmd_aggregate)
    p.add_argument("--metric", default="r", choices=report.METRICS)
    p.add_argument("--label", action="append")

    p = spec_parser("reeval", "exact cost at the best-so-far angles of every run", cmd_reeval)
    p.add_argument("--label", action="append")

    p = spec_parser("report", "CSV tables and plots of aggregated curves", cmd_report)
    p.add_argument("--metric", action="append", choices=report.METRICS)
    p.add_argument("--out-dir")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("transfer", help="evaluate fixed angles on unseen instances")
    p.add_argument("--manifest", required=True)
    target = p.add_mutually_exclusive_group()
    target.add_argument("--instances", nargs="+")
    target.add_argument("--all", action="store_true")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--angles-from", help="run summary JSON; uses its theta_opt")
    src.add_argument("--theta", type=float, nargs="+")
    src.add_argument("--heuristic", type=int, metavar="P")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--master-seed", "--seed", dest="master_seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transfer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (experiment.ExperimentError, controller.ArchiveConflict, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

from .experiment import (
    CellSpec,
    ExperimentError,
    ExperimentSpec,
    Manifest,
    TransferRow,
    generate_manifest,
    load_spec,
    reevaluate_exact,
    run_experiment,
    transfer_eval,
)
from .heuristics import HEURISTIC_ANGLES, heuristic_angles
from .metrics import AggregateCurve, aggregate, approximation_ratio

__all__ = [
    "AggregateCurve",
    "CellSpec",
    "ExperimentError",
    "ExperimentSpec",
    "HEURISTIC_ANGLES",
    "Manifest",
    "TransferRow",
    "aggregate",
    "approximation_ratio",
    "generate_manifest",
    "heuristic_angles",
    "load_spec",
    "reevaluate_exact",
    "run_experiment",
    "transfer_eval",
]

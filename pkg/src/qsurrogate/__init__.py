"""Surrogate-based optimization of QAOA circuits from finite-shot cost estimates."""

from .controller import Archive, EvaluationRecord, RunConfig, RunResult, qaoa_truth, run
from .engine import AngleVector, exact_cost, prepare_qaoa_state, sampled_cost
from .instances import (
    generate_3regular_maxcut,
    generate_heavy_hex,
    generate_heavy_hex_instance,
    truncate_graph,
)
from .optim import BoundBox, DeConfig

__version__ = "0.1.0"

__all__ = [
    "AngleVector",
    "Archive",
    "BoundBox",
    "DeConfig",
    "EvaluationRecord",
    "RunConfig",
    "RunResult",
    "exact_cost",
    "generate_3regular_maxcut",
    "generate_heavy_hex",
    "generate_heavy_hex_instance",
    "prepare_qaoa_state",
    "qaoa_truth",
    "run",
    "sampled_cost",
    "truncate_graph",
]

"""Load disaggregation by aided linear integer programming."""

from .formulation import Enhancements, StateAssignment, build, evaluate
from .metrics import AccuracyReport, ac, acc, score
from .model import ApplianceSpec, HouseholdModel, StateSpec, compile_model
from .pipeline import DisaggregationResult, PipelineConfig, run
from .solver import RefinementProblem, refine_oracle, solve_bb, solve_exhaustive, solve_refinement_lp

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "ApplianceSpec",
    "DisaggregationResult",
    "Enhancements",
    "HouseholdModel",
    "PipelineConfig",
    "RefinementProblem",
    "StateAssignment",
    "StateSpec",
    "ac",
    "acc",
    "build",
    "compile_model",
    "evaluate",
    "refine_oracle",
    "run",
    "score",
    "solve_bb",
    "solve_exhaustive",
    "solve_refinement_lp",
]

"""Counterfactual explanation engine for tabular models: trains
MIO-representable predictors, compiles them with recourse criteria into a
mixed-integer linear program, and solves it with a built-in branch-and-bound
whose incumbent pool supplies diverse counterfactuals."""

__version__ = "0.1.0"

from .builder import CausalRelation, CeConfig, CeResult, Counterfactual, InfeasibleError, build, generate
from .dataset import Dataset, load_csv
from .evaluate import MetricsReport, aggregate, hull_membership, score_set
from .milp import MilpModel, Sense, VarKind, Variable
from .schema import Actionability, FeatureSchema, FeatureSpec, Kind
from .solver import SolveOptions, SolveResult, check_solution, solve_lp, solve_milp

__all__ = [
    "Actionability",
    "CausalRelation",
    "CeConfig",
    "CeResult",
    "Counterfactual",
    "Dataset",
    "FeatureSchema",
    "FeatureSpec",
    "InfeasibleError",
    "Kind",
    "MetricsReport",
    "MilpModel",
    "Sense",
    "SolveOptions",
    "SolveResult",
    "VarKind",
    "Variable",
    "__version__",
    "aggregate",
    "build",
    "check_solution",
    "generate",
    "hull_membership",
    "load_csv",
    "score_set",
    "solve_lp",
    "solve_milp",
]

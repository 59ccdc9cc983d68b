"""LP simplex and branch-and-bound MILP solver with a solution pool."""

from .branch_bound import (
    PoolEntry,
    SolveOptions,
    SolveResult,
    ViolationReport,
    check_solution,
    solve_milp,
)
from .kernel import DEFAULT_KERNEL, available_kernels, get_kernel
from .simplex import LpData, LpResult, solve_lp_data

__all__ = [
    "DEFAULT_KERNEL",
    "LpData",
    "LpResult",
    "PoolEntry",
    "SolveOptions",
    "SolveResult",
    "ViolationReport",
    "available_kernels",
    "check_solution",
    "get_kernel",
    "solve_lp",
    "solve_lp_data",
    "solve_milp",
]


def solve_lp(model, kernel: str | None = None) -> LpResult:
    """Solve the LP relaxation of a model (integrality dropped)."""
    data = LpData.from_model(model)
    return solve_lp_data(data, kernel_name=kernel)

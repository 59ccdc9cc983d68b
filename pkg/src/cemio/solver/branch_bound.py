"""Branch-and-bound over LP relaxations, with an incumbent solution pool.

The pool is the diversity mechanism downstream: in ``improving-only``
mode it records each new incumbent found during the tree search; in
``all-feasible`` mode it additionally keeps non-improving integer-feasible
solutions and keeps populating (by branching on integer-valued variables)
until the requested pool size is reached or a limit fires.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from ..milp import MilpModel, Sense
from .simplex import LpData, LpResult, solve_lp_data

INT_TOL = 1e-6


@dataclass
class SolveOptions:
    gap_tol: float = 1e-6
    time_limit: float | None = None
    node_limit: int = 200_000
    pool_size: int = 1
    pool_mode: str = "improving-only"  # or "all-feasible"
    branch_rule: str = "most-fractional"
    node_order: str = "best-bound"
    kernel: str | None = None
    verbose: bool = False
    log_stream: object = None
    pool_key_vars: list[int] | None = None  # distinctness key; default all integral vars

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.gap_tol <= 0:
            raise ValueError("gap_tol must be > 0")
        if self.pool_mode not in ("improving-only", "all-feasible"):
            raise ValueError(f"unknown pool_mode {self.pool_mode!r}")
        if self.branch_rule != "most-fractional":
            raise ValueError("only most-fractional branching is implemented")
        if self.node_order != "best-bound":
            raise ValueError("only best-bound node order is implemented")


@dataclass
class PoolEntry:
    x: np.ndarray
    objective: float

    def assignment(self) -> dict[int, float]:
        return {i: float(v) for i, v in enumerate(self.x)}


@dataclass
class SolveResult:
    status: str  # optimal | feasible | infeasible | unbounded | limit
    best_objective: float
    pool: list[PoolEntry]
    nodes_explored: int
    wall_time: float
    pool_truncated: bool = False  # fewer entries than requested pool_size


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)


def _int_key(x: np.ndarray, int_ids: np.ndarray) -> tuple:
    return tuple(int(round(v)) for v in x[int_ids])


def solve_milp(model: MilpModel, options: SolveOptions | None = None) -> SolveResult:
    """Minimize the model, collecting integer-feasible solutions in a pool."""
    options = options or SolveOptions()
    if not model.frozen:
        raise ValueError("model must be frozen before solving")
    data = LpData.from_model(model)
    int_ids = data.int_ids
    key_ids = int_ids if options.pool_key_vars is None else np.array(
        sorted(options.pool_key_vars), dtype=np.int64)
    started = time.perf_counter()

    def lp(lower, upper) -> LpResult:
        return solve_lp_data(data, lower, upper, options.kernel)

    heap: list[_Node] = []
    seq = 0
    heapq.heappush(heap, _Node(-np.inf, seq, data.lower.copy(), data.upper.copy()))

    best_obj = np.inf
    pool: dict[tuple, PoolEntry] = {}
    order: list[tuple] = []
    nodes = 0
    hit_limit = False
    root_unbounded = False
    populate = options.pool_mode == "all-feasible"

    def pool_full() -> bool:
        return len(pool) >= options.pool_size

    def record(x: np.ndarray, obj: float) -> None:
        key = _int_key(x, key_ids)
        prev = pool.get(key)
        if prev is None:
            if options.pool_mode == "improving-only" and obj >= best_obj and pool:
                return
            if populate and pool_full() and obj >= best_obj:
                return
            pool[key] = PoolEntry(x.copy(), obj)
            order.append(key)
            if options.verbose and options.log_stream is not None:
                elapsed = time.perf_counter() - started
                options.log_stream.write(
                    f"incumbent node={nodes} obj={obj:.9g} time={elapsed:.3f}s\n")
        elif obj < prev.objective - 1e-12:
            pool[key] = PoolEntry(x.copy(), obj)

    while heap:
        if options.time_limit is not None and time.perf_counter() - started > options.time_limit:
            hit_limit = True
            break
        if nodes >= options.node_limit:
            hit_limit = True
            break
        node = heapq.heappop(heap)
        # bound-based pruning; in populate mode only once the pool is full
        if node.bound >= best_obj - options.gap_tol and (not populate or pool_full()):
            continue
        nodes += 1
        res = lp(node.lower, node.upper)
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            root_unbounded = True
            break
        obj, x = res.objective, res.x
        if obj >= best_obj - options.gap_tol and (not populate or pool_full()):
            continue

        if int_ids.size:
            frac = np.abs(x[int_ids] - np.round(x[int_ids]))
            worst = int(np.argmax(frac))
            max_frac = float(frac[worst])
        else:
            max_frac = 0.0

        if max_frac <= INT_TOL:
            improved = obj < best_obj
            record(x, obj)
            if improved:
                best_obj = obj
            # keep populating: split on an unfixed integer to reach new pools,
            # preferring variables that participate in pool distinctness
            if populate and not pool_full():
                loose = [j for j in key_ids if node.lower[j] < node.upper[j] - 1e-9] or \
                        [j for j in int_ids if node.lower[j] < node.upper[j] - 1e-9]
                if loose:
                    j = loose[0]
                    val = round(float(x[j]))
                    for lo_j, up_j in ((val, val), (node.lower[j], val - 1), (val + 1, node.upper[j])):
                        if lo_j > up_j:
                            continue
                        lo2, up2 = node.lower.copy(), node.upper.copy()
                        lo2[j], up2[j] = lo_j, up_j
                        seq += 1
                        heapq.heappush(heap, _Node(obj, seq, lo2, up2))
            continue

        j = int(int_ids[worst])
        val = float(x[j])
        down, up_ = np.floor(val), np.ceil(val)
        for lo_j, up_j in ((node.lower[j], down), (up_, node.upper[j])):
            if lo_j > up_j:
                continue
            lo2, up2 = node.lower.copy(), node.upper.copy()
            lo2[j], up2[j] = lo_j, up_j
            seq += 1
            heapq.heappush(heap, _Node(obj, seq, lo2, up2))

    entries = [pool[k] for k in order if k in pool]
    entries.sort(key=lambda e: e.objective)
    if len(entries) > options.pool_size:
        entries = entries[: options.pool_size]
    wall = time.perf_counter() - started

    if root_unbounded:
        return SolveResult("unbounded", -np.inf, [], nodes, wall)
    if not entries:
        status = "limit" if hit_limit else "infeasible"
        return SolveResult(status, np.inf, [], nodes, wall, pool_truncated=True)
    status = "limit" if hit_limit else "optimal"
    truncated = len(entries) < options.pool_size
    return SolveResult(status, entries[0].objective, entries, nodes, wall, truncated)


def check_solution(model: MilpModel, x: np.ndarray) -> "ViolationReport":
    """Residual report for an assignment: per-constraint violations, bound
    and integrality residuals, and the per-tag maxima."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.variables),):
        raise ValueError("assignment must cover every variable")
    rows = []
    by_tag: dict[str, float] = {}
    for i, con in enumerate(model.constraints):
        lhs = sum(coef * x[vid] for vid, coef in con.coeffs)
        if con.sense is Sense.LE:
            viol = max(0.0, lhs - con.rhs)
        elif con.sense is Sense.GE:
            viol = max(0.0, con.rhs - lhs)
        else:
            viol = abs(lhs - con.rhs)
        rows.append((i, con.tag, viol))
        by_tag[con.tag] = max(by_tag.get(con.tag, 0.0), viol)
    bound_viol = 0.0
    for v in model.variables:
        bound_viol = max(bound_viol, v.lower - x[v.id], x[v.id] - v.upper, 0.0)
    int_resid = 0.0
    for vid in model.integral_ids():
        int_resid = max(int_resid, abs(x[vid] - round(x[vid])))
    max_con = max((v for _, _, v in rows), default=0.0)
    return ViolationReport(rows, by_tag, bound_viol, int_resid, max(max_con, bound_viol))


@dataclass
class ViolationReport:
    constraints: list[tuple[int, str, float]]
    by_tag: dict[str, float]
    bound_violation: float
    integrality_residual: float
    max_violation: float

    def feasible(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol and self.integrality_residual <= tol

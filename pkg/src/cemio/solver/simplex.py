"""Two-phase primal simplex for LPs with bounded variables.

Every constraint row gets a slack column (fixed to zero for equalities)
and phase one starts from an artificial basis, so no big-M constants
enter the arithmetic. Phase two re-prices with the true costs after the
artificials are pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..milp import MilpModel, Sense
from . import kernel as _kernel

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-9
PRICE_TOL = 1e-9
BLAND_AFTER = 25


@dataclass
class LpData:
    """Dense array form of a MILP, shared across branch-and-bound nodes."""

    c: np.ndarray
    A: np.ndarray
    senses: np.ndarray  # -1 for <=, 0 for =, +1 for >=
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    obj_const: float
    int_ids: np.ndarray

    @classmethod
    def from_model(cls, model: MilpModel) -> "LpData":
        n = len(model.variables)
        m = len(model.constraints)
        A = np.zeros((m, n))
        senses = np.zeros(m, dtype=np.int8)
        b = np.zeros(m)
        code = {Sense.LE: -1, Sense.EQ: 0, Sense.GE: 1}
        for i, con in enumerate(model.constraints):
            for vid, coef in con.coeffs:
                A[i, vid] += coef
            senses[i] = code[con.sense]
            b[i] = con.rhs
        c = np.zeros(n)
        for vid, coef in model.objective.coeffs.items():
            c[vid] += coef
        lower = np.array([v.lower for v in model.variables])
        upper = np.array([v.upper for v in model.variables])
        int_ids = np.array(model.integral_ids(), dtype=np.int64)
        return cls(c, A, senses, b, lower, upper, model.objective.constant, int_ids)


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | error
    objective: float
    x: np.ndarray | None
    iterations: int = 0


def _solve_once(data: LpData, lower, upper, kern) -> LpResult:
    m, n = data.A.shape
    if np.any(lower > upper + 1e-12):
        return LpResult("infeasible", np.inf, None)

    # nonbasic start: every structural at a finite bound, slacks at zero
    struct_stat = np.zeros(n, dtype=np.int8)
    struct_stat[~np.isfinite(lower)] = 1
    if not np.all(np.isfinite(np.where(struct_stat == 0, lower, upper))):
        raise ValueError("variable with no finite bound is not supported")
    xbar = np.where(struct_stat == 0, lower, upper)
    resid = data.b - data.A @ xbar

    # crash basis: a row's own slack serves as the initial basic variable
    # whenever the start residual fits the slack's bounds; only the rest
    # get phase-1 artificials
    fits = ((data.senses == -1) & (resid >= 0.0)) | \
           ((data.senses == 1) & (resid <= 0.0)) | \
           ((data.senses == 0) & (resid == 0.0))
    art_rows = np.flatnonzero(~fits)
    n_art = len(art_rows)
    N = n + m + n_art

    lo = np.empty(N)
    up = np.empty(N)
    lo[:n] = lower
    up[:n] = upper
    for i, s in enumerate(data.senses):
        if s == -1:
            lo[n + i], up[n + i] = 0.0, np.inf
        elif s == 1:
            lo[n + i], up[n + i] = -np.inf, 0.0
        else:
            lo[n + i], up[n + i] = 0.0, 0.0
    lo[n + m:] = 0.0
    up[n + m:] = np.inf

    stat = np.zeros(N, dtype=np.int8)
    stat[:n] = struct_stat
    stat[n:n + m][data.senses == 1] = 1

    tab = np.zeros((m, N))
    tab[:, :n] = data.A
    tab[np.arange(m), n + np.arange(m)] = 1.0
    xb = resid.copy()
    basis = (n + np.arange(m)).astype(np.int64)
    if n_art:
        sign = np.where(resid[art_rows] < 0, -1.0, 1.0)
        tab[art_rows] *= sign[:, None]
        tab[art_rows, n + m + np.arange(n_art)] = 1.0
        xb[art_rows] = np.abs(resid[art_rows])
        basis[art_rows] = n + m + np.arange(n_art)
    stat[basis] = 2

    max_iter = min(2000 + 60 * (m + N), 120_000)
    it1 = 0

    if n_art:
        # phase 1: drive artificial infeasibility to zero
        c1 = np.zeros(N)
        c1[n + m:] = 1.0
        status, it1 = kern.run(tab, xb, basis, stat, lo, up, c1, PRICE_TOL,
                               PIVOT_TOL, max_iter, BLAND_AFTER)
        if status == _kernel.STATUS_ITER_LIMIT:
            return LpResult("error", np.nan, None, it1)
        art = basis >= n + m
        infeas = float(np.abs(xb[art]).sum()) if art.any() else 0.0
        if infeas > FEAS_TOL:
            status = "suspect-infeasible" if it1 > 20_000 else "infeasible"
            return LpResult(status, np.inf, None, it1)
        # pin the artificials before optimizing the true costs
        lo[n + m:] = 0.0
        up[n + m:] = 0.0

    c2 = np.zeros(N)
    c2[:n] = data.c
    status, it2 = kern.run(tab, xb, basis, stat, lo, up, c2, PRICE_TOL,
                           PIVOT_TOL, max_iter, BLAND_AFTER)
    if status == _kernel.STATUS_ITER_LIMIT:
        return LpResult("error", np.nan, None, it1 + it2)
    if status == _kernel.STATUS_UNBOUNDED:
        return LpResult("unbounded", -np.inf, None, it1 + it2)

    x = np.where(stat[:n] == 0, lo[:n], up[:n])
    rows = basis < n
    x[basis[rows]] = xb[rows]
    np.clip(x, lower, upper, out=x)
    obj = float(data.c @ x) + data.obj_const
    return LpResult("optimal", obj, x, it1 + it2)


def solve_lp_data(data: LpData, lower=None, upper=None, kernel_name: str | None = None) -> LpResult:
    """Solve the LP relaxation of ``data`` with optional per-node bounds.

    On a pivot-loop stall the solve is retried once from a deterministically
    perturbed box, then reported as an error.
    """
    kern = _kernel.get_kernel(kernel_name)
    lower = data.lower if lower is None else lower
    upper = data.upper if upper is None else upper
    res = _solve_once(data, lower, upper, kern)
    if res.status == "suspect-infeasible":
        res = LpResult("error", np.nan, None, res.iterations)
    if res.status != "error":
        return res
    n = len(lower)
    jitter = 1e-9 * (1.0 + (np.arange(n) % 7))
    lo2 = np.where(np.isfinite(lower), lower - jitter, lower)
    up2 = np.where(np.isfinite(upper), upper + jitter, upper)
    res = _solve_once(data, lo2, up2, kern)
    if res.status == "suspect-infeasible":
        res = LpResult("infeasible", np.inf, None, res.iterations)
    if res.status == "optimal":
        x = np.clip(res.x, lower, upper)
        return LpResult("optimal", float(data.c @ x) + data.obj_const, x, res.iterations)
    if res.status != "error":
        return res
    raise ArithmeticError("simplex failed to converge after perturbed restart")

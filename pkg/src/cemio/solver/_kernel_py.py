"""Pure-numpy simplex pivot loop, the fallback when the compiled kernel
is unavailable. Semantics match ``_kernel_c`` pivot for pivot: Dantzig
pricing with a switch to Bland's rule after a degeneracy streak, ratio
ties broken on the smallest basic variable id. Reduced costs are updated
incrementally from the pivot row and refreshed periodically."""

from __future__ import annotations

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

_TIE = 1e-12
_DEGEN = 1e-9  # step size below which a pivot counts as degenerate
_REFRESH = 64  # full repricing interval, bounds incremental drift


def run(tab, xb, basis, stat, lo, up, c, tol, piv_tol, max_iter, bland_after):
    """Run bounded-variable simplex iterations in place.

    ``stat`` codes: 0 nonbasic at lower, 1 nonbasic at upper, 2 basic.
    Returns (status, iterations).
    """
    m, n = tab.shape
    degen_streak = 0
    bland = False
    d = np.empty(n)
    stale = True

    for it in range(max_iter):
        if stale or it % _REFRESH == 0:
            np.subtract(c, c[basis] @ tab, out=d)
            stale = False

        movable = up - lo > _TIE
        at_lo = (stat == 0) & (d < -tol) & movable
        at_up = (stat == 1) & (d > tol) & movable
        if bland:
            eligible = np.flatnonzero(at_lo | at_up)
            if eligible.size == 0:
                return STATUS_OPTIMAL, it
            j = int(eligible[0])
        else:
            viol = np.where(at_lo, -d, 0.0)
            viol = np.where(at_up, d, viol)
            j = int(np.argmax(viol))
            if viol[j] <= tol:
                return STATUS_OPTIMAL, it

        direction = 1.0 if stat[j] == 0 else -1.0
        g = direction * tab[:, j]

        t = np.full(m, np.inf)
        decr = g > piv_tol
        incr = g < -piv_tol
        if decr.any():
            t[decr] = (xb[decr] - lo[basis[decr]]) / g[decr]
        if incr.any():
            t[incr] = (up[basis[incr]] - xb[incr]) / (-g[incr])
        np.maximum(t, 0.0, out=t)

        flip_t = up[j] - lo[j]
        t_rows = t.min() if m else np.inf

        if flip_t < t_rows:
            if not np.isfinite(flip_t):
                return STATUS_UNBOUNDED, it
            xb -= (direction * flip_t) * tab[:, j]
            stat[j] = 1 - stat[j]
            step = flip_t
        else:
            if not np.isfinite(t_rows):
                return STATUS_UNBOUNDED, it
            # smallest basic id among rows blocking at the minimal ratio
            tie_rows = np.flatnonzero(t <= t_rows + _TIE)
            r = int(tie_rows[np.argmin(basis[tie_rows])])
            step = t[r]

            enter_val = (lo[j] if stat[j] == 0 else up[j]) + direction * step
            xb -= (direction * step) * tab[:, j]
            leaving = basis[r]
            stat[leaving] = 0 if g[r] > 0 else 1

            piv = tab[r, j]
            tab[r, :] /= piv
            col = tab[:, j].copy()
            col[r] = 0.0
            tab -= np.outer(col, tab[r, :])
            basis[r] = j
            stat[j] = 2
            xb[r] = enter_val

            d -= d[j] * tab[r, :]
            d[j] = 0.0

        if step <= _DEGEN:
            degen_streak += 1
            if degen_streak > bland_after:
                bland = True
        else:
            # progress made: cycling through earlier bases is impossible now,
            # so return to the faster Dantzig pricing
            degen_streak = 0
            bland = False

    return STATUS_ITER_LIMIT, max_iter

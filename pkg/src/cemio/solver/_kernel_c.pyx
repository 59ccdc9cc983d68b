# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex pivot loop. Same algorithm and tie-breaking as the
numpy fallback in ``_kernel_py``; the win is fusing the pricing, ratio
test, rank-1 tableau update, and incremental reduced-cost update into
single passes without temporaries."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

cdef int REFRESH = 64  # full repricing interval, bounds incremental drift


def run(double[:, ::1] tab, double[::1] xb, cnp.int64_t[::1] basis,
        signed char[::1] stat, double[::1] lo, double[::1] up,
        double[::1] c, double tol, double piv_tol, int max_iter,
        int bland_after):
    cdef Py_ssize_t m = tab.shape[0]
    cdef Py_ssize_t n = tab.shape[1]
    cdef Py_ssize_t i, j, k, r, it
    cdef int degen_streak = 0
    cdef bint bland = False
    cdef bint stale = True
    cdef double tie = 1e-12
    cdef double degen = 1e-9
    cdef double dj, viol, best_viol, direction, g, t, t_rows, flip_t
    cdef double step, enter_val, piv, f, inf = np.inf
    cdef double[::1] d = np.empty(n)
    cdef double[::1] ratios = np.empty(m)

    for it in range(max_iter):
        if stale or it % REFRESH == 0:
            for k in range(n):
                d[k] = c[k]
            for i in range(m):
                f = c[basis[i]]
                if f != 0.0:
                    for k in range(n):
                        d[k] -= f * tab[i, k]
            stale = False

        # entering column: most violated reduced cost (first eligible in
        # Bland mode), skipping basic and fixed columns
        j = -1
        best_viol = tol
        for k in range(n):
            if stat[k] == 2 or up[k] - lo[k] <= tie:
                continue
            if stat[k] == 0:
                viol = -d[k]
            else:
                viol = d[k]
            if viol > best_viol:
                j = k
                best_viol = viol
                if bland:
                    break

        if j < 0:
            return STATUS_OPTIMAL, it

        direction = 1.0 if stat[j] == 0 else -1.0

        t_rows = inf
        for i in range(m):
            g = direction * tab[i, j]
            if g > piv_tol:
                t = (xb[i] - lo[basis[i]]) / g
            elif g < -piv_tol:
                t = (up[basis[i]] - xb[i]) / (-g)
            else:
                ratios[i] = inf
                continue
            if t < 0.0:
                t = 0.0
            ratios[i] = t
            if t < t_rows:
                t_rows = t

        flip_t = up[j] - lo[j]

        if flip_t < t_rows:
            if flip_t == inf:
                return STATUS_UNBOUNDED, it
            for i in range(m):
                xb[i] -= direction * flip_t * tab[i, j]
            stat[j] = 1 - stat[j]
            step = flip_t
        else:
            if t_rows == inf:
                return STATUS_UNBOUNDED, it
            r = -1
            for i in range(m):
                if ratios[i] <= t_rows + tie:
                    if r < 0 or basis[i] < basis[r]:
                        r = i
            step = ratios[r]

            enter_val = (lo[j] if stat[j] == 0 else up[j]) + direction * step
            g = direction * tab[r, j]
            for i in range(m):
                xb[i] -= direction * step * tab[i, j]
            if g > 0:
                stat[basis[r]] = 0
            else:
                stat[basis[r]] = 1

            piv = tab[r, j]
            for k in range(n):
                tab[r, k] /= piv
            for i in range(m):
                if i == r:
                    continue
                f = tab[i, j]
                if f != 0.0:
                    for k in range(n):
                        tab[i, k] -= f * tab[r, k]
            basis[r] = j
            stat[j] = 2
            xb[r] = enter_val

            dj = d[j]
            if dj != 0.0:
                for k in range(n):
                    d[k] -= dj * tab[r, k]
            d[j] = 0.0

        if step <= degen:
            degen_streak += 1
            if degen_streak > bland_after:
                bland = True
        else:
            # progress made: cycling through earlier bases is impossible now,
            # so return to the faster Dantzig pricing
            degen_streak = 0
            bland = False

    return STATUS_ITER_LIMIT, max_iter

"""Dense two-phase simplex (Bland's rule) for tiny covering LPs.

    min  c.x   s.t.  G x >= h,  x >= 0

The implementation-LP has one row per non-recommended action, so the
tableau never exceeds a handful of rows; dense pivots are cheapest here.
"""
import numpy as np

from ._jit import jit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2

PIVOT_TOL = 1e-12


@jit
def _pivot(tab, row, col):
    tab[row, :] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row:
            f = tab[i, col]
            if f != 0.0:
                tab[i, :] -= f * tab[row, :]


@jit
def _run(tab, basis, allowed, tol, max_iter):
    k = basis.shape[0]
    ncol = tab.shape[1] - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(ncol):
            if allowed[j] and tab[k, j] < -tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = np.inf
        for i in range(k):
            a = tab[i, enter]
            if a > PIVOT_TOL:
                r = tab[i, ncol] / a
                if r < best - 1e-12 or (r <= best + 1e-12 and leave >= 0 and basis[i] < basis[leave]):
                    best = r
                    leave = i
        if leave < 0:
            return UNBOUNDED
        _pivot(tab, leave, enter)
        basis[leave] = enter
    return UNBOUNDED


@jit
def simplex_min(c, G, h, tol):
    """Solve min c.x s.t. G x >= h, x >= 0.

    Returns (status, x). Infeasible when the phase-1 optimum exceeds tol.
    """
    k, m = G.shape
    x = np.zeros(m)
    if k == 0:
        # no constraints: zero is optimal for c >= 0
        for j in range(m):
            if c[j] < -tol:
                return UNBOUNDED, x
        return OPTIMAL, x

    # columns: x (m) | slack/surplus (k) | artificial (k) | rhs
    ncol = m + 2 * k
    tab = np.zeros((k + 1, ncol + 1))
    basis = np.empty(k, np.int64)
    allowed = np.ones(ncol, np.bool_)
    for i in range(k):
        allowed[m + k + i] = False
        if h[i] > tol:
            for j in range(m):
                tab[i, j] = G[i, j]
            tab[i, m + i] = -1.0
            tab[i, m + k + i] = 1.0
            tab[i, ncol] = h[i]
            basis[i] = m + k + i
        else:
            for j in range(m):
                tab[i, j] = -G[i, j]
            tab[i, m + i] = 1.0
            tab[i, ncol] = max(-h[i], 0.0)
            basis[i] = m + i

    # phase 1: minimise the sum of artificials
    n_art = 0
    for i in range(k):
        if basis[i] >= m + k:
            n_art += 1
            tab[k, :] -= tab[i, :]
            tab[k, basis[i]] = 0.0
    max_iter = 50 * (k + ncol + 1)
    if n_art > 0:
        _run(tab, basis, allowed, tol, max_iter)
        if -tab[k, ncol] > tol:
            return INFEASIBLE, x
        # drive zero-level artificials out of the basis
        for i in range(k):
            if basis[i] >= m + k:
                for j in range(m + k):
                    if abs(tab[i, j]) > 1e-9:
                        _pivot(tab, i, j)
                        basis[i] = j
                        break

    # phase 2
    tab[k, :] = 0.0
    for j in range(m):
        tab[k, j] = c[j]
    for i in range(k):
        b = basis[i]
        if b < m and c[b] != 0.0:
            tab[k, :] -= c[b] * tab[i, :]
    status = _run(tab, basis, allowed, tol, max_iter)
    if status != OPTIMAL:
        return status, x
    for i in range(k):
        if basis[i] < m:
            x[basis[i]] = max(tab[i, ncol], 0.0)
    return OPTIMAL, x


@jit
def implementation_lp(outcome_rows, qbar_row, rec, nudge, tol):
    """Build and solve the minimal-payment IC program for one (state, action).

    outcome_rows: [n, m] outcome distributions, qbar_row: [n] truncated Q.
    """
    n, m = outcome_rows.shape
    G = np.empty((n - 1, m))
    h = np.empty(n - 1)
    r = 0
    for a in range(n):
        if a == rec:
            continue
        for o in range(m):
            G[r, o] = outcome_rows[rec, o] - outcome_rows[a, o]
        h[r] = qbar_row[a] - qbar_row[rec] + nudge
        r += 1
    return simplex_min(outcome_rows[rec].copy(), G, h, tol)

"""Brute-force references used to cross-check the LP solver.

The grid scan is always compiled, also when the interpreted fallback is
selected: it is a test oracle, not a kernel under comparison.
"""
import numba as nb
import numpy as np

from .lp import LPInstance, build_lp

BOX = 3.0
GRID_STEP = 0.01


@nb.njit(cache=True)
def grid_min(c, G, h, step, hi):
    """Smallest c.b over the grid {0, step, ..., hi}^m subject to G b >= h.

    The first m-1 coordinates are scanned; the last one takes the smallest
    feasible grid value, which is optimal because c >= 0. Returns inf when no
    grid point is feasible.
    """
    k, m = G.shape
    N = int(round(hi / step)) + 1
    best = np.inf
    idx = np.zeros(max(m - 1, 1), np.int64)
    total = N ** (m - 1)
    for flat in range(total):
        r = flat
        for j in range(m - 1):
            idx[j] = r % N
            r //= N
        cost = 0.0
        lo = 0.0
        up = hi
        ok = True
        for j in range(m - 1):
            cost += c[j] * idx[j] * step
        for i in range(k):
            rest = 0.0
            for j in range(m - 1):
                rest += G[i, j] * idx[j] * step
            need = h[i] - rest
            g = G[i, m - 1]
            if g > 1e-15:
                lo = max(lo, need / g)
            elif g < -1e-15:
                up = min(up, need / g)
            elif need > 1e-9:
                ok = False
        if not ok:
            continue
        kk = np.ceil(lo / step - 1e-9)
        if kk < 0:
            kk = 0.0
        x = kk * step
        if x > up + 1e-9 or x > hi + 1e-9:
            continue
        cost += c[m - 1] * x
        if cost < best:
            best = cost
    return best


def random_static_instance(rng, max_actions=4, max_outcomes=4):
    """Dirichlet outcome rows, truncated values in [-1, 1], random recommendation."""
    n = int(rng.integers(1, max_actions + 1))
    m = int(rng.integers(1, max_outcomes + 1))
    O = rng.dirichlet(np.ones(m), size=n)
    q = rng.uniform(-1.0, 1.0, n)
    return O, q, int(rng.integers(n))


def boxed(instance, hi=BOX):
    """Same program with the extra rows b_j <= hi."""
    m = instance.objective.shape[0]
    return LPInstance(instance.objective, np.vstack([instance.ic_matrix, -np.eye(m)]),
                      np.concatenate([instance.ic_rhs, -hi * np.ones(m)]), instance.recommended, instance.nudge)


def grid_reference(O, q, rec, step=GRID_STEP, hi=BOX):
    inst = build_lp(O, q, rec)
    return float(grid_min(inst.objective, inst.ic_matrix, inst.ic_rhs, step, hi))

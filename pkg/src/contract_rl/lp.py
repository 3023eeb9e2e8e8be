"""Minimal implementation contracts, the identifiability margin and nudge bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _simplex
from .mdp import OBSERVED

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LPInstance:
    """min objective.b  s.t.  ic_matrix b >= ic_rhs, b >= 0."""

    objective: np.ndarray
    ic_matrix: np.ndarray
    ic_rhs: np.ndarray
    recommended: int
    nudge: float = 0.0

    def dump(self):
        m = self.objective.shape[0]
        lines = [f"# implementation LP, recommended action {self.recommended}, nudge {self.nudge:.9g}",
                 "min  " + " + ".join(f"{c:.9g}*b{j}" for j, c in enumerate(self.objective))]
        for row, rhs in zip(self.ic_matrix, self.ic_rhs):
            lines.append("s.t. " + " + ".join(f"{g:.9g}*b{j}" for j, g in enumerate(row)) + f" >= {rhs:.9g}")
        lines.append("     " + ", ".join(f"b{j}" for j in range(m)) + " >= 0")
        return "\n".join(lines)


@dataclass(frozen=True)
class LPSolution:
    status: str
    contract: np.ndarray | None
    expected_payment: float

    @property
    def feasible(self):
        return self.status == "optimal"


def build_lp(outcome_rows, qbar_row, recommended, nudge=0.0):
    O = np.asarray(outcome_rows, dtype=float)
    q = np.asarray(qbar_row, dtype=float)
    others = [a for a in range(O.shape[0]) if a != recommended]
    G = O[recommended][None, :] - O[others]
    h = q[others] - q[recommended] + nudge
    return LPInstance(O[recommended].copy(), G.reshape(len(others), O.shape[1]), h, int(recommended), float(nudge))


def solve_lp(instance, tol=FEAS_TOL):
    status, x = _simplex.simplex_min(instance.objective, instance.ic_matrix, instance.ic_rhs, tol)
    if status == _simplex.INFEASIBLE:
        return LPSolution("infeasible", None, np.inf)
    if status != _simplex.OPTIMAL:
        return LPSolution("unbounded", None, -np.inf)
    return LPSolution("optimal", x, float(instance.objective @ x))


def minimal_contract(outcome_rows, qbar_row, recommended, nudge=0.0, tol=FEAS_TOL):
    """Cheapest contract that makes ``recommended`` the agent's strict-by-nudge best reply."""
    O = np.ascontiguousarray(outcome_rows, dtype=float)
    q = np.ascontiguousarray(qbar_row, dtype=float)
    status, x = _simplex.implementation_lp(O, q, int(recommended), float(nudge), tol)
    if status != _simplex.OPTIMAL:
        return LPSolution("infeasible", None, np.inf)
    return LPSolution("optimal", x, float(O[recommended] @ x))


def observed_action_contract(qbar_row, recommended, nudge=0.0):
    """Closed form when outcomes reveal actions: reimburse the Q shortfall on the recommended outcome."""
    q = np.asarray(qbar_row, dtype=float)
    b = np.zeros_like(q)
    others = np.delete(q, recommended)
    gap = (others.max() if others.size else q[recommended]) - q[recommended]
    b[recommended] = max(gap + (nudge if others.size else 0.0), 0.0)
    return b


def contract_table(mdp, qbar, nudge=0.0):
    """Minimal contracts for every (state, recommended action).

    Returns (contracts [S, n, m], feasible [S, n]). ``nudge`` may be a
    scalar or one value per timestep.
    """
    S, n, m = mdp.outcome_fn.shape
    B = np.zeros((S, n, m))
    ok = np.zeros((S, n), dtype=bool)
    xi = _nudge_per_state(mdp, nudge)
    for s in range(S):
        for a in range(n):
            if mdp.variant == OBSERVED and n == m:
                B[s, a] = observed_action_contract(qbar[s], a, xi[s])
                ok[s, a] = True
                continue
            sol = minimal_contract(mdp.outcome_fn[s], qbar[s], a, xi[s])
            if sol.feasible:
                B[s, a] = sol.contract
                ok[s, a] = True
    return B, ok


def _nudge_per_state(mdp, nudge):
    xi = np.asarray(nudge, dtype=float)
    if xi.ndim == 0:
        return np.full(mdp.n_states, float(xi))
    return xi[np.minimum(mdp.timestep, len(xi) - 1)]


@dataclass(frozen=True)
class DMin:
    value: float
    degenerate: bool
    worst: tuple  # (state, action) attaining the minimum

    def __float__(self):
        return self.value


def compute_d_min(mdp):
    """Identifiability margin: min over (s, a) of max_o min_{a' != a} [O(s,a,o) - O(s,a',o)]."""
    O = mdp.outcome_fn
    S, n, m = O.shape
    if n > m:
        raise ValueError(f"d_min needs |A| <= |O|, got {n} actions and {m} outcomes")
    if n == 1:
        return DMin(np.inf, False, (0, 0))
    best, worst = np.inf, (0, 0)
    for s in range(S):
        for a in range(n):
            diff = O[s, a][None, :] - np.delete(O[s], a, axis=0)
            margin = diff.min(axis=0).max()
            if margin < best:
                best, worst = float(margin), (s, a)
    return DMin(best, best <= 0.0, worst)


def nudge_schedule(epsilons, gamma, horizon=None):
    """Per-timestep nudges xi_t = 2 E_t with E_t = eps_t + gamma E_{t+1}, E_{T+1} = 0."""
    eps = np.asarray(epsilons, dtype=float)
    if horizon is not None and len(eps) != horizon + 1:
        raise ValueError(f"expected {horizon + 1} tolerances, got {len(eps)}")
    E = np.zeros_like(eps)
    acc = 0.0
    for t in range(len(eps) - 1, -1, -1):
        acc = eps[t] + gamma * acc
        E[t] = acc
    return 2.0 * E


@dataclass(frozen=True)
class ErrorBounds:
    D0: float
    E0: float
    utility_gap: float


def error_bounds(deltas, epsilons, gamma, d_min):
    """Approximation bound for principal utility from per-step value errors."""
    d = np.asarray(deltas, dtype=float)
    eps = np.asarray(epsilons, dtype=float)
    disc = gamma ** np.arange(len(d))
    D0 = float(disc @ d)
    E = nudge_schedule(eps, gamma) / 2.0
    E0 = float(E[0]) if len(E) else 0.0
    if d_min <= 0:
        return ErrorBounds(D0, E0, np.inf)
    disc_e = gamma ** np.arange(len(E))
    return ErrorBounds(D0, E0, 2.0 * D0 + 2.0 * float(disc_e @ E) / d_min)

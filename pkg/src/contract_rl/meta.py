"""Alternating best-response / subgame-perfect iteration and its diagnostics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exact import best_response, subgame_perfect
from .mdp import PrincipalPolicy

FLAG_TOL = 1e-9


@dataclass(frozen=True)
class MetaRecord:
    iteration: int
    principal_policy: PrincipalPolicy
    agent_q: np.ndarray
    principal_q: np.ndarray
    principal_utility: float
    agent_utility: float
    policy_changed: bool


@dataclass
class MetaTrace:
    records: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def converged_at(self):
        """First iteration whose policy equals the final one (None unless converged)."""
        if not self.converged:
            return None
        last = 0
        for r in self.records:
            if r.policy_changed:
                last = r.iteration
        return last

    def q_distances(self):
        final = self.records[-1].principal_q
        return np.array([_sup(r.principal_q, final) for r in self.records])

    def to_jsonl(self):
        dist = self.q_distances() if self.converged else [None] * len(self.records)
        lines = []
        for r, d in zip(self.records, dist):
            lines.append(json.dumps({
                "iter": r.iteration,
                "principal_utility": r.principal_utility,
                "agent_utility": r.agent_utility,
                "q_supnorm_to_final": None if d is None else float(d),
                "policy_changed": bool(r.policy_changed),
            }))
        return "\n".join(lines) + "\n"


@dataclass
class MetaResult:
    trace: MetaTrace
    principal_policy: PrincipalPolicy
    agent_policy: object
    principal_q: np.ndarray


def _sup(a, b):
    # unimplementable entries are -inf in both tables when they agree
    fa, fb = np.isfinite(a), np.isfinite(b)
    if np.any(fa != fb):
        return np.inf
    return float(np.max(np.abs(a[fa] - b[fb]), initial=0.0))


def _changed(old, new, tol):
    # an init policy without recommendations is compared on contracts only
    if np.any(old.recommended >= 0) and not np.array_equal(old.recommended, new.recommended):
        return True
    return float(np.max(np.abs(old.contracts - new.contracts), initial=0.0)) >= tol


def _inner_default(mdp, rho):
    return best_response(mdp, rho)


def _outer_default(mdp, agent):
    return subgame_perfect(mdp, agent)


def run_meta(mdp, inner=None, outer=None, init=None, max_iterations=100, stop_tolerance=1e-9, simultaneous=False):
    """Iterate pi := BR(rho), rho := SP(pi) until the principal policy stops moving.

    ``inner(mdp, rho) -> AgentPolicy`` and ``outer(mdp, agent) -> PrincipalSolution``
    are swappable. With ``simultaneous`` both sides update from the previous
    iteration's policies.
    """
    inner = inner or _inner_default
    outer = outer or _outer_default
    rho = init.copy() if init is not None else PrincipalPolicy.zero(mdp)
    if rho.contracts.shape != (mdp.n_states, mdp.n_outcomes):
        raise ValueError(f"init policy has shape {rho.contracts.shape}, expected {(mdp.n_states, mdp.n_outcomes)}")
    trace = MetaTrace()
    agent = inner(mdp, rho)
    sol = None
    s0 = mdp.initial_state
    for it in range(1, max_iterations + 1):
        if simultaneous:
            sol = outer(mdp, agent)
            prev_q = agent.truncated_q
            agent = inner(mdp, rho)
        else:
            if it > 1:
                agent = inner(mdp, rho)
            sol = outer(mdp, agent)
        new = sol.policy
        changed = _changed(rho, new, stop_tolerance)
        if simultaneous:
            # the agent lags one step behind; stop only once it has caught up too
            changed = changed or _sup(agent.truncated_q, prev_q) > stop_tolerance
        b0 = new.contracts[s0]
        trace.records.append(MetaRecord(
            iteration=it,
            principal_policy=new.copy(),
            agent_q=agent.truncated_q.copy(),
            principal_q=sol.q.copy(),
            principal_utility=float(np.max(sol.q[s0])),
            agent_utility=float(np.max(mdp.outcome_fn[s0] @ b0 + agent.truncated_q[s0])),
            policy_changed=changed,
        ))
        rho = new
        if not changed:
            trace.converged = True
            break
    return MetaResult(trace, rho, agent, sol.q)


def detect_cycle(trace, max_period=8, tol=1e-6):
    """Smallest period p such that the last 2p snapshots repeat with period p, else None."""
    recs = trace.records
    for p in range(1, max_period + 1):
        if len(recs) < 2 * p:
            break
        tail = recs[-2 * p:]
        if all(_same(tail[i].principal_policy, tail[i + p].principal_policy, tol) for i in range(p)):
            return p
    return None


def _same(a, b, tol):
    return np.array_equal(a.recommended, b.recommended) and np.max(np.abs(a.contracts - b.contracts)) < tol


@dataclass
class ContractionReport:
    distances: np.ndarray
    flags: list  # iterations where the distance grew by more than FLAG_TOL

    @property
    def monotone(self):
        return not self.flags


def contraction_report(trace, tol=FLAG_TOL):
    if not trace.converged:
        raise ValueError("contraction is measured against a converged trace")
    d = trace.q_distances()
    flags = [int(trace.records[i].iteration) for i in range(1, len(d)) if d[i] > d[i - 1] + tol]
    return ContractionReport(d, flags)

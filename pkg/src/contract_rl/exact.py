"""Exact solvers: agent best response, subgame-perfect principal, backward induction."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lp import _nudge_per_state, contract_table, minimal_contract
from .mdp import TIE_TOL, AgentPolicy, MalformedModelError, PrincipalPolicy


class UnsupportedHorizonError(ValueError):
    pass


MAX_SWEEPS = 10_000
SWEEP_TOL = 1e-10


def _expected_next(mdp, V, idx=slice(None)):
    """E_{o ~ O(s,a), s' ~ T(s,o)} V(s') for the states in ``idx``: [len(idx), n]."""
    nxt = mdp.transition_fn[idx] @ V  # [k, m]
    return np.einsum("sao,so->sa", mdp.outcome_fn[idx], nxt)


def payments(mdp, rho):
    """Expected payment per (state, action) under ``rho``."""
    return np.einsum("sao,so->sa", mdp.outcome_fn, rho.contracts)


def argmax_tol(row, mask=None, tol=TIE_TOL):
    """Lowest index whose value is within ``tol`` of the (masked) maximum."""
    r = np.where(mask, row, -np.inf) if mask is not None else row
    best = r.max()
    if not np.isfinite(best):
        return -1
    return int(np.flatnonzero(r >= best - tol)[0])


# -- operators ---------------------------------------------------------------

def truncated_bellman(mdp, rho, qbar):
    """One application of the truncated Bellman optimality operator."""
    V = (payments(mdp, rho) + qbar).max(axis=1)
    return mdp.agent_reward + mdp.gamma * _expected_next(mdp, V)


def contractual_bellman(mdp, agent, q, nudge=0.0):
    """One application of the contractual Bellman optimality operator against ``agent``."""
    B, ok = contract_table(mdp, agent.truncated_q, nudge)
    imm = np.einsum("sao,sao->sa", mdp.outcome_fn, mdp.principal_reward[:, None, :] - B)
    V = np.where(ok, q, -np.inf).max(axis=1)
    out = imm + mdp.gamma * _expected_next(mdp, V)
    return np.where(ok, out, -np.inf)


# -- agent side --------------------------------------------------------------

def best_response(mdp, rho, max_sweeps=MAX_SWEEPS, tol=SWEEP_TOL):
    """Truncated optimal Q of the agent against a fixed principal policy."""
    pay = payments(mdp, rho)
    S, n = mdp.agent_reward.shape
    Q = np.zeros((S, n))
    if mdp.finite:
        V = np.zeros(S)
        for lvl in reversed(mdp.levels()):
            Q[lvl] = mdp.agent_reward[lvl] + mdp.gamma * _expected_next(mdp, V, lvl)
            V[lvl] = (pay[lvl] + Q[lvl]).max(axis=1)
    else:
        for _ in range(max_sweeps):
            V = (pay + Q).max(axis=1)
            Qn = mdp.agent_reward + mdp.gamma * _expected_next(mdp, V)
            done = np.max(np.abs(Qn - Q)) < tol
            Q = Qn
            if done:
                break
    return AgentPolicy(Q, mdp.outcome_fn)


# -- principal side ----------------------------------------------------------

@dataclass
class PrincipalSolution:
    policy: PrincipalPolicy
    q: np.ndarray          # [S, n], -inf where unimplementable
    contracts: np.ndarray  # [S, n, m] minimal contract per recommendation
    feasible: np.ndarray   # [S, n]


def _choose(mdp, q, B, ok, states):
    rec = np.full(mdp.n_states, -1, dtype=np.int64)
    rho = np.zeros((mdp.n_states, mdp.n_outcomes))
    for s in states:
        a = argmax_tol(q[s], ok[s])
        if a < 0:
            raise MalformedModelError(f"state {s}: no implementable recommendation")
        rec[s] = a
        rho[s] = B[s, a]
    return rec, rho


def subgame_perfect(mdp, agent, nudge=0.0, max_sweeps=MAX_SWEEPS, tol=SWEEP_TOL):
    """Optimal principal policy against a fixed truncated-Q agent."""
    B, ok = contract_table(mdp, agent.truncated_q, nudge)
    imm = np.einsum("sao,sao->sa", mdp.outcome_fn, mdp.principal_reward[:, None, :] - B)
    S, n = imm.shape
    q = np.zeros((S, n))
    if mdp.finite:
        V = np.zeros(S)
        for lvl in reversed(mdp.levels()):
            q[lvl] = imm[lvl] + mdp.gamma * _expected_next(mdp, V, lvl)
            V[lvl] = np.where(ok[lvl], q[lvl], -np.inf).max(axis=1)
    else:
        for _ in range(max_sweeps):
            V = np.where(ok, q, -np.inf).max(axis=1)
            qn = imm + mdp.gamma * _expected_next(mdp, V)
            done = np.max(np.abs(qn - q)) < tol
            q = qn
            if done:
                break
    if np.any(~ok.any(axis=1)):
        bad = int(np.flatnonzero(~ok.any(axis=1))[0])
        raise MalformedModelError(f"state {bad}: no implementable recommendation")
    q = np.where(ok, q, -np.inf)
    rec, rho = _choose(mdp, q, B, ok, range(S))
    return PrincipalSolution(PrincipalPolicy(rho, rec), q, B, ok)


# -- backward induction ------------------------------------------------------

@dataclass
class SPESolution:
    principal_policy: PrincipalPolicy
    agent_policy: AgentPolicy
    principal_q: np.ndarray
    agent_truncated_q: np.ndarray
    principal_utility: float
    agent_utility: float
    contracts: np.ndarray = field(repr=False)
    feasible: np.ndarray = field(repr=False)

    def to_dict(self):
        q = np.where(np.isfinite(self.principal_q), self.principal_q, np.nan)
        return {
            "principal_utility": self.principal_utility,
            "agent_utility": self.agent_utility,
            "recommended": self.principal_policy.recommended.tolist(),
            "contracts": self.principal_policy.contracts.tolist(),
            "principal_q": [[None if np.isnan(v) else float(v) for v in row] for row in q],
            "agent_truncated_q": self.agent_truncated_q.tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def spe_backward_induction(mdp, nudge=0.0):
    """Subgame-perfect equilibrium of a finite-horizon MDP by backward induction."""
    if not mdp.finite:
        raise UnsupportedHorizonError("backward induction needs a finite horizon")
    S, n, m = mdp.outcome_fn.shape
    Qbar = np.zeros((S, n))
    q = np.full((S, n), -np.inf)
    B = np.zeros((S, n, m))
    ok = np.zeros((S, n), dtype=bool)
    rec = np.full(S, -1, dtype=np.int64)
    rho = np.zeros((S, m))
    Va = np.zeros(S)
    Vp = np.zeros(S)
    xi = _nudge_per_state(mdp, nudge)
    for lvl in reversed(mdp.levels()):
        Qbar[lvl] = mdp.agent_reward[lvl] + mdp.gamma * _expected_next(mdp, Va, lvl)
        cont_p = _expected_next(mdp, Vp, lvl)
        for i, s in enumerate(lvl):
            for a in range(n):
                sol = minimal_contract(mdp.outcome_fn[s], Qbar[s], a, xi[s])
                if sol.feasible:
                    B[s, a] = sol.contract
                    ok[s, a] = True
                    q[s, a] = mdp.outcome_fn[s, a] @ (mdp.principal_reward[s] - sol.contract) + mdp.gamma * cont_p[i, a]
            a = argmax_tol(q[s], ok[s])
            if a < 0:
                raise MalformedModelError(f"state {s}: every recommendation is unimplementable")
            rec[s] = a
            rho[s] = B[s, a]
            Vp[s] = q[s, a]
            Va[s] = np.max(mdp.outcome_fn[s] @ rho[s] + Qbar[s])
    policy = PrincipalPolicy(rho, rec)
    s0 = mdp.initial_state
    return SPESolution(policy, AgentPolicy(Qbar, mdp.outcome_fn), q, Qbar,
                       float(Vp[s0]), float(Va[s0]), B, ok)


# -- evaluation --------------------------------------------------------------

@dataclass
class PairValues:
    principal: np.ndarray  # per-state value
    agent: np.ndarray
    actions: np.ndarray    # action the agent takes in each state


def _decide(mdp, rho, pi, s, cont_p):
    b = rho.contracts[s]
    scores = mdp.outcome_fn[s] @ (mdp.principal_reward[s] - b) + mdp.gamma * cont_p
    return pi.act(s, b, recommended=rho.recommendation(s), principal_scores=scores)


def pair_values(mdp, rho, pi, max_sweeps=MAX_SWEEPS, tol=SWEEP_TOL):
    """Exact per-state values of (rho, pi); agent ties go the principal's way."""
    S = mdp.n_states
    Vp, Va = np.zeros(S), np.zeros(S)
    acts = np.zeros(S, dtype=np.int64)
    pay = payments(mdp, rho)
    rp = np.einsum("sao,sao->sa", mdp.outcome_fn, mdp.principal_reward[:, None, :] - rho.contracts[:, None, :])

    def sweep(states):
        cp = _expected_next(mdp, Vp, states)
        ca = _expected_next(mdp, Va, states)
        newp, newa = np.empty(len(states)), np.empty(len(states))
        for i, s in enumerate(states):
            a = _decide(mdp, rho, pi, s, cp[i])
            acts[s] = a
            newp[i] = rp[s, a] + mdp.gamma * cp[i, a]
            newa[i] = mdp.agent_reward[s, a] + pay[s, a] + mdp.gamma * ca[i, a]
        return newp, newa

    if mdp.finite:
        for lvl in reversed(mdp.levels()):
            Vp[lvl], Va[lvl] = sweep(lvl)
    else:
        allst = np.arange(S)
        for _ in range(max_sweeps):
            p, a = sweep(allst)
            delta = max(np.max(np.abs(p - Vp)), np.max(np.abs(a - Va)))
            Vp[:], Va[:] = p, a
            if delta < tol:
                break
    return PairValues(Vp, Va, acts)


def evaluate_pair(mdp, rho, pi):
    """(principal value, agent value) at the initial state."""
    v = pair_values(mdp, rho, pi)
    s0 = mdp.initial_state
    return float(v.principal[s0]), float(v.agent[s0])


# -- equilibrium probe -------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str   # principal | agent | uniqueness
    state: int
    action: int
    gain: float


@dataclass
class ProbeReport:
    violations: list

    @property
    def ok(self):
        return not self.violations

    def states(self, kind=None):
        return sorted({v.state for v in self.violations if kind is None or v.kind == kind})


def spe_probe(mdp, solution, agent=None, states=None, tol=1e-7, check_uniqueness=True):
    """Look for profitable one-state deviations of either player."""
    if not mdp.finite:
        raise UnsupportedHorizonError("the probe needs a finite horizon")
    if isinstance(solution, SPESolution):
        rho, agent = solution.principal_policy, agent or solution.agent_policy
    else:
        rho = solution
    if agent is None:
        agent = best_response(mdp, rho)
    vals = pair_values(mdp, rho, agent)
    pay = payments(mdp, rho)
    states = range(mdp.n_states) if states is None else states
    out = []
    for s in states:
        cp = _expected_next(mdp, vals.principal, [s])[0]
        for a in range(mdp.n_actions):
            sol = minimal_contract(mdp.outcome_fn[s], agent.truncated_q[s], a)
            if not sol.feasible:
                continue
            dev = mdp.outcome_fn[s, a] @ (mdp.principal_reward[s] - sol.contract) + mdp.gamma * cp[a]
            if dev > vals.principal[s] + tol:
                out.append(Violation("principal", int(s), a, float(dev - vals.principal[s])))
        ca = _expected_next(mdp, vals.agent, [s])[0]
        dev_a = mdp.agent_reward[s] + pay[s] + mdp.gamma * ca
        a = int(np.argmax(dev_a))
        if dev_a[a] > vals.agent[s] + tol:
            out.append(Violation("agent", int(s), a, float(dev_a[a] - vals.agent[s])))
    if check_uniqueness:
        out.extend(_uniqueness(mdp, vals, tol))
    return ProbeReport(out)


def _uniqueness(mdp, vals, tol):
    from .mdp import _replace
    from .meta import run_meta

    s0 = mdp.initial_state
    here = (vals.principal[s0], vals.agent[s0])
    perm = np.arange(mdp.n_actions)[::-1]
    flipped = _replace(mdp, outcome_fn=mdp.outcome_fn[:, perm, :], agent_reward=mdp.agent_reward[:, perm],
                       action_names=tuple(mdp.action_names[i] for i in perm))
    alt = spe_backward_induction(flipped)
    rng = np.random.default_rng(12345)
    init = PrincipalPolicy(rng.uniform(0, 1, size=(mdp.n_states, mdp.n_outcomes)))
    res = run_meta(mdp, init=init, max_iterations=(mdp.horizon or 1) + 2)
    pv, av = evaluate_pair(mdp, res.principal_policy, res.agent_policy)
    out = []
    for p, a in ((alt.principal_utility, alt.agent_utility), (pv, av)):
        gap = max(abs(p - here[0]), abs(a - here[1]))
        if gap > tol:
            out.append(Violation("uniqueness", s0, -1, float(gap)))
    return out

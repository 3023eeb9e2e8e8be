"""Hidden-action principal-agent MDPs and the policies that act on them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN = "hidden-action"
OBSERVED = "observed-action"
VARIANTS = (HIDDEN, OBSERVED)

TIE_TOL = 1e-9
INVARIANT_TOL = 1e-12
LOAD_TOL = 1e-9


class MalformedModelError(ValueError):
    pass


def _frozen(x, dtype=float):
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PrincipalAgentMDP:
    """Tabular hidden-action MDP.

    outcome_fn[s, a, o], transition_fn[s, o, s'], agent_reward[s, a],
    principal_reward[s, o]. An all-zero transition row ends the episode.
    ``horizon`` counts decision steps; ``None`` means infinite horizon.
    """

    outcome_fn: np.ndarray
    transition_fn: np.ndarray
    agent_reward: np.ndarray
    principal_reward: np.ndarray
    gamma: float
    horizon: int | None = None
    timestep: np.ndarray | None = None
    initial_state: int = 0
    variant: str = HIDDEN
    state_names: tuple = ()
    action_names: tuple = ()
    outcome_names: tuple = ()

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "outcome_fn", _frozen(self.outcome_fn))
        set_(self, "transition_fn", _frozen(self.transition_fn))
        set_(self, "agent_reward", _frozen(self.agent_reward))
        set_(self, "principal_reward", _frozen(self.principal_reward))
        set_(self, "gamma", float(self.gamma))
        S, n, m = self.outcome_fn.shape
        if self.timestep is None:
            ts = _infer_timesteps(self.transition_fn, self.initial_state) if self.horizon else np.zeros(S, int)
        else:
            ts = self.timestep
        set_(self, "timestep", _frozen(ts, dtype=np.int64))
        if not self.state_names:
            set_(self, "state_names", tuple(f"s{i}" for i in range(S)))
        if not self.action_names:
            set_(self, "action_names", tuple(f"a{i}" for i in range(n)))
        if not self.outcome_names:
            set_(self, "outcome_names", tuple(f"o{i}" for i in range(m)))

    @property
    def n_states(self):
        return self.outcome_fn.shape[0]

    @property
    def n_actions(self):
        return self.outcome_fn.shape[1]

    @property
    def n_outcomes(self):
        return self.outcome_fn.shape[2]

    @property
    def finite(self):
        return self.horizon is not None

    @property
    def terminal(self):
        """Per (state, outcome): True when the episode ends after it."""
        return self.transition_fn.sum(axis=2) < 0.5

    def levels(self):
        """State indices grouped by timestep, earliest first."""
        return [np.flatnonzero(self.timestep == t) for t in range(int(self.timestep.max()) + 1)]

    def with_gamma(self, gamma):
        return _replace(self, gamma=gamma)

    def to_dict(self):
        return {
            "states": list(self.state_names),
            "initial": int(self.initial_state),
            "actions": list(self.action_names),
            "outcomes": list(self.outcome_names),
            "outcome_fn": self.outcome_fn.tolist(),
            "transition_fn": self.transition_fn.tolist(),
            "agent_reward": self.agent_reward.tolist(),
            "principal_reward": self.principal_reward.tolist(),
            "gamma": self.gamma,
            "horizon": self.horizon,
            "timesteps": self.timestep.tolist(),
            "variant": self.variant,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text


def _replace(mdp, **changes):
    kw = dict(
        outcome_fn=mdp.outcome_fn, transition_fn=mdp.transition_fn,
        agent_reward=mdp.agent_reward, principal_reward=mdp.principal_reward,
        gamma=mdp.gamma, horizon=mdp.horizon, timestep=mdp.timestep,
        initial_state=mdp.initial_state, variant=mdp.variant,
        state_names=mdp.state_names, action_names=mdp.action_names,
        outcome_names=mdp.outcome_names,
    )
    kw.update(changes)
    return PrincipalAgentMDP(**kw)


def _infer_timesteps(T, s0):
    # breadth-first depth from the initial state
    S = T.shape[0]
    ts = np.full(S, -1, dtype=np.int64)
    ts[s0] = 0
    frontier = [s0]
    while frontier:
        nxt = []
        for s in frontier:
            for s2 in np.flatnonzero(T[s].max(axis=0) > 0):
                if ts[s2] < 0:
                    ts[s2] = ts[s] + 1
                    nxt.append(int(s2))
        frontier = nxt
    ts[ts < 0] = 0
    return ts


def validate(mdp, tol=INVARIANT_TOL):
    """List every invariant violation; empty means the model is well formed."""
    out = []
    O, T = mdp.outcome_fn, mdp.transition_fn
    if O.ndim != 3:
        return [f"outcome_fn: expected 3 dims, got {O.ndim}"]
    S, n, m = O.shape
    if T.shape != (S, m, S):
        out.append(f"transition_fn: shape {T.shape} != {(S, m, S)}")
    if mdp.agent_reward.shape != (S, n):
        out.append(f"agent_reward: shape {mdp.agent_reward.shape} != {(S, n)}")
    if mdp.principal_reward.shape != (S, m):
        out.append(f"principal_reward: shape {mdp.principal_reward.shape} != {(S, m)}")
    if out:
        return out
    if not 0.0 <= mdp.gamma <= 1.0:
        out.append(f"gamma: {mdp.gamma} outside [0, 1]")
    if mdp.variant not in VARIANTS:
        out.append(f"variant: unknown {mdp.variant!r}")
    if not 0 <= mdp.initial_state < S:
        out.append(f"initial: {mdp.initial_state} out of range")
    for s, a in zip(*np.nonzero(np.any(O < -tol, axis=2))):
        out.append(f"outcome_fn[s={s}][a={a}]: negative entry")
    sums = O.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > tol)):
        out.append(f"outcome_fn[s={s}][a={a}]: row sum {sums[s, a]:.12g}")
    for s, o in zip(*np.nonzero(np.any(T < -tol, axis=2))):
        out.append(f"transition_fn[s={s}][o={o}]: negative entry")
    tsums = T.sum(axis=2)
    bad = (np.abs(tsums - 1.0) > tol) & (np.abs(tsums) > tol)
    if not mdp.finite:
        bad |= np.abs(tsums) <= tol
    for s, o in zip(*np.nonzero(bad)):
        out.append(f"transition_fn[s={s}][o={o}]: row sum {tsums[s, o]:.12g}")
    if mdp.finite:
        out.extend(_check_timesteps(mdp, tol))
    if mdp.variant == OBSERVED:
        if n != m:
            out.append(f"variant mismatch: observed-action needs |A| == |O|, got {n} and {m}")
        else:
            eye = np.broadcast_to(np.eye(n), O.shape)
            for s in np.flatnonzero(np.any(np.abs(O - eye) > tol, axis=(1, 2))):
                out.append(f"variant mismatch: outcome_fn[s={s}] is not the identity")
    return out


def _check_timesteps(mdp, tol):
    out = []
    ts, H = mdp.timestep, mdp.horizon
    if H < 1:
        return [f"horizon: {H} must be positive"]
    if ts[mdp.initial_state] != 0:
        out.append("timesteps: initial state must be at step 0")
    for s in np.flatnonzero((ts < 0) | (ts >= H)):
        out.append(f"timesteps[s={s}]: {ts[s]} outside [0, {H})")
    reach = mdp.transition_fn.max(axis=1) > tol
    for s, s2 in zip(*np.nonzero(reach)):
        if ts[s2] != ts[s] + 1:
            out.append(f"transition_fn[s={s}] -> s'={s2}: timestep {ts[s]} -> {ts[s2]}")
    last = np.flatnonzero(ts == H - 1)
    for s in last:
        if reach[s].any():
            out.append(f"transition_fn[s={s}]: state at final step must be terminal")
    return out


def check(mdp, tol=INVARIANT_TOL):
    errs = validate(mdp, tol)
    if errs:
        raise MalformedModelError("; ".join(errs))
    return mdp


def from_dict(d, tol=LOAD_TOL):
    required = ("outcome_fn", "transition_fn", "agent_reward", "principal_reward", "gamma")
    missing = [k for k in required if k not in d]
    if missing:
        raise MalformedModelError(f"missing fields: {', '.join(missing)}")
    horizon = d.get("horizon")
    if isinstance(horizon, str) and horizon.lower() in ("inf", "infinite"):
        horizon = None
    try:
        mdp = PrincipalAgentMDP(
            outcome_fn=d["outcome_fn"],
            transition_fn=d["transition_fn"],
            agent_reward=d["agent_reward"],
            principal_reward=d["principal_reward"],
            gamma=d["gamma"],
            horizon=None if horizon is None else int(horizon),
            timestep=d.get("timesteps"),
            initial_state=int(d.get("initial", 0)),
            variant=d.get("variant", HIDDEN),
            state_names=tuple(d.get("states") or ()),
            action_names=tuple(d.get("actions") or ()),
            outcome_names=tuple(d.get("outcomes") or ()),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedModelError(str(exc)) from exc
    return check(mdp, tol)


def from_json(path_or_text, tol=LOAD_TOL):
    text = str(path_or_text)
    if not text.lstrip().startswith("{"):
        text = Path(path_or_text).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModelError(f"invalid JSON: {exc}") from exc
    return from_dict(d, tol)


# -- contracts and policies --------------------------------------------------

def as_contract(payments, n_outcomes=None):
    """Validated, read-only payment vector (one entry per outcome)."""
    b = np.array(payments, dtype=float).reshape(-1)
    if n_outcomes is not None and b.shape[0] != n_outcomes:
        raise ValueError(f"contract has {b.shape[0]} entries, expected {n_outcomes}")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ValueError(f"contract payments must be finite and non-negative: {b}")
    b.setflags(write=False)
    return b


def expected_payment(contract, outcome_dist):
    b = np.asarray(contract, dtype=float)
    p = np.asarray(outcome_dist, dtype=float)
    if b.shape != p.shape:
        raise ValueError(f"dimension mismatch: contract {b.shape} vs distribution {p.shape}")
    return float(b @ p)


@dataclass(eq=False)
class PrincipalPolicy:
    """Deterministic contract per state, optionally with a recommended action (-1 = none)."""

    contracts: np.ndarray
    recommended: np.ndarray | None = None

    def __post_init__(self):
        self.contracts = np.array(self.contracts, dtype=float)
        if self.contracts.ndim != 2:
            raise ValueError("contracts must be [states, outcomes]")
        if np.any(self.contracts < 0):
            raise ValueError("contract payments must be non-negative")
        S = self.contracts.shape[0]
        rec = np.full(S, -1) if self.recommended is None else self.recommended
        self.recommended = np.array(rec, dtype=np.int64)

    @classmethod
    def zero(cls, mdp):
        return cls(np.zeros((mdp.n_states, mdp.n_outcomes)))

    def contract(self, s):
        return self.contracts[s]

    def recommendation(self, s):
        r = int(self.recommended[s])
        return None if r < 0 else r

    def copy(self):
        return PrincipalPolicy(self.contracts.copy(), self.recommended.copy())

    def same_as(self, other, tol=1e-9):
        return (np.array_equal(self.recommended, other.recommended)
                and float(np.max(np.abs(self.contracts - other.contracts), initial=0.0)) < tol)


@dataclass(eq=False)
class AgentPolicy:
    """Myopic-in-payment best response built from a truncated Q table.

    The agent picks argmax_a [O(s,a).b + Qbar(s,a)]; ties within ``tie_tol``
    go to the recommended action, then to the principal's preference, then
    to the lowest index.
    """

    truncated_q: np.ndarray
    outcome_fn: np.ndarray
    tie_tol: float = TIE_TOL

    def __post_init__(self):
        self.truncated_q = np.asarray(self.truncated_q, dtype=float)

    def values(self, s, b):
        return self.outcome_fn[s] @ np.asarray(b, dtype=float) + self.truncated_q[s]

    def tied(self, s, b):
        v = self.values(s, b)
        return np.flatnonzero(v >= v.max() - self.tie_tol)

    def act(self, s, b, recommended=None, principal_scores=None):
        tied = self.tied(s, b)
        if recommended is not None and recommended >= 0 and recommended in tied:
            return int(recommended)
        if principal_scores is not None and len(tied) > 1:
            sc = np.asarray(principal_scores, dtype=float)[tied]
            return int(tied[np.flatnonzero(sc >= sc.max() - self.tie_tol)[0]])
        return int(tied[0])


# -- induced single-agent views ------------------------------------------------

def _sample(p, rng):
    return int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right").clip(0, len(p) - 1))


@dataclass
class _View:
    mdp: PrincipalAgentMDP
    max_steps: int | None = None
    state: int = field(default=-1, init=False)
    steps: int = field(default=0, init=False)

    def reset(self, rng):
        self.state = self.mdp.initial_state
        self.steps = 0
        return self._obs()

    def _advance(self, o, rng):
        row = self.mdp.transition_fn[self.state, o]
        self.steps += 1
        if row.sum() < 0.5:
            self.state = -1
            return True, False
        self.state = _sample(row, rng)
        limit = self.max_steps if self.max_steps is not None else self.mdp.horizon
        return False, limit is not None and self.steps >= limit


@dataclass
class AgentMDPView(_View):
    """The agent's MDP for a fixed principal policy; observations are (s, b)."""

    principal: PrincipalPolicy | None = None

    def _obs(self):
        if self.state < 0:
            return None
        return self.state, self.principal.contract(self.state)

    def step(self, action, rng):
        s = self.state
        b = self.principal.contract(s)
        o = _sample(self.mdp.outcome_fn[s, action], rng)
        reward = self.mdp.agent_reward[s, action] + b[o]
        done, truncated = self._advance(o, rng)
        return self._obs(), float(reward), done, {"outcome": o, "truncated": truncated}


@dataclass
class PrincipalMDPView(_View):
    """The principal's MDP for a fixed agent policy; actions are contracts."""

    agent: AgentPolicy | None = None
    continuation: np.ndarray | None = None  # optional [S, n] principal scores for tie-breaks

    def _obs(self):
        return None if self.state < 0 else self.state

    def response(self, b):
        s = self.state
        O = self.mdp.outcome_fn[s]
        scores = O @ (self.mdp.principal_reward[s] - b)
        if self.continuation is not None:
            scores = scores + self.continuation[s]
        return self.agent.act(s, b, principal_scores=scores)

    def expected_reward(self, b):
        b = as_contract(b, self.mdp.n_outcomes)
        a = self.response(b)
        return float(self.mdp.outcome_fn[self.state, a] @ (self.mdp.principal_reward[self.state] - b))

    def step(self, contract, rng):
        b = as_contract(contract, self.mdp.n_outcomes)
        s = self.state
        a = self.response(b)
        o = _sample(self.mdp.outcome_fn[s, a], rng)
        reward = self.mdp.principal_reward[s, o] - b[o]
        done, truncated = self._advance(o, rng)
        return self._obs(), float(reward), done, {"action": a, "outcome": o, "truncated": truncated}

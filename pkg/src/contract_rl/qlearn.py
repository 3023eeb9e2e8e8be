"""Tabular Q-learning for the agent (truncated Q) and the principal (contractual q)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import jit
from ._simplex import OPTIMAL, implementation_lp
from .lp import FEAS_TOL, contract_table

LR_SHAPES = {"constant": 0, "linear": 1, "exponential": 2}


@dataclass(frozen=True)
class LearningConfig:
    updates: int = 200_000
    batch_size: int = 32
    interactions_per_update: int = 1
    lr_initial: float = 0.1
    lr_final: float = 1e-3
    lr_decay: str = "exponential"
    eps_initial: float = 1.0
    eps_final: float = 0.0
    gamma: float | None = None  # None: use the MDP's discount
    seed: int = 0
    target_every: int = 100
    buffer_size: int = 10_000
    nudge: float = 0.0
    max_episode_steps: int = 100  # only used for infinite-horizon models
    eval_every: int = 10_000

    def __post_init__(self):
        for name in ("lr_initial", "lr_final", "eps_initial", "eps_final"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.lr_final > self.lr_initial or self.eps_final > self.eps_initial:
            raise ValueError("schedules must be non-increasing")
        if self.lr_decay not in LR_SHAPES:
            raise ValueError(f"lr_decay must be one of {sorted(LR_SHAPES)}")
        if self.lr_decay == "exponential" and self.lr_final <= 0:
            raise ValueError("exponential decay needs lr_final > 0")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if min(self.updates, self.batch_size, self.interactions_per_update, self.target_every,
               self.buffer_size, self.max_episode_steps, self.eval_every) < 1:
            raise ValueError("counts must be positive")
        if self.nudge < 0:
            raise ValueError("nudge must be non-negative")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class QTable:
    values: np.ndarray
    visits: np.ndarray
    flagged: np.ndarray | None = None  # cells skipped as unimplementable

    @classmethod
    def zeros(cls, S, n):
        return cls(np.zeros((S, n)), np.zeros((S, n), dtype=np.int64), np.zeros((S, n), dtype=np.bool_))

    def greedy(self):
        return np.argmax(self.values, axis=1)


# -- compiled model ----------------------------------------------------------

@dataclass
class CompiledMDP:
    """Flat arrays the kernels sample from. Successors are stored sparsely."""

    O: np.ndarray
    O_cdf: np.ndarray
    succ: np.ndarray       # [S, m, K] successor ids
    succ_cdf: np.ndarray   # [S, m, K]
    terminal: np.ndarray   # [S, m]
    r: np.ndarray
    rp: np.ndarray
    gamma: float
    s0: int
    max_steps: int


def compile_mdp(mdp, gamma=None, max_steps=100):
    T = mdp.transition_fn
    S, m = T.shape[:2]
    K = max(1, int((T > 0).sum(axis=2).max()))
    succ = np.zeros((S, m, K), dtype=np.int64)
    cdf = np.ones((S, m, K))
    for s in range(S):
        for o in range(m):
            nz = np.flatnonzero(T[s, o] > 0)
            if nz.size:
                succ[s, o, :nz.size] = nz
                succ[s, o, nz.size:] = nz[-1]
                c = np.cumsum(T[s, o, nz])
                cdf[s, o, :nz.size] = c / c[-1]
    return CompiledMDP(
        O=np.ascontiguousarray(mdp.outcome_fn),
        O_cdf=np.cumsum(mdp.outcome_fn, axis=2),
        succ=succ, succ_cdf=cdf, terminal=np.ascontiguousarray(mdp.terminal),
        r=np.ascontiguousarray(mdp.agent_reward), rp=np.ascontiguousarray(mdp.principal_reward),
        gamma=float(mdp.gamma if gamma is None else gamma), s0=int(mdp.initial_state),
        max_steps=int(mdp.horizon if mdp.finite else max_steps),
    )


# -- kernel helpers ----------------------------------------------------------

@jit
def _draw(cdf):
    u = np.random.random()
    for i in range(cdf.shape[0] - 1):
        if u < cdf[i]:
            return i
    return cdf.shape[0] - 1


@jit
def _lr(lr0, lr1, frac, shape):
    if shape == 0:
        return lr0
    if shape == 1:
        return lr0 + (lr1 - lr0) * frac
    return lr0 * (lr1 / lr0) ** frac


@jit
def _argmax(row):
    best = 0
    for i in range(1, row.shape[0]):
        if row[i] > row[best]:
            best = i
    return best


@jit
def _argmax_masked(row, mask):
    best = -1
    for i in range(row.shape[0]):
        if mask[i] and (best < 0 or row[i] > row[best]):
            best = i
    return best


@jit
def _step(O_cdf, succ, succ_cdf, terminal, s, a):
    """Sample outcome and successor; successor is -1 when the episode ends."""
    o = _draw(O_cdf[s, a])
    if terminal[s, o]:
        return o, -1
    return o, succ[s, o, _draw(succ_cdf[s, o])]


# -- agent -------------------------------------------------------------------

@jit
def _agent_kernel(O_cdf, succ, succ_cdf, terminal, r, pay, gamma, s0, max_steps,
                  updates, lr0, lr1, shape, eps0, eps1, seed, Q, visits):
    np.random.seed(seed)
    n = Q.shape[1]
    s, t = s0, 0
    for k in range(updates):
        frac = k / updates
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        if np.random.random() < eps:
            a = np.random.randint(n)
        else:
            a = _argmax(pay[s] + Q[s])
        o, s2 = _step(O_cdf, succ, succ_cdf, terminal, s, a)
        target = r[s, a]
        if s2 >= 0:
            target += gamma * np.max(pay[s2] + Q[s2])
        Q[s, a] += lr * (target - Q[s, a])
        visits[s, a] += 1
        t += 1
        if s2 < 0 or t >= max_steps:
            s, t = s0, 0
        else:
            s = s2


def train_agent_q(mdp, rho, config, outcome_fn=None):
    """Q-learning of the agent's truncated Q against a fixed principal policy.

    The target bootstraps on the next state's contract: r(s,a) + gamma *
    max_a' [E_o' rho(s')(o') + Qbar(s', a')]. ``outcome_fn`` overrides the
    distribution used for expected payments (e.g. an estimate).
    """
    cm = compile_mdp(mdp, config.gamma, config.max_episode_steps)
    O = cm.O if outcome_fn is None else np.asarray(outcome_fn, dtype=float)
    pay = np.einsum("sao,so->sa", O, rho.contracts)
    table = QTable.zeros(mdp.n_states, mdp.n_actions)
    _agent_kernel(cm.O_cdf, cm.succ, cm.succ_cdf, cm.terminal, cm.r, pay, cm.gamma, cm.s0, cm.max_steps,
                  config.updates, config.lr_initial, config.lr_final, LR_SHAPES[config.lr_decay],
                  config.eps_initial, config.eps_final, config.seed, table.values, table.visits)
    return table


# -- principal ---------------------------------------------------------------

@jit
def _principal_kernel(O_cdf, succ, succ_cdf, terminal, rp, B, ok, gamma, s0, max_steps,
                      updates, lr0, lr1, shape, eps0, eps1, seed, q, visits, flagged):
    np.random.seed(seed)
    n = q.shape[1]
    s, t = s0, 0
    for k in range(updates):
        frac = k / updates
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        if np.random.random() < eps:
            a = np.random.randint(n)
        else:
            a = _argmax_masked(q[s], ok[s])
        if not ok[s, a]:
            flagged[s, a] = True
            continue
        o, s2 = _step(O_cdf, succ, succ_cdf, terminal, s, a)
        target = rp[s, o] - B[s, a, o]
        if s2 >= 0:
            target += gamma * q[s2, _argmax_masked(q[s2], ok[s2])]
        q[s, a] += lr * (target - q[s, a])
        visits[s, a] += 1
        t += 1
        if s2 < 0 or t >= max_steps:
            s, t = s0, 0
        else:
            s = s2


def train_principal_q(mdp, agent_q, config, outcome_fn=None):
    """Q-learning of the principal's contractual q against a fixed agent (QTable, AgentPolicy or array)."""
    cm = compile_mdp(mdp, config.gamma, config.max_episode_steps)
    if isinstance(agent_q, QTable):
        qbar = agent_q.values
    else:
        qbar = np.asarray(getattr(agent_q, "truncated_q", agent_q), dtype=float)
    view = mdp if outcome_fn is None else _with_outcomes(mdp, outcome_fn)
    B, ok = contract_table(view, qbar, config.nudge)
    table = QTable.zeros(mdp.n_states, mdp.n_actions)
    _principal_kernel(cm.O_cdf, cm.succ, cm.succ_cdf, cm.terminal, cm.rp, B, ok, cm.gamma, cm.s0, cm.max_steps,
                      config.updates, config.lr_initial, config.lr_final, LR_SHAPES[config.lr_decay],
                      config.eps_initial, config.eps_final, config.seed, table.values, table.visits, table.flagged)
    return table


def _with_outcomes(mdp, O):
    from .mdp import _replace
    return _replace(mdp, outcome_fn=O)


# -- simultaneous training ---------------------------------------------------

@dataclass
class _Buffer:
    s: np.ndarray
    a: np.ndarray
    ra: np.ndarray
    rp: np.ndarray
    o: np.ndarray
    s2: np.ndarray  # -1 when done
    meta: np.ndarray  # [ptr, count]

    @classmethod
    def empty(cls, size):
        i = lambda: np.zeros(size, dtype=np.int64)  # noqa: E731
        f = lambda: np.zeros(size)  # noqa: E731
        return cls(i(), i(), f(), f(), i(), i(), np.zeros(2, dtype=np.int64))


@jit
def _contract(O, qbar, s, a, nudge, out):
    status, x = implementation_lp(O[s], qbar[s], a, nudge, 1e-9)
    if status != OPTIMAL:
        return False
    for j in range(out.shape[0]):
        out[j] = x[j]
    return True


@jit
def _simultaneous_kernel(O, O_cdf, succ, succ_cdf, terminal, r, rp, gamma, s0, max_steps,
                         k_begin, k_end, total, batch, inter, lr0, lr1, shape, eps0, eps1, nudge, target_every,
                         seed, q, qt, Q, Qt, visits, buf_s, buf_a, buf_ra, buf_rp, buf_o, buf_s2, meta, env):
    np.random.seed(seed)
    n = q.shape[1]
    m = O.shape[2]
    size = buf_s.shape[0]
    b = np.zeros(m)
    b2 = np.zeros(m)
    s, t = env[0], env[1]
    for k in range(k_begin, k_end):
        frac = k / total
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        # interact: recommend, pay the LP contract, the agent follows
        for _ in range(inter):
            if np.random.random() < eps:
                a = np.random.randint(n)
            else:
                a = _argmax(q[s])
            o, s2 = _step(O_cdf, succ, succ_cdf, terminal, s, a)
            p = meta[0]
            buf_s[p] = s
            buf_a[p] = a
            buf_ra[p] = r[s, a]
            buf_rp[p] = rp[s, o]
            buf_o[p] = o
            buf_s2[p] = s2
            meta[0] = (p + 1) % size
            meta[1] = min(meta[1] + 1, size)
            visits[s, a] += 1
            t += 1
            if s2 < 0 or t >= max_steps:
                s, t = s0, 0
            else:
                s = s2
        # paired TD updates on a uniform minibatch
        cnt = meta[1]
        for _ in range(batch):
            i = np.random.randint(cnt)
            si, ai, oi, sn = buf_s[i], buf_a[i], buf_o[i], buf_s2[i]
            if not _contract(O, Q, si, ai, nudge, b):
                continue
            yp = buf_rp[i] - b[oi]
            ya = buf_ra[i]
            if sn >= 0:
                an = _argmax(q[sn])
                yp += gamma * qt[sn, an]
                if _contract(O, Q, sn, an, nudge, b2):
                    pay = 0.0
                    for j in range(m):
                        pay += O[sn, an, j] * b2[j]
                    ya += gamma * (pay + Qt[sn, an])
                else:
                    ya += gamma * Qt[sn, an]
            q[si, ai] += lr * (yp - q[si, ai])
            Q[si, ai] += lr * (ya - Q[si, ai])
        if (k + 1) % target_every == 0:
            qt[:, :] = q
            Qt[:, :] = Q
    env[0] = s
    env[1] = t


@dataclass
class SimultaneousResult:
    principal: QTable
    agent: QTable
    metrics: list = field(default_factory=list)


def train_simultaneous(mdp, config, oracle=None, on_metrics=None):
    """Interleaved principal/agent training with replay and frozen target tables.

    Every ``config.eval_every`` updates the learned principal policy is validated
    against an exactly best-responding agent (``oracle`` is a precomputed
    SPESolution; computed on demand when omitted).
    """
    from .envs.validation import learned_policy, oracle_validate
    from .exact import spe_backward_induction

    if not mdp.finite:
        raise ValueError("simultaneous training needs a finite horizon")
    cm = compile_mdp(mdp, config.gamma, config.max_episode_steps)
    S, n = mdp.n_states, mdp.n_actions
    q = QTable.zeros(S, n)
    Q = QTable.zeros(S, n)
    qt, Qt = q.values.copy(), Q.values.copy()
    buf = _Buffer.empty(config.buffer_size)
    env = np.array([cm.s0, 0], dtype=np.int64)
    spe = oracle if oracle is not None else spe_backward_induction(mdp)
    metrics = []
    done = 0
    chunk = 0
    while done < config.updates:
        nxt = min(done + config.eval_every, config.updates)
        _simultaneous_kernel(
            cm.O, cm.O_cdf, cm.succ, cm.succ_cdf, cm.terminal, cm.r, cm.rp, cm.gamma, cm.s0, cm.max_steps,
            done, nxt, config.updates, config.batch_size, config.interactions_per_update,
            config.lr_initial, config.lr_final, LR_SHAPES[config.lr_decay],
            config.eps_initial, config.eps_final, config.nudge, config.target_every,
            _chunk_seed(config.seed, chunk), q.values, qt, Q.values, Qt, q.visits,
            buf.s, buf.a, buf.ra, buf.rp, buf.o, buf.s2, buf.meta, env)
        done = nxt
        chunk += 1
        rho = learned_policy(mdp, q.values, Q.values, config.nudge)
        rec = oracle_validate(mdp, rho, learned_q=q.values, spe=spe)
        row = {"update": done, "principal_utility_oracle": rec.principal_utility,
               "agent_utility_oracle": rec.agent_utility, "accuracy": rec.accuracy}
        metrics.append(row)
        if on_metrics is not None:
            on_metrics(row)
    Q.visits[:] = q.visits
    return SimultaneousResult(q, Q, metrics)


def _chunk_seed(seed, chunk):
    return int(np.random.SeedSequence([seed, chunk]).generate_state(1)[0] % (2 ** 31))


# -- outcome model -----------------------------------------------------------

@dataclass
class OutcomeEstimate:
    probs: np.ndarray   # [S, n, m]
    unseen: np.ndarray  # [S, n]


def estimate_outcome_fn(samples, n_states, n_actions, n_outcomes):
    """Smoothed empirical outcome frequencies from (s, a, o) triples."""
    counts = np.zeros((n_states, n_actions, n_outcomes))
    arr = np.asarray(samples, dtype=np.int64).reshape(-1, 3)
    np.add.at(counts, (arr[:, 0], arr[:, 1], arr[:, 2]), 1.0)
    total = counts.sum(axis=2, keepdims=True)
    probs = (counts + 1.0 / n_outcomes) / (total + 1.0)
    return OutcomeEstimate(probs, total[..., 0] == 0)

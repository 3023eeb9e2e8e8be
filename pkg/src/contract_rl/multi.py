"""Principal with several agents: recommendations plus payments after the joint action.

Games are stored as flat tables so the learners can run as compiled kernels:
``next_state[s, j, c]`` / ``next_prob[s, j, c]`` list the successors of joint
action ``j`` in ``s`` (``-1`` ends the episode), ``rewards[s, j, i]`` is agent
``i``'s reward. Joint actions use a mixed radix with agent 0 most significant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import jit
from .qlearn import LR_SHAPES, _argmax, _chunk_seed, _draw, _lr

PROB_TOL = 1e-9
PRINCIPAL_UPDATES = {"team": 0, "vdn": 1}
FOLLOW = 1
OWN = 0
METRIC_COLUMNS = ("phase", "update", "social_welfare", "paid_proportion", "accuracy",
                  "spe_ratio", "ic_ratio", "baseline")


@dataclass(frozen=True, eq=False)
class MultiAgentGame:
    n_agents: int
    n_actions: int            # every agent has the same action count
    next_state: np.ndarray    # [S, J, K] int64
    next_prob: np.ndarray     # [S, J, K]
    rewards: np.ndarray       # [S, J, k]
    initial: np.ndarray       # [S] start distribution
    horizon: int
    gamma: float
    alpha: float = 0.1
    name: str = ""

    def __post_init__(self):
        k, n = self.n_agents, self.n_actions
        if k < 2:
            raise ValueError("a multi-agent game needs at least two agents")
        if n < 1:
            raise ValueError("agents need at least one action")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        ns = np.ascontiguousarray(self.next_state, dtype=np.int64)
        npb = np.ascontiguousarray(self.next_prob, dtype=float)
        r = np.ascontiguousarray(self.rewards, dtype=float)
        init = np.ascontiguousarray(self.initial, dtype=float)
        S = init.shape[0]
        J = n ** k
        if ns.shape[:2] != (S, J) or npb.shape != ns.shape:
            raise ValueError(f"transition tables must have shape ({S}, {J}, K)")
        if r.shape != (S, J, k):
            raise ValueError(f"rewards must have shape ({S}, {J}, {k}), got {r.shape}")
        if np.any(npb < -PROB_TOL) or np.any(np.abs(npb.sum(axis=2) - 1.0) > PROB_TOL):
            raise ValueError("successor probabilities must be a distribution per (state, joint action)")
        if np.any(ns >= S) or np.any(ns < -1):
            raise ValueError("successor ids out of range")
        if abs(init.sum() - 1.0) > PROB_TOL or np.any(init < -PROB_TOL):
            raise ValueError("initial distribution must sum to 1")
        for name, arr in (("next_state", ns), ("next_prob", npb), ("rewards", r), ("initial", init)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self):
        return self.initial.shape[0]

    @property
    def n_joint(self):
        return self.n_actions ** self.n_agents

    @property
    def n_flags(self):
        """Number of joint follow-flag settings of the other agents."""
        return 2 ** (self.n_agents - 1)

    @property
    def principal_reward(self):
        return self.rewards.sum(axis=2) / self.alpha

    def joint_index(self, actions):
        if len(actions) != self.n_agents:
            raise ValueError(f"expected {self.n_agents} actions")
        j = 0
        for a in actions:
            if not 0 <= a < self.n_actions:
                raise ValueError(f"invalid action {a}")
            j = j * self.n_actions + int(a)
        return j

    def joint_actions(self, j):
        out = []
        for _ in range(self.n_agents):
            out.append(j % self.n_actions)
            j //= self.n_actions
        return tuple(reversed(out))

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class FollowFlags:
    """Per-agent binary flags; f_i = 1 means agent i follows its recommendation."""

    flags: tuple

    def __post_init__(self):
        if any(f not in (0, 1, True, False) for f in self.flags):
            raise ValueError("follow flags are binary")

    @property
    def mask(self):
        return sum(int(f) << i for i, f in enumerate(self.flags))

    def others(self, i):
        """Table index of the flags of every agent except ``i``."""
        return int(_others(self.mask, i, len(self.flags)))


@jit
def _others(mask, i, k):
    idx = 0
    pos = 0
    for l in range(k):
        if l == i:
            continue
        if (mask >> l) & 1:
            idx |= 1 << pos
        pos += 1
    return idx


@jit
def _action_of(j, i, k, n):
    for _ in range(k - 1 - i):
        j //= n
    return j % n


@jit
def _successor(ns, cdf, s, j):
    u = np.random.random()
    K = ns.shape[2]
    for c in range(K - 1):
        if u < cdf[s, j, c]:
            return ns[s, j, c]
    return ns[s, j, K - 1]


@jit
def _payment(Qa, i, s, fo, a, floor):
    row = Qa[i, s, fo]
    best = row[0]
    for x in range(1, row.shape[0]):
        if row[x] > best:
            best = row[x]
    p = best - row[a]
    if floor and p < 0.0:
        return 0.0
    return p


def payment_rule(agent_q, state, agent, flags_others, recommended, followed, floor=True, nudge=0.0, welfare=0.0):
    """Payment to ``agent`` after the joint action: zero unless it followed.

    ``agent_q`` is the trained agent table ``[k, S, F, n]``; ``flags_others``
    indexes the other agents' follow flags. ``nudge`` adds that fraction of the
    step's social welfare.
    """
    if not followed:
        return 0.0
    return float(_payment(agent_q, agent, state, flags_others, recommended, floor)) + nudge * welfare


# -- configuration and state ----------------------------------------------------

@dataclass(frozen=True)
class MultiConfig:
    updates: int = 1_000_000
    batch_size: int = 32
    interactions_per_update: int = 1
    lr_initial: float = 0.1
    lr_final: float = 1e-3
    lr_decay: str = "exponential"
    eps_initial: float = 0.4
    eps_final: float = 0.0
    target_every: int = 100
    buffer_size: int = 10_000
    seed: int = 0
    eval_every: int = 100_000
    eval_episodes: int = 80
    nudge: float = 0.0          # fraction of step welfare added to every payment
    payment_floor: bool = True
    principal_update: str = "team"

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
        if min(self.updates, self.batch_size, self.interactions_per_update, self.target_every,
               self.buffer_size, self.eval_every, self.eval_episodes) < 1:
            raise ValueError("counts must be positive")
        if self.nudge < 0:
            raise ValueError("nudge must be non-negative")
        if self.principal_update not in PRINCIPAL_UPDATES:
            raise ValueError(f"principal_update must be one of {sorted(PRINCIPAL_UPDATES)}")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class MultiTrainState:
    principal_q: np.ndarray          # [k, S, n]
    agent_q: np.ndarray              # [k, S, F, n], conditioned on the others' flags
    principal_target: np.ndarray
    agent_target: np.ndarray
    config: MultiConfig
    metrics: list = field(default_factory=list)

    def recommendations(self):
        """Greedy recommendation per agent and state, shape [k, S]."""
        return np.argmax(self.principal_q, axis=2)


@dataclass
class _Replay:
    s: np.ndarray
    j: np.ndarray
    f: np.ndarray
    r: np.ndarray
    s2: np.ndarray
    meta: np.ndarray  # write position, fill count

    @classmethod
    def empty(cls, size, k):
        return cls(np.zeros(size, np.int64), np.zeros(size, np.int64), np.zeros(size, np.int64),
                   np.zeros((size, k)), np.zeros(size, np.int64), np.zeros(2, np.int64))


def _tables(game):
    cdf = np.cumsum(game.next_prob, axis=2)
    cdf[:, :, -1] = 1.0
    init_cdf = np.cumsum(game.initial)
    init_cdf[-1] = 1.0
    return np.ascontiguousarray(game.next_state), cdf, init_cdf, np.ascontiguousarray(game.rewards)


def _schedule_args(cfg):
    return (cfg.lr_initial, cfg.lr_final, LR_SHAPES[cfg.lr_decay], cfg.eps_initial, cfg.eps_final)


# -- training phase ---------------------------------------------------------------

@jit
def _train_kernel(ns, cdf, init_cdf, R, gamma, alpha, horizon, k_begin, k_end, total, batch, inter,
                  lr0, lr1, shape, eps0, eps1, target_every, seed, update_rule,
                  qp, qpt, Qa, Qat, buf_s, buf_j, buf_f, buf_s2, meta, env):
    np.random.seed(seed)
    k, _, n = qp.shape
    ys = np.zeros(k)
    allf = Qa.shape[2] - 1
    size = buf_s.shape[0]
    acts = np.zeros(k, np.int64)
    s, t, f = env[0], env[1], env[2]
    for u in range(k_begin, k_end):
        frac = u / total
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        for _ in range(inter):
            j = 0
            for i in range(k):
                if np.random.random() < eps:
                    a = np.random.randint(n)
                elif (f >> i) & 1:
                    a = _argmax(qp[i, s])
                else:
                    a = _argmax(Qa[i, s, _others(f, i, k)])
                j = j * n + a
            s2 = _successor(ns, cdf, s, j)
            p = meta[0]
            buf_s[p] = s
            buf_j[p] = j
            buf_f[p] = f
            buf_s2[p] = s2
            meta[0] = (p + 1) % size
            meta[1] = min(meta[1] + 1, size)
            t += 1
            if s2 < 0 or t >= horizon:
                s = _draw(init_cdf)
                t = 0
                f = 0
                for i in range(k):
                    if np.random.random() < 0.5:
                        f |= 1 << i
            else:
                s = s2
        cnt = meta[1]
        for _ in range(batch):
            x = np.random.randint(cnt)
            si, ji, fi, sn = buf_s[x], buf_j[x], buf_f[x], buf_s2[x]
            base = 0.0
            for i in range(k):
                ai = _action_of(ji, i, k, n)
                acts[i] = ai
                ri = R[si, ji, i]
                # payment as if the joint action had been recommended to everyone
                base += ri - alpha * _payment(Qa, i, si, allf, ai, False)
                ys[i] = gamma * np.max(qpt[i, sn]) if sn >= 0 else 0.0
                fo = _others(fi, i, k)
                ya = ri
                if sn >= 0:
                    ya += gamma * np.max(Qat[i, sn, fo])
                Qa[i, si, fo, ai] += lr * (ya - Qa[i, si, fo, ai])
            if update_rule == 1:
                # value decomposition: one step on (sum_i q_i - sum_i y_i)^2
                delta = base
                for i in range(k):
                    delta += ys[i] - qp[i, si, acts[i]]
                for i in range(k):
                    qp[i, si, acts[i]] += lr * delta
            else:
                # each table regresses the team target on its own action
                for i in range(k):
                    qp[i, si, acts[i]] += lr * (base + ys[i] - qp[i, si, acts[i]])
        if (u + 1) % target_every == 0:
            qpt[:] = qp
            Qat[:] = Qa
    env[0] = s
    env[1] = t
    env[2] = f


def _fresh_env(game, rng_seed, with_flags):
    rng = np.random.default_rng(rng_seed)
    s = int(rng.choice(game.n_states, p=game.initial))
    f = int(rng.integers(0, 2 ** game.n_agents)) if with_flags else 0
    return np.array([s, 0, f], dtype=np.int64)


def train_multi(game, config, on_metrics=None):
    """Training phase: principal tables and flag-conditioned agent tables.

    ``principal_update="team"`` regresses every q_i on the summed target;
    ``"vdn"`` takes one step on the squared error of the sums.

    Every ``eval_every`` updates a greedy rollout of the recommended joint
    policy reports its welfare and the estimated share of welfare paid.
    """
    k, S, n, F = game.n_agents, game.n_states, game.n_actions, game.n_flags
    ns, cdf, init_cdf, R = _tables(game)
    qp = np.zeros((k, S, n))
    Qa = np.zeros((k, S, F, n))
    qpt, Qat = qp.copy(), Qa.copy()
    buf = _Replay.empty(config.buffer_size, k)
    env = _fresh_env(game, config.seed, True)
    state = MultiTrainState(qp, Qa, qpt, Qat, config)
    done, chunk = 0, 0
    while done < config.updates:
        nxt = min(done + config.eval_every, config.updates)
        _train_kernel(ns, cdf, init_cdf, R, game.gamma, game.alpha, game.horizon, done, nxt, config.updates,
                      config.batch_size, config.interactions_per_update, *_schedule_args(config),
                      config.target_every, _chunk_seed(config.seed, chunk),
                      PRINCIPAL_UPDATES[config.principal_update], qp, qpt, Qa, Qat, buf.s, buf.j, buf.f, buf.s2, buf.meta, env)
        done = nxt
        chunk += 1
        roll = rollout(game, state.recommendations(), Qa, None, [FOLLOW] * k, config.eval_episodes,
                       seed=_chunk_seed(config.seed + 7919, chunk), nudge=config.nudge,
                       floor=config.payment_floor)
        row = _row("training", done, roll, np.nan, np.nan, "")
        state.metrics.append(row)
        if on_metrics is not None:
            on_metrics(row)
    return state


# -- rollouts and probes ------------------------------------------------------------

@dataclass(frozen=True)
class Rollout:
    returns: np.ndarray   # per agent, rewards plus payments, mean per episode
    welfare: float        # mean episode sum of raw rewards
    payments: float       # mean episode sum of payments
    follow_rate: float

    @property
    def paid_proportion(self):
        return self.payments / self.welfare if self.welfare > 0 else np.nan


@jit
def _rollout_kernel(ns, cdf, init_cdf, R, horizon, rec, Qa, Qv, modes, nudge, floor, episodes, seed, out):
    np.random.seed(seed)
    k = rec.shape[0]
    n = Qa.shape[3]
    acts = np.zeros(k, np.int64)
    for i in range(out.shape[0]):
        out[i] = 0.0
    for _ in range(episodes):
        s = _draw(init_cdf)
        for _t in range(horizon):
            j = 0
            f = 0
            for i in range(k):
                ap = rec[i, s]
                if modes[i] == 1:
                    a = ap
                else:
                    a = _argmax(Qv[i, s, ap])
                acts[i] = a
                if a == ap:
                    f |= 1 << i
                j = j * n + a
            w = 0.0
            for i in range(k):
                w += R[s, j, i]
            for i in range(k):
                pay = 0.0
                if (f >> i) & 1:
                    pay = _payment(Qa, i, s, _others(f, i, k), acts[i], floor) + nudge * w
                out[i] += R[s, j, i] + pay
                out[k + 1] += pay
                out[k + 2] += (f >> i) & 1
            out[k] += w
            out[k + 3] += k
            s = _successor(ns, cdf, s, j)
            if s < 0:
                break


def rollout(game, recommended, agent_q, validation_q, modes, episodes, seed=0, nudge=0.0, floor=True):
    """Greedy episodes: agent i follows its recommendation if ``modes[i] == FOLLOW``,
    otherwise acts greedily on ``validation_q[i, s, rec]``. Payments use ``agent_q``."""
    ns, cdf, init_cdf, R = _tables(game)
    k = game.n_agents
    if validation_q is None:
        validation_q = np.zeros((k, game.n_states, game.n_actions, game.n_actions))
    out = np.zeros(k + 4)
    _rollout_kernel(ns, cdf, init_cdf, R, game.horizon, np.ascontiguousarray(recommended, dtype=np.int64),
                    agent_q, validation_q, np.asarray(modes, dtype=np.int64), float(nudge), bool(floor),
                    int(episodes), int(seed), out)
    out[:k + 3] /= episodes
    return Rollout(out[:k].copy(), float(out[k]), float(out[k + 1]),
                   float(out[k + 2] * episodes / max(out[k + 3], 1.0)))


def _ratio(game, rec, agent_q, validation_q, opponent_mode, episodes, seed, nudge, floor):
    ratios = []
    for i in range(game.n_agents):
        own = [opponent_mode] * game.n_agents
        own[i] = OWN
        ref = list(own)
        ref[i] = FOLLOW
        a = rollout(game, rec, agent_q, validation_q, own, episodes, seed, nudge, floor).returns[i]
        b = rollout(game, rec, agent_q, validation_q, ref, episodes, seed, nudge, floor).returns[i]
        ratios.append(a / b if b > 0 else np.nan)
    return float(np.mean(ratios))


def probe_spe_ratio(game, rec, agent_q, validation_q, episodes=80, seed=0, nudge=0.0, floor=True):
    """Learner-policy return over recommended-policy return, opponents following
    recommendations; averaged over learners. NaN when a reference return is <= 0."""
    return _ratio(game, rec, agent_q, validation_q, FOLLOW, episodes, seed, nudge, floor)


def probe_ic_ratio(game, rec, agent_q, validation_q, episodes=80, seed=0, nudge=0.0, floor=True):
    """As ``probe_spe_ratio`` but opponents play their own current policies."""
    return _ratio(game, rec, agent_q, validation_q, OWN, episodes, seed, nudge, floor)


def _row(phase, update, roll, spe, ic, baseline):
    return {"phase": phase, "update": int(update), "social_welfare": roll.welfare,
            "paid_proportion": roll.paid_proportion, "accuracy": roll.follow_rate,
            "spe_ratio": spe, "ic_ratio": ic, "baseline": baseline}


# -- validation phase -------------------------------------------------------------

@jit
def _validate_kernel(ns, cdf, init_cdf, R, gamma, horizon, rec, Qa, nudge, floor,
                     k_begin, k_end, total, batch, inter, lr0, lr1, shape, eps0, eps1, target_every, seed,
                     Qv, Qvt, buf_s, buf_j, buf_r, buf_s2, meta, env):
    np.random.seed(seed)
    k = rec.shape[0]
    n = Qa.shape[3]
    size = buf_s.shape[0]
    acts = np.zeros(k, np.int64)
    s, t = env[0], env[1]
    for u in range(k_begin, k_end):
        frac = u / total
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        for _ in range(inter):
            j = 0
            f = 0
            for i in range(k):
                ap = rec[i, s]
                if np.random.random() < eps:
                    a = np.random.randint(n)
                else:
                    a = _argmax(Qv[i, s, ap])
                acts[i] = a
                if a == ap:
                    f |= 1 << i
                j = j * n + a
            w = 0.0
            for i in range(k):
                w += R[s, j, i]
            s2 = _successor(ns, cdf, s, j)
            p = meta[0]
            for i in range(k):
                pay = 0.0
                if (f >> i) & 1:
                    pay = _payment(Qa, i, s, _others(f, i, k), acts[i], floor) + nudge * w
                buf_r[p, i] = R[s, j, i] + pay
            buf_s[p] = s
            buf_j[p] = j
            buf_s2[p] = s2
            meta[0] = (p + 1) % size
            meta[1] = min(meta[1] + 1, size)
            t += 1
            if s2 < 0 or t >= horizon:
                s = _draw(init_cdf)
                t = 0
            else:
                s = s2
        cnt = meta[1]
        for _ in range(batch):
            x = np.random.randint(cnt)
            si, ji, sn = buf_s[x], buf_j[x], buf_s2[x]
            for i in range(k):
                ai = _action_of(ji, i, k, n)
                ap = rec[i, si]
                y = buf_r[x, i]
                if sn >= 0:
                    y += gamma * np.max(Qvt[i, sn, rec[i, sn]])
                Qv[i, si, ap, ai] += lr * (y - Qv[i, si, ap, ai])
        if (u + 1) % target_every == 0:
            Qvt[:] = Qv
    env[0] = s
    env[1] = t


@dataclass
class ValidationResult:
    validation_q: np.ndarray   # [k, S, n (recommendation), n]
    metrics: list
    final: Rollout


def validate_independent(game, trained, config, on_metrics=None):
    """Validation phase: fresh selfish learners see recommendations and are paid
    by the frozen principal when they follow them."""
    k, S, n = game.n_agents, game.n_states, game.n_actions
    ns, cdf, init_cdf, R = _tables(game)
    rec = np.ascontiguousarray(trained.recommendations(), dtype=np.int64)
    Qa = trained.agent_q
    Qv = np.zeros((k, S, n, n))
    Qvt = Qv.copy()
    buf = _Replay.empty(config.buffer_size, k)
    env = _fresh_env(game, config.seed + 1, False)
    metrics = []
    done, chunk = 0, 0
    roll = None
    while done < config.updates:
        nxt = min(done + config.eval_every, config.updates)
        _validate_kernel(ns, cdf, init_cdf, R, game.gamma, game.horizon, rec, Qa, config.nudge, config.payment_floor,
                         done, nxt, config.updates, config.batch_size, config.interactions_per_update,
                         *_schedule_args(config), config.target_every, _chunk_seed(config.seed + 1, chunk),
                         Qv, Qvt, buf.s, buf.j, buf.r, buf.s2, buf.meta, env)
        done = nxt
        chunk += 1
        seed = _chunk_seed(config.seed + 7919, chunk)
        args = (config.eval_episodes, seed, config.nudge, config.payment_floor)
        roll = rollout(game, rec, Qa, Qv, [OWN] * k, *args)
        row = _row("validation", done, roll, probe_spe_ratio(game, rec, Qa, Qv, *args),
                   probe_ic_ratio(game, rec, Qa, Qv, *args), "")
        metrics.append(row)
        if on_metrics is not None:
            on_metrics(row)
    return ValidationResult(Qv, metrics, roll)


# -- constant-proportion baseline ---------------------------------------------------

@jit
def _baseline_kernel(ns, cdf, init_cdf, R, gamma, horizon, proportion,
                     k_begin, k_end, total, batch, inter, lr0, lr1, shape, eps0, eps1, target_every, seed,
                     Qb, Qbt, buf_s, buf_j, buf_s2, meta, env):
    np.random.seed(seed)
    k, _, n = Qb.shape
    size = buf_s.shape[0]
    s, t = env[0], env[1]
    for u in range(k_begin, k_end):
        frac = u / total
        lr = _lr(lr0, lr1, frac, shape)
        eps = eps0 + (eps1 - eps0) * frac
        for _ in range(inter):
            j = 0
            for i in range(k):
                if np.random.random() < eps:
                    a = np.random.randint(n)
                else:
                    a = _argmax(Qb[i, s])
                j = j * n + a
            s2 = _successor(ns, cdf, s, j)
            p = meta[0]
            buf_s[p] = s
            buf_j[p] = j
            buf_s2[p] = s2
            meta[0] = (p + 1) % size
            meta[1] = min(meta[1] + 1, size)
            t += 1
            if s2 < 0 or t >= horizon:
                s = _draw(init_cdf)
                t = 0
            else:
                s = s2
        cnt = meta[1]
        for _ in range(batch):
            x = np.random.randint(cnt)
            si, ji, sn = buf_s[x], buf_j[x], buf_s2[x]
            w = 0.0
            for i in range(k):
                w += R[si, ji, i]
            for i in range(k):
                ai = _action_of(ji, i, k, n)
                y = R[si, ji, i] + proportion * (w - R[si, ji, i])
                if sn >= 0:
                    y += gamma * np.max(Qbt[i, sn])
                Qb[i, si, ai] += lr * (y - Qb[i, si, ai])
        if (u + 1) % target_every == 0:
            Qbt[:] = Qb
    env[0] = s
    env[1] = t


@jit
def _baseline_rollout_kernel(ns, cdf, init_cdf, R, horizon, Qb, proportion, episodes, seed, out):
    np.random.seed(seed)
    k, _, n = Qb.shape
    for i in range(out.shape[0]):
        out[i] = 0.0
    for _ in range(episodes):
        s = _draw(init_cdf)
        for _t in range(horizon):
            j = 0
            for i in range(k):
                j = j * n + _argmax(Qb[i, s])
            w = 0.0
            for i in range(k):
                w += R[s, j, i]
            for i in range(k):
                share = proportion * (w - R[s, j, i])
                out[i] += R[s, j, i] + share
                out[k + 1] += share
            out[k] += w
            s = _successor(ns, cdf, s, j)
            if s < 0:
                break


@dataclass
class BaselineResult:
    proportion: float
    q: np.ndarray
    metrics: list
    final: Rollout


def baseline_constant_proportion(game, proportion, config, on_metrics=None, label=None):
    """Independent learners, each also receiving ``proportion`` times the others' rewards."""
    if not 0.0 <= proportion <= 1.0:
        raise ValueError(f"proportion must lie in [0, 1], got {proportion}")
    k, S, n = game.n_agents, game.n_states, game.n_actions
    ns, cdf, init_cdf, R = _tables(game)
    Qb = np.zeros((k, S, n))
    Qbt = Qb.copy()
    buf = _Replay.empty(config.buffer_size, k)
    env = _fresh_env(game, config.seed + 2, False)
    label = label if label is not None else f"proportion={proportion:g}"
    metrics = []
    done, chunk = 0, 0
    roll = None
    while done < config.updates:
        nxt = min(done + config.eval_every, config.updates)
        _baseline_kernel(ns, cdf, init_cdf, R, game.gamma, game.horizon, float(proportion),
                         done, nxt, config.updates, config.batch_size, config.interactions_per_update,
                         *_schedule_args(config), config.target_every, _chunk_seed(config.seed + 2, chunk),
                         Qb, Qbt, buf.s, buf.j, buf.s2, buf.meta, env)
        done = nxt
        chunk += 1
        out = np.zeros(k + 2)
        _baseline_rollout_kernel(ns, cdf, init_cdf, R, game.horizon, Qb, float(proportion),
                                 config.eval_episodes, _chunk_seed(config.seed + 7919, chunk), out)
        out /= config.eval_episodes
        roll = Rollout(out[:k].copy(), float(out[k]), float(out[k + 1]), np.nan)
        row = _row("baseline", done, roll, np.nan, np.nan, label)
        metrics.append(row)
        if on_metrics is not None:
            on_metrics(row)
    return BaselineResult(float(proportion), Qb, metrics, roll)


# -- exact one-shot implementation ----------------------------------------------------

def matrix_ic_payments(game, recommended, state=0, nudge=0.0):
    """Minimal payments making ``recommended`` dominant in a one-shot game.

    Agent i is paid, for each profile of the others, the gap between its best
    reply and its recommended action (plus ``nudge``); nothing off-recommendation.
    Returns ``pay[j, i]`` over joint actions.
    """
    k, n = game.n_agents, game.n_actions
    R = game.rewards[state]
    pay = np.zeros((game.n_joint, k))
    for j in range(game.n_joint):
        acts = game.joint_actions(j)
        for i in range(k):
            if acts[i] != recommended[i]:
                continue
            alts = [game.joint_index(acts[:i] + (a,) + acts[i + 1:]) for a in range(n)]
            pay[j, i] = max(R[x, i] for x in alts) - R[j, i] + nudge
    return pay


def dominance_margins(game, payments, recommended, state=0):
    """For each agent, the smallest advantage of the recommended action over any
    alternative, across all profiles of the others (> 0 means strictly dominant)."""
    k, n = game.n_agents, game.n_actions
    U = game.rewards[state] + payments
    margins = []
    for i in range(k):
        worst = math.inf
        for j in range(game.n_joint):
            acts = game.joint_actions(j)
            if acts[i] != recommended[i]:
                continue
            for a in range(n):
                if a == recommended[i]:
                    continue
                x = game.joint_index(acts[:i] + (a,) + acts[i + 1:])
                worst = min(worst, U[j, i] - U[x, i])
        margins.append(worst)
    return np.array(margins)


def learned_payment_matrix(game, trained, state=0, floor=True):
    """Payments the trained tables would make in a one-shot game, per joint action."""
    k = game.n_agents
    rec = trained.recommendations()[:, state]
    pay = np.zeros((game.n_joint, k))
    for j in range(game.n_joint):
        acts = game.joint_actions(j)
        mask = sum(int(acts[i] == rec[i]) << i for i in range(k))
        for i in range(k):
            if acts[i] == rec[i]:
                pay[j, i] = _payment(trained.agent_q, i, state, _others(mask, i, k), acts[i], floor)
    return pay

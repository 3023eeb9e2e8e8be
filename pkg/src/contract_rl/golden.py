"""Reference checks with expected values, observed values and tolerances.

Each ``*_checks`` function returns a list of ``Check`` rows; ``run_suite``
groups them the way the ``golden`` CLI command exposes them.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .envs import (TreeGenConfig, figure1_threat_policy, generate_tree_mdp, make_divergence_mdp, make_figure1_mdp,
                   make_prisoners_dilemma)
from .exact import best_response, evaluate_pair, spe_backward_induction, spe_probe
from .lp import build_lp, error_bounds, minimal_contract, nudge_schedule, solve_lp
from .mdp import validate
from .meta import contraction_report, detect_cycle, run_meta
from .multi import dominance_margins, matrix_ic_payments

TREE_SUITE = [(2 + seed % 5, seed) for seed in range(50)]
OBSERVED_SUITE = [(2 + seed % 5, seed) for seed in range(20)]
S_R = 2


@dataclass(frozen=True)
class Check:
    name: str
    expected: object
    observed: object
    tolerance: object
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: expected {_fmt(self.expected)}, " \
               f"observed {_fmt(self.observed)}, tolerance {_fmt(self.tolerance)}"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{x:.9g}"
    if isinstance(x, np.ndarray):
        return np.array2string(x, precision=6)
    return str(x)


def close(name, expected, observed, tol):
    ok = bool(np.all(np.abs(np.asarray(observed, float) - np.asarray(expected, float)) <= tol))
    return Check(name, expected, observed, tol, ok)


def holds(name, condition, observed, expected="true"):
    return Check(name, expected, observed, "-", bool(condition))


def at_most(name, observed, limit):
    return Check(name, f"<= {limit}", observed, "-", bool(observed <= limit))


def at_least(name, observed, limit):
    return Check(name, f">= {limit}", observed, "-", bool(observed >= limit))


@dataclass
class GoldenReport:
    suite: str
    checks: list
    seconds: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def table(self):
        rows = [("status", "check", "expected", "observed", "tolerance")]
        rows += [("PASS" if c.passed else "FAIL", c.name, _fmt(c.expected), _fmt(c.observed), _fmt(c.tolerance))
                 for c in self.checks]
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        lines.append(f"{self.suite}: {'PASS' if self.passed else 'FAIL'} ({self.seconds:.2f} s)")
        return "\n".join(lines)


# -- single-agent theory ---------------------------------------------------------

def figure1_checks():
    t0 = time.perf_counter()
    mdp = make_figure1_mdp()
    spe = spe_backward_induction(mdp)
    dt = time.perf_counter() - t0
    dev = float(np.max(np.abs(spe.principal_policy.contracts - np.array([1.0, 0.0]))))
    return [
        close("figure1 SPE principal utility", 1.0, spe.principal_utility, 1e-9),
        close("figure1 SPE agent utility", 0.2, spe.agent_utility, 1e-9),
        close("figure1 SPE contract (1,0) in every state, max deviation", 0.0, dev, 1e-9),
        at_most("figure1 SPE runtime [s]", dt, 1.0),
        holds("figure1 model validates", not validate(mdp), validate(mdp), "[]"),
        holds("figure1 SPE passes spe_probe", spe_probe(mdp, spe).ok, spe_probe(mdp, spe).violations, "[]"),
    ]


def stackelberg_checks():
    mdp = make_figure1_mdp()
    spe = spe_backward_induction(mdp)
    threat = figure1_threat_policy()
    vp, _ = evaluate_pair(mdp, threat, best_response(mdp, threat))
    probe = spe_probe(mdp, threat)
    return [
        close("threat policy principal utility", 1.04, vp, 1e-9),
        holds("threat policy strictly above SPE", vp > spe.principal_utility, vp, f"> {spe.principal_utility:.9g}"),
        holds("threat policy fails spe_probe at s_R", S_R in probe.states("principal"),
              probe.states("principal"), f"contains {S_R}"),
    ]


def _tree(depth, seed, observed=False):
    return generate_tree_mdp(TreeGenConfig(depth=depth, seed=seed, observed=observed))


def _finite_sup(a, b):
    fa, fb = np.isfinite(a), np.isfinite(b)
    if np.any(fa != fb):
        return np.inf
    return float(np.max(np.abs(a[fa] - b[fb]), initial=0.0))


def meta_convergence_checks(suite=TREE_SUITE):
    t0 = time.perf_counter()
    late, mismatched = [], []
    worst = 0.0
    for depth, seed in suite:
        mdp = _tree(depth, seed)
        res = run_meta(mdp, max_iterations=mdp.horizon + 3)
        spe = spe_backward_induction(mdp)
        if not res.trace.converged or len(res.trace) > mdp.horizon + 1:
            late.append(seed)
        pv, av = evaluate_pair(mdp, res.principal_policy, res.agent_policy)
        gap = max(abs(pv - spe.principal_utility), abs(av - spe.agent_utility), _finite_sup(res.principal_q, spe.principal_q))
        worst = max(worst, gap)
        if gap > 1e-9:
            mismatched.append(seed)
    dt = time.perf_counter() - t0
    return [
        holds(f"meta converges within T+1 iterations on {len(suite)} trees", not late, late, "[]"),
        close("meta matches backward induction, worst gap", 0.0, worst, 1e-9),
        at_most("meta-convergence suite runtime [s]", dt, 30.0),
    ]


def observed_checks(suite=OBSERVED_SUITE):
    bad = []
    for depth, seed in suite:
        mdp = _tree(depth, seed, observed=True)
        res = run_meta(mdp, max_iterations=mdp.horizon + 3)
        if not res.trace.converged or res.trace.converged_at != 1:
            bad.append((seed, res.trace.converged_at))
    return [holds(f"observed-action trees converge in one iteration ({len(suite)} trees)", not bad, bad, "[]")]


def contraction_checks(suite=TREE_SUITE):
    flagged = []
    for depth, seed in suite:
        mdp = _tree(depth, seed)
        rep = contraction_report(run_meta(mdp, max_iterations=mdp.horizon + 3).trace)
        if not rep.monotone:
            flagged.append(seed)
    return [holds(f"q sup-distance to the fixed point never grows ({len(suite)} trees)", not flagged,
                  f"{len(flagged)} trees flagged: seeds {flagged}", "0 flagged")]


DIVERGENCE_VALUES = {
    # (iteration, table, state, action): reported value
    (1, "agent", 0, 0): 0.0, (1, "agent", 0, 1): -1.0, (1, "agent", 1, 0): -2.0, (1, "agent", 1, 1): 0.0,
    (1, "principal", 0, 0): 1.991, (1, "principal", 0, 1): 2.048,
    (1, "principal", 1, 0): 1.391, (1, "principal", 1, 1): 2.023,
    (2, "agent", 0, 0): 0.723, (2, "agent", 0, 1): -0.598, (2, "agent", 1, 0): -1.277, (2, "agent", 1, 1): 0.402,
    (2, "principal", 0, 0): 1.661, (2, "principal", 0, 1): 1.503,
    (2, "principal", 1, 0): 1.422, (2, "principal", 1, 1): 1.839,
}


def divergence_checks():
    mdp = make_divergence_mdp(reward_s2=2.0)
    res = run_meta(mdp, max_iterations=12)
    recs = res.trace.records
    out = [holds("divergence meta-algorithm cycles with period 2", detect_cycle(res.trace) == 2,
                 detect_cycle(res.trace), 2)]
    for (it, table, s, a), want in DIVERGENCE_VALUES.items():
        rec = recs[it - 1]
        got = rec.agent_q[s, a] if table == "agent" else rec.principal_q[s, a]
        sym = "Qbar" if table == "agent" else "q"
        out.append(close(f"divergence iteration {it} {sym}(s{s + 1},a{a + 1})", want, float(got), 1e-3))
    rho1 = recs[0].principal_policy.contracts
    out.append(close("divergence iteration 1 contracts", np.array([[0.0, 1.25], [0.0, 0.0]]), rho1, 1e-3))
    qbar2 = recs[1].agent_q
    with_pay = mdp.outcome_fn @ rho1[:, :, None]
    out.append(close("divergence iteration 2 agent Q under rho_1", np.array([[0.848, 0.527], [-1.277, 0.402]]),
                     with_pay[:, :, 0] + qbar2, 1e-3))
    out.append(close("divergence LP contract for a2 in s1 (iteration 2)", np.array([0.0, 1.652]),
                     minimal_contract(mdp.outcome_fn[0], qbar2[0], 1).contract, 1e-3))
    out.append(close("divergence LP contract for a1 in s2 (iteration 2)", np.array([2.098, 0.0]),
                     minimal_contract(mdp.outcome_fn[1], qbar2[1], 0).contract, 1e-3))
    out.append(close("divergence LP contract for a1 in s2 (iteration 1)", np.array([2.5, 0.0]),
                     minimal_contract(mdp.outcome_fn[1], recs[0].agent_q[1], 0).contract, 1e-3))
    return out


# -- LP oracle ----------------------------------------------------------------------

def lp_oracle_checks(n_instances=200, seed=0):
    from .oracles import BOX, GRID_STEP, boxed, grid_min, random_static_instance

    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst, status_mismatch = 0.0, 0
    for _ in range(n_instances):
        O, q, rec = random_static_instance(rng)
        inst = build_lp(O, q, rec)
        sol = solve_lp(boxed(inst))
        ref = grid_min(inst.objective, inst.ic_matrix, inst.ic_rhs, GRID_STEP, BOX)
        if sol.feasible != np.isfinite(ref):
            status_mismatch += 1
        elif sol.feasible:
            worst = max(worst, abs(ref - sol.expected_payment))
    dt = time.perf_counter() - t0
    return [
        close(f"LP vs grid search, worst expected-payment gap ({n_instances} instances)", 0.0, worst, 1e-2),
        holds("LP and grid agree on feasibility", status_mismatch == 0, status_mismatch, 0),
        at_most("LP oracle runtime [s]", dt, 60.0),
    ]


# -- error bounds -------------------------------------------------------------------

def closed_form_bounds(delta, eps, gamma, T, d_min):
    """Constant per-step errors: geometric sums in closed form."""
    g = gamma ** (T + 1)
    D0 = delta * (1 - g) / (1 - gamma)
    E = [eps * (1 - gamma ** (T + 1 - t)) / (1 - gamma) for t in range(T + 1)]
    weighted = eps / (1 - gamma) * ((1 - g) / (1 - gamma) - (T + 1) * g)
    return D0, E, 2 * D0 + 2 * weighted / d_min


def error_bound_checks(n_tuples=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tuples):
        delta, eps = rng.uniform(0, 0.5, 2)
        gamma = float(rng.uniform(0.05, 0.99))
        T = int(rng.integers(0, 20))
        d_min = float(rng.uniform(0.05, 1.0))
        D0, E, gap = closed_form_bounds(delta, eps, gamma, T, d_min)
        got = error_bounds(np.full(T + 1, delta), np.full(T + 1, eps), gamma, d_min)
        xi = nudge_schedule(np.full(T + 1, eps), gamma, horizon=T)
        worst = max(worst, abs(got.D0 - D0), abs(got.E0 - E[0]), abs(got.utility_gap - gap),
                    float(np.max(np.abs(xi - 2 * np.array(E)))))
    return [close(f"error bounds and nudge schedule vs closed form ({n_tuples} tuples), worst error", 0.0, worst, 1e-12)]


# -- Prisoner's Dilemma -----------------------------------------------------------------

def prisoners_checks(seeds=(0, 1, 2), learned_tol=0.1, nudge=0.1):
    from .experiments import default_multi_config, run_prisoners

    game = make_prisoners_dilemma()
    exact = matrix_ic_payments(game, (0, 0))
    cc, cd, dc = game.joint_index((0, 0)), game.joint_index((0, 1)), game.joint_index((1, 0))
    out = [
        close("exact IC payments in CC (row, column)", np.array([1.0, 1.0]), exact[cc], 1e-12),
        close("exact IC payment to the cooperator in CD / DC", np.array([2.0, 2.0]),
              np.array([exact[cd, 0], exact[dc, 1]]), 1e-12),
        close("exact IC pays defectors nothing", 0.0, float(exact[cd, 1] + exact[dc, 0] + exact[-1].sum()), 1e-12),
    ]
    margins = dominance_margins(game, exact, (0, 0))
    out.append(holds("post-payment matrix makes C strictly dominant", bool(np.all(margins > 0)),
                     margins, "all > 0"))
    nudged = dominance_margins(game, matrix_ic_payments(game, (0, 0), nudge=nudge), (0, 0))
    out.append(close(f"C strictly dominant with a {nudge:g} nudge, margins", np.full(2, nudge), nudged, 1e-12))
    cfg = default_multi_config("prisoners")
    for seed in seeds:
        res = run_prisoners(seed, cfg)
        rec = (res.summary["recommended_row"], res.summary["recommended_column"])
        out.append(holds(f"learned recommendations are (C,C), seed {seed}", rec == (0, 0), rec, (0, 0)))
        out.append(close(f"learned payments match the exact IC payments, seed {seed}", exact,
                         res.extra["payments"], learned_tol))
    return out


SUITES = {
    "figure1": (figure1_checks, stackelberg_checks),
    "divergence": (divergence_checks,),
    "prisoners": (prisoners_checks,),
    "lp-oracle": (lp_oracle_checks,),
    "contraction": (meta_convergence_checks, observed_checks, contraction_checks),
}


def run_suite(name):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    t0 = time.perf_counter()
    checks = [c for fn in SUITES[name] for c in fn()]
    return GoldenReport(name, checks, time.perf_counter() - t0)



# -- learning experiments -------------------------------------------------------------

def tree_learning_checks(seeds=range(5), depth=6, learning=None, workers=1):
    from .experiments import default_learning_config, run_tabular
    from .runner import map_seeds

    learning = learning or default_learning_config()
    t0 = time.perf_counter()
    results = map_seeds(run_tabular, [("tree", {"depth": depth}, s, learning) for s in seeds], workers)
    dt = time.perf_counter() - t0
    per_seed = [(round(r.summary["utility_ratio"], 4), round(r.summary["accuracy"], 4)) for r in results]
    good = sum(r.summary["utility_ratio"] >= 0.95 and r.summary["accuracy"] >= 0.85 for r in results)
    need = len(results) - 1
    return [
        at_least(f"depth-{depth} trees with utility ratio >= 0.95 and accuracy >= 0.85 (ratio, accuracy per seed: "
                 f"{per_seed})", good, need),
        at_most("tree learning runtime [s]", dt, 600.0),
    ]


def coin_game_checks(seeds=(0, 1, 2), config=None, workers=1):
    from .experiments import default_multi_config, run_coingame
    from .runner import map_seeds

    config = config or default_multi_config("coingame")
    t0 = time.perf_counter()
    results = map_seeds(run_coingame, [(s, config) for s in seeds], workers)
    dt = time.perf_counter() - t0

    def mean(key):
        return float(np.mean([r.summary[key] for r in results]))

    ours, coop, selfish = mean("social_welfare"), mean("cooperative_social_welfare"), mean("selfish_social_welfare")
    peak_ic = max(r.summary["unnudged_max_ic_ratio"] for r in results)
    return [
        at_least(f"coin game welfare / cooperative baseline ({ours:.4g} / {coop:.4g})", ours / coop, 0.9),
        at_least(f"coin game welfare / selfish baseline ({ours:.4g} / {selfish:.4g})", ours / selfish, 1.3),
        at_most("coin game paid proportion of welfare", mean("paid_proportion"), 0.5),
        holds("coin game without nudging: ic_ratio exceeds 1.03 at some probe", peak_ic > 1.03, peak_ic, "> 1.03"),
        at_most("coin game runtime [s]", dt, 3600.0),
    ]

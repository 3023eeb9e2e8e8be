"""Per-seed experiment runners shared by the CLI and the acceptance checks."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .envs import (TreeGenConfig, generate_tree_mdp, make_coin_game, make_divergence_mdp, make_figure1_mdp,
                   make_prisoners_dilemma, oracle_validate)
from .envs.validation import learned_policy
from .exact import evaluate_pair, spe_backward_induction
from .meta import detect_cycle, run_meta
from .multi import (METRIC_COLUMNS, MultiConfig, baseline_constant_proportion, learned_payment_matrix,
                    matrix_ic_payments, train_multi, validate_independent)
from .qlearn import LearningConfig, train_simultaneous

TRACE_COLUMNS = ("iter", "principal_utility", "agent_utility", "q_supnorm_to_final", "policy_changed")
LEARN_COLUMNS = ("update", "principal_utility_oracle", "agent_utility_oracle", "accuracy")


@dataclass
class SeedResult:
    seed: int
    summary: dict
    columns: tuple
    rows: list
    trace: str | None = None
    extra: dict = field(default_factory=dict)


def build_mdp(kind, env, seed):
    if kind == "figure1":
        return make_figure1_mdp()
    if kind == "divergence":
        return make_divergence_mdp(**env)
    if kind == "tree":
        return generate_tree_mdp(TreeGenConfig(seed=seed, **env))
    raise ValueError(f"no single-agent model for kind {kind!r}")


def _trace_rows(trace):
    dist = trace.q_distances() if trace.converged else [None] * len(trace)
    return [{"iter": r.iteration, "principal_utility": r.principal_utility, "agent_utility": r.agent_utility,
             "q_supnorm_to_final": None if d is None else float(d), "policy_changed": int(r.policy_changed)}
            for r, d in zip(trace.records, dist)]


def run_exact(kind, env, seed, max_iterations=100):
    """Meta-algorithm with exact inner/outer solvers (plus backward induction when finite)."""
    mdp = build_mdp(kind, env, seed)
    t0 = time.perf_counter()
    res = run_meta(mdp, max_iterations=max_iterations)
    pv, av = evaluate_pair(mdp, res.principal_policy, res.agent_policy) if mdp.finite else (np.nan, np.nan)
    summary = {
        "principal_utility": pv if mdp.finite else res.trace.records[-1].principal_utility,
        "agent_utility": av if mdp.finite else res.trace.records[-1].agent_utility,
        "iterations": len(res.trace),
        "converged": bool(res.trace.converged),
        "cycle_period": detect_cycle(res.trace),
    }
    if mdp.finite:
        spe = spe_backward_induction(mdp)
        summary["spe_principal_utility"] = spe.principal_utility
        summary["spe_agent_utility"] = spe.agent_utility
    summary["seconds"] = time.perf_counter() - t0
    return SeedResult(seed, summary, TRACE_COLUMNS, _trace_rows(res.trace), res.trace.to_jsonl())


def run_tabular(kind, env, seed, learning):
    """Simultaneous tabular training, validated against an exact best responder."""
    mdp = build_mdp(kind, env, seed)
    if not mdp.finite:
        raise ValueError("tabular training is validated against the exact SPE and needs a finite horizon")
    t0 = time.perf_counter()
    spe = spe_backward_induction(mdp)
    res = train_simultaneous(mdp, learning.with_(seed=seed), oracle=spe)
    last = res.metrics[-1]
    rho = learned_policy(mdp, res.principal.values, res.agent.values, learning.nudge)
    rec = oracle_validate(mdp, rho, learned_q=res.principal.values, spe=spe)
    summary = {
        "principal_utility": rec.principal_utility,
        "agent_utility": rec.agent_utility,
        "utility_ratio": rec.utility_ratio,
        "accuracy": rec.accuracy,
        "spe_principal_utility": spe.principal_utility,
        "spe_agent_utility": spe.agent_utility,
        "updates": last["update"],
        "seconds": time.perf_counter() - t0,
    }
    return SeedResult(seed, summary, LEARN_COLUMNS, res.metrics)


def run_prisoners(seed, config, env=None):
    game = make_prisoners_dilemma(**(env or {}))
    t0 = time.perf_counter()
    st = train_multi(game, config.with_(seed=seed))
    pay = learned_payment_matrix(game, st)
    rec = st.recommendations()[:, 0]
    exact = matrix_ic_payments(game, (0, 0))
    summary = {
        "recommended_row": int(rec[0]), "recommended_column": int(rec[1]),
        "payment_cc_row": pay[0, 0], "payment_cc_column": pay[0, 1],
        "payment_cd_row": pay[1, 0], "payment_dc_column": pay[2, 1],
        "max_abs_error_vs_exact": float(np.max(np.abs(pay - exact))),
        "seconds": time.perf_counter() - t0,
    }
    return SeedResult(seed, summary, METRIC_COLUMNS, st.metrics, extra={"payments": pay})


def run_coingame(seed, config, env=None, compare_unnudged=True, baselines=True):
    """Training phase, validation (configured nudge, and optionally none), baselines."""
    game = make_coin_game(**(env or {}))
    cfg = config.with_(seed=seed)
    t0 = time.perf_counter()
    rows = []
    st = train_multi(game, cfg, on_metrics=rows.append)
    val = validate_independent(game, st, cfg, on_metrics=rows.append)
    summary = {
        "social_welfare": val.final.welfare,
        "paid_proportion": val.final.paid_proportion,
        "accuracy": val.final.follow_rate,
        "spe_ratio": val.metrics[-1]["spe_ratio"],
        "ic_ratio": val.metrics[-1]["ic_ratio"],
        "training_welfare": st.metrics[-1]["social_welfare"],
        "training_paid_proportion": st.metrics[-1]["paid_proportion"],
    }
    if compare_unnudged and cfg.nudge > 0:
        plain = validate_independent(game, st, cfg.with_(nudge=0.0))
        for r in plain.metrics:
            rows.append(dict(r, phase="validation_unnudged"))
        summary["unnudged_social_welfare"] = plain.final.welfare
        summary["unnudged_paid_proportion"] = plain.final.paid_proportion
        summary["unnudged_max_ic_ratio"] = float(np.nanmax([r["ic_ratio"] for r in plain.metrics]))
    if baselines:
        matched = float(np.clip(summary["paid_proportion"], 0.0, 1.0))
        for label, p in (("selfish", 0.0), ("cooperative", 1.0), ("matched", matched)):
            b = baseline_constant_proportion(game, p, cfg, on_metrics=rows.append, label=label)
            summary[f"{label}_social_welfare"] = b.final.welfare
        summary["matched_proportion"] = matched
    summary["seconds"] = time.perf_counter() - t0
    return SeedResult(seed, summary, METRIC_COLUMNS, rows)


def default_multi_config(kind):
    if kind == "prisoners":
        return MultiConfig(updates=20_000, eval_every=20_000, eps_initial=1.0, buffer_size=1_000)
    return MultiConfig(updates=2_000_000, eval_every=100_000, nudge=0.1)


def default_learning_config():
    return LearningConfig(lr_final=1e-4, nudge=0.01, eval_every=200_000)

import os
import subprocess
import sys

import numpy as np
import pytest

from contract_rl import _jit
from contract_rl.envs import TreeGenConfig, generate_tree_mdp, make_divergence_mdp, make_figure1_mdp
from contract_rl.envs.validation import learned_policy, oracle_validate
from contract_rl.exact import best_response, spe_backward_induction
from contract_rl.lp import minimal_contract
from contract_rl.mdp import PrincipalAgentMDP, PrincipalPolicy
from contract_rl.qlearn import (LearningConfig, estimate_outcome_fn, train_agent_q, train_principal_q,
                                train_simultaneous)

CFG = LearningConfig(updates=100_000)


def test_agent_learns_figure1_costs():
    mdp = make_figure1_mdp()
    q = train_agent_q(mdp, PrincipalPolicy.zero(mdp), CFG).values
    assert q[1, 0] == pytest.approx(-0.8, abs=0.01) and q[2, 0] == pytest.approx(-0.8, abs=0.01)


def test_zero_reward_table_stays_zero():
    mdp = make_figure1_mdp()
    flat = PrincipalAgentMDP(mdp.outcome_fn, mdp.transition_fn, np.zeros((3, 2)), np.zeros((3, 2)), gamma=1.0,
                             horizon=2, timestep=[0, 1, 1])
    assert np.abs(train_agent_q(flat, PrincipalPolicy.zero(flat), CFG.with_(updates=5_000)).values).max() < 1e-6
    assert np.abs(train_principal_q(flat, np.zeros((3, 2)), CFG.with_(updates=5_000)).values).max() < 1e-6


def test_agent_matches_exact_best_response_on_tree():
    mdp = generate_tree_mdp(TreeGenConfig(4, seed=0))
    rho = spe_backward_induction(mdp).principal_policy
    learned = train_agent_q(mdp, rho, CFG).values
    assert np.max(np.abs(learned - best_response(mdp, rho).truncated_q)) < 0.05


def test_principal_learns_figure1_value():
    mdp = make_figure1_mdp()
    q = train_principal_q(mdp, best_response(mdp, PrincipalPolicy.zero(mdp)), CFG).values
    assert q[0, 0] == pytest.approx(1.0, abs=0.05)


def test_principal_learns_divergence_value():
    mdp = make_divergence_mdp(reward_s2=2.0)
    q = train_principal_q(mdp, best_response(mdp, PrincipalPolicy.zero(mdp)), CFG).values
    assert q[0, 1] == pytest.approx(2.048, abs=0.05)


def test_single_action_principal_is_value_estimate():
    mdp = PrincipalAgentMDP(np.array([[[0.3, 0.7]]]), np.zeros((1, 2, 1)), np.array([[-0.5]]),
                            np.array([[2.0, 1.0]]), gamma=1.0, horizon=1)
    q = train_principal_q(mdp, np.array([[-0.5]]), CFG.with_(updates=20_000)).values
    assert q[0, 0] == pytest.approx(1.3, abs=0.05)


def test_simultaneous_bandit_recovers_static_contract():
    O = np.array([[[0.8, 0.2], [0.3, 0.7]]])
    mdp = PrincipalAgentMDP(O, np.zeros((1, 2, 1)), np.array([[-0.4, 0.0]]), np.array([[3.0, 0.0]]),
                            gamma=1.0, horizon=1)
    res = train_simultaneous(mdp, LearningConfig(updates=50_000, eval_every=50_000))
    rho = learned_policy(mdp, res.principal.values, res.agent.values)
    exact = minimal_contract(O[0], mdp.agent_reward[0], 0)
    assert rho.recommended[0] == 0
    assert np.allclose(rho.contracts[0], exact.contract, atol=0.05)


def test_simultaneous_on_small_tree_validates_well():
    mdp = generate_tree_mdp(TreeGenConfig(4, seed=2))
    spe = spe_backward_induction(mdp)
    res = train_simultaneous(mdp, LearningConfig(updates=100_000, lr_final=1e-4, nudge=0.01, eval_every=50_000),
                             oracle=spe)
    assert len(res.metrics) == 2 and res.metrics[-1]["update"] == 100_000
    rec = oracle_validate(mdp, learned_policy(mdp, res.principal.values, res.agent.values, 0.01),
                          learned_q=res.principal.values, spe=spe)
    assert rec.utility_ratio >= 0.95


def test_oracle_validate_self_and_zero():
    mdp = make_figure1_mdp()
    spe = spe_backward_induction(mdp)
    rec = oracle_validate(mdp, spe.principal_policy, spe=spe)
    assert rec.utility_ratio == pytest.approx(1.0, abs=1e-9) and rec.accuracy == 1.0
    zero = oracle_validate(mdp, PrincipalPolicy.zero(mdp), spe=spe)
    assert zero.principal_utility == pytest.approx(0.1 * 14 / 9 * 2, abs=1e-12)


def test_training_is_seeded():
    mdp = generate_tree_mdp(TreeGenConfig(3, seed=1))
    a = train_agent_q(mdp, PrincipalPolicy.zero(mdp), CFG.with_(updates=3_000, seed=5)).values
    b = train_agent_q(mdp, PrincipalPolicy.zero(mdp), CFG.with_(updates=3_000, seed=5)).values
    c = train_agent_q(mdp, PrincipalPolicy.zero(mdp), CFG.with_(updates=3_000, seed=6)).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_outcome_estimates():
    rng = np.random.default_rng(0)
    o = (rng.random(10_000) >= 0.9).astype(int)
    est = estimate_outcome_fn(np.c_[np.zeros(10_000, int), np.zeros(10_000, int), o], 1, 2, 2)
    assert np.allclose(est.probs[0, 0], [0.9, 0.1], atol=0.02)
    assert est.probs[0, 1].tolist() == [0.5, 0.5] and est.unseen[0, 1] and not est.unseen[0, 0]
    K = 50
    det = estimate_outcome_fn([(0, 0, 1)] * K, 1, 1, 2)
    assert np.allclose(det.probs[0, 0], [(0.5) / (K + 1), (K + 0.5) / (K + 1)])


@pytest.mark.parametrize("kwargs", [{"lr_initial": 1.5}, {"lr_final": 0.5, "lr_initial": 0.1},
                                    {"lr_decay": "cosine"}, {"updates": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        LearningConfig(**kwargs)


SNIPPET = """
import numpy as np
from contract_rl import _jit
from contract_rl.envs import TreeGenConfig, generate_tree_mdp
from contract_rl.qlearn import LearningConfig, train_simultaneous
mdp = generate_tree_mdp(TreeGenConfig(3, seed=0))
res = train_simultaneous(mdp, LearningConfig(updates=2_000, eval_every=2_000, seed=3))
print(_jit.backend(), repr(float(res.principal.values.sum())), repr(float(res.agent.values.sum())))
"""


def test_interpreted_fallback_gives_identical_tables():
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, CONTRACT_RL_DISABLE_JIT=flag)
        out[flag] = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True,
                                   check=True).stdout.split()
    assert out["0"][0] == "numba" and out["1"][0] == "python"
    assert out["0"][1:] == out["1"][1:]
    assert _jit.backend() in ("numba", "python")

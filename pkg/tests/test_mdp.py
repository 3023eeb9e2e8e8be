import json

import numpy as np
import pytest

from contract_rl.envs import generate_tree_mdp, make_figure1_mdp, TreeGenConfig
from contract_rl.exact import best_response
from contract_rl.mdp import (AgentMDPView, AgentPolicy, MalformedModelError, PrincipalAgentMDP, PrincipalMDPView,
                             PrincipalPolicy, as_contract, expected_payment, from_dict, from_json, validate)

L, R = 0, 1


def test_figure1_is_valid():
    assert validate(make_figure1_mdp()) == []


def test_row_sum_violation_reported():
    mdp = make_figure1_mdp().to_dict()
    mdp["outcome_fn"][0][0] = [0.5, 0.6]
    with pytest.raises(MalformedModelError, match="row sum 1.1"):
        from_dict(mdp)


def test_variant_mismatch_reported():
    d = generate_tree_mdp(TreeGenConfig(2, seed=0, observed=True)).to_dict()
    d["outcome_fn"][0][0] = [0.9, 0.1]
    with pytest.raises(MalformedModelError, match="variant mismatch"):
        from_dict(d)


def test_timestep_skip_reported():
    base = make_figure1_mdp()
    with pytest.raises(MalformedModelError):
        from_dict(dict(base.to_dict(), timesteps=[0, 2, 1]))


def test_json_round_trip_is_exact():
    mdp = generate_tree_mdp(TreeGenConfig(3, seed=4))
    back = from_json(mdp.to_json())
    for name in ("outcome_fn", "transition_fn", "agent_reward", "principal_reward"):
        assert np.array_equal(getattr(mdp, name), getattr(back, name))
    assert back.horizon == mdp.horizon and back.gamma == mdp.gamma
    assert json.loads(mdp.to_json()) == json.loads(back.to_json())


def test_load_tolerance_accepts_rounding_noise():
    d = make_figure1_mdp().to_dict()
    d["outcome_fn"][0][0] = [0.9 + 5e-10, 0.1]
    assert from_dict(d).n_states == 3


def test_model_arrays_are_read_only():
    mdp = make_figure1_mdp()
    with pytest.raises(ValueError):
        mdp.outcome_fn[0, 0, 0] = 0.5


@pytest.mark.parametrize("b, p, value", [((1, 0), (0.9, 0.1), 0.9), ((0, 0), (0.3, 0.7), 0.0),
                                         ((0, 1.25), (0.1, 0.9), 1.125)])
def test_expected_payment(b, p, value):
    assert expected_payment(b, p) == pytest.approx(value, abs=1e-15)


def test_contract_rejects_negative_and_bad_shape():
    with pytest.raises(ValueError):
        as_contract([-0.1, 0.0])
    with pytest.raises(ValueError):
        as_contract([1.0], n_outcomes=2)
    with pytest.raises(ValueError):
        expected_payment([1, 0, 0], [0.5, 0.5])


def test_agent_view_zero_contract_free_action():
    mdp = make_figure1_mdp()
    view = AgentMDPView(mdp, principal=PrincipalPolicy.zero(mdp))
    rng = np.random.default_rng(0)
    went_right = 0
    for _ in range(2000):
        view.reset(rng)
        obs, reward, done, info = view.step(R, rng)
        assert reward == 0.0 and not done
        went_right += obs[0] == 2
    assert went_right / 2000 == pytest.approx(0.9, abs=0.02)


def test_agent_view_paid_left():
    mdp = make_figure1_mdp()
    view = AgentMDPView(mdp, principal=PrincipalPolicy(np.tile([1.0, 0.0], (3, 1))))
    rng = np.random.default_rng(1)
    for _ in range(200):
        view.reset(rng)
        _, reward, _, info = view.step(L, rng)
        assert reward == pytest.approx(-0.8 + 1.0 if info["outcome"] == L else -0.8)


def test_agent_view_terminal_sets_done():
    mdp = make_figure1_mdp()
    view = AgentMDPView(mdp, principal=PrincipalPolicy.zero(mdp))
    rng = np.random.default_rng(2)
    view.reset(rng)
    view.step(R, rng)
    obs, _, done, _ = view.step(R, rng)
    assert done and obs is None


def test_principal_view_expected_rewards():
    mdp = make_figure1_mdp()
    agent = best_response(mdp, PrincipalPolicy.zero(mdp))
    view = PrincipalMDPView(mdp, agent=agent)
    view.reset(np.random.default_rng(0))
    view.state = 1
    assert view.expected_reward([1.0, 0.0]) == pytest.approx(0.9 * (14 / 9 - 1))
    assert view.expected_reward([0.0, 0.0]) == pytest.approx(0.1 * 14 / 9)
    with pytest.raises(ValueError):
        view.expected_reward([-1.0, 0.0])


def test_agent_policy_tie_break_prefers_recommendation():
    mdp = make_figure1_mdp()
    pol = AgentPolicy(mdp.agent_reward, mdp.outcome_fn)
    b = np.array([1.0, 0.0])  # 0.9 - 0.8 == 0.1 == 0.1: tied
    assert set(pol.tied(1, b)) == {L, R}
    assert pol.act(1, b, recommended=R) == R
    assert pol.act(1, b, principal_scores=[1.0, 0.0]) == L


def test_bad_gamma_reported():
    mdp = make_figure1_mdp()
    bad = PrincipalAgentMDP(mdp.outcome_fn, mdp.transition_fn, mdp.agent_reward, mdp.principal_reward, gamma=1.5,
                            horizon=2, timestep=[0, 1, 1])
    assert any(v.startswith("gamma") for v in validate(bad))

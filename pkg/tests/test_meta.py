import numpy as np
import pytest

from contract_rl.envs import TreeGenConfig, generate_tree_mdp, make_divergence_mdp, make_figure1_mdp
from contract_rl.exact import evaluate_pair, spe_backward_induction
from contract_rl.meta import MetaRecord, MetaTrace, contraction_report, detect_cycle, run_meta
from contract_rl.mdp import PrincipalPolicy


def test_figure1_converges_to_spe():
    mdp = make_figure1_mdp()
    res = run_meta(mdp)
    assert res.trace.converged and len(res.trace) <= mdp.horizon + 1
    spe = spe_backward_induction(mdp)
    assert np.allclose(res.principal_policy.contracts, spe.principal_policy.contracts, atol=1e-9)
    assert evaluate_pair(mdp, res.principal_policy, res.agent_policy) == pytest.approx((1.0, 0.2), abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_observed_action_one_iteration(seed):
    mdp = generate_tree_mdp(TreeGenConfig(2 + seed % 4, seed=seed, observed=True))
    res = run_meta(mdp)
    assert res.trace.converged and res.trace.converged_at == 1


def test_divergence_cycles():
    res = run_meta(make_divergence_mdp(reward_s2=2.0), max_iterations=10)
    assert not res.trace.converged
    assert detect_cycle(res.trace) == 2
    second = res.trace.records[1]
    assert second.agent_q[0, 0] == pytest.approx(0.723, abs=1e-3)
    assert second.principal_q[1, 1] == pytest.approx(1.839, abs=1e-3)


def test_converged_trace_period_one():
    assert detect_cycle(run_meta(make_figure1_mdp()).trace) == 1


def _record(i, value):
    pol = PrincipalPolicy(np.array([[value, 0.0]]))
    return MetaRecord(i, pol, np.zeros((1, 2)), np.full((1, 2), value), value, 0.0, True)


def test_monotone_trace_has_no_cycle():
    trace = MetaTrace([_record(i, float(i)) for i in range(1, 4)])
    assert detect_cycle(trace) is None


def test_contraction_figure1_strictly_decreasing():
    rep = contraction_report(run_meta(make_figure1_mdp()).trace)
    d = rep.distances
    assert d[-1] == 0.0 and rep.monotone
    nonzero = d[d > 0]
    assert np.all(np.diff(nonzero) < 0)


def test_contraction_from_fixed_point_is_zero():
    mdp = make_figure1_mdp()
    spe = spe_backward_induction(mdp)
    rep = contraction_report(run_meta(mdp, init=spe.principal_policy).trace)
    assert np.all(rep.distances == 0.0)


def test_contraction_needs_convergence():
    with pytest.raises(ValueError):
        contraction_report(run_meta(make_divergence_mdp(), max_iterations=4).trace)


@pytest.mark.parametrize("seed", range(20))
def test_meta_matches_backward_induction(seed):
    mdp = generate_tree_mdp(TreeGenConfig(2 + seed % 5, seed=seed))
    res = run_meta(mdp)
    assert res.trace.converged and len(res.trace) <= mdp.horizon + 1
    spe = spe_backward_induction(mdp)
    pv, av = evaluate_pair(mdp, res.principal_policy, res.agent_policy)
    assert pv == pytest.approx(spe.principal_utility, abs=1e-9)
    assert av == pytest.approx(spe.agent_utility, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_simultaneous_variant_reaches_spe(seed):
    mdp = generate_tree_mdp(TreeGenConfig(2 + seed % 4, seed=seed))
    res = run_meta(mdp, simultaneous=True, max_iterations=40)
    assert res.trace.converged
    assert evaluate_pair(mdp, res.principal_policy, res.agent_policy)[0] == pytest.approx(
        spe_backward_induction(mdp).principal_utility, abs=1e-9)


def test_trace_jsonl_lines():
    import json
    lines = run_meta(make_figure1_mdp()).trace.to_jsonl().splitlines()
    rows = [json.loads(x) for x in lines]
    assert rows[-1]["q_supnorm_to_final"] == 0.0 and rows[-1]["policy_changed"] is False

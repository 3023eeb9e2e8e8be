import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cheapest_contract

from contract_rl.envs import TreeGenConfig, generate_tree_mdp, make_figure1_mdp
from contract_rl.lp import (build_lp, compute_d_min, error_bounds, minimal_contract, nudge_schedule,
                            observed_action_contract, solve_lp)
from contract_rl.mdp import _replace
from contract_rl.oracles import boxed, grid_reference, random_static_instance

NOISY = np.array([[0.9, 0.1], [0.1, 0.9]])
LEAF_Q = np.array([-0.8, 0.0])


def test_figure1_leaf_constraint_row():
    inst = build_lp(NOISY, LEAF_Q, 0)
    assert inst.ic_matrix.shape[0] == 1
    assert np.allclose(inst.ic_matrix[0], [0.8, -0.8])
    assert inst.ic_rhs[0] == pytest.approx(0.8)


def test_already_optimal_action_costs_nothing():
    inst = build_lp(NOISY, LEAF_Q, 1)
    assert np.all(inst.ic_rhs <= 0)
    sol = solve_lp(inst)
    assert sol.feasible and np.allclose(sol.contract, 0.0) and sol.expected_payment == 0.0


def test_figure1_leaf_contract():
    sol = minimal_contract(NOISY, LEAF_Q, 0)
    assert np.allclose(sol.contract, [1.0, 0.0], atol=1e-12)
    assert sol.expected_payment == pytest.approx(0.9, abs=1e-12)


def test_nudge_scales_binding_constraint():
    assert build_lp(NOISY, LEAF_Q, 0, nudge=0.2).ic_rhs[0] == pytest.approx(1.0)
    assert np.allclose(minimal_contract(NOISY, LEAF_Q, 0, nudge=0.2).contract, [1.25, 0.0], atol=1e-12)


def test_divergence_first_contract():
    # state s1 against the cost-minimizing agent: Qbar = (0, -1)
    sol = minimal_contract(NOISY, np.array([0.0, -1.0]), 1)
    assert np.allclose(sol.contract, [0.0, 1.25], atol=1e-12)
    assert sol.expected_payment == pytest.approx(1.125, abs=1e-12)


def test_identical_rows_infeasible():
    sol = minimal_contract(np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.0, 1.0]), 0)
    assert not sol.feasible and sol.contract is None and sol.expected_payment == np.inf


@pytest.mark.parametrize("q, a, b", [((5, 3), 1, (0, 2)), ((5, 3), 0, (0, 0)), ((2, 2), 0, (0, 0)),
                                     ((2, 2), 1, (0, 0))])
def test_observed_action_formula(q, a, b):
    got = observed_action_contract(np.array(q, float), a)
    assert np.allclose(got, b)
    assert np.allclose(minimal_contract(np.eye(2), np.array(q, float), a).contract, b, atol=1e-12)


def test_d_min_values():
    assert float(compute_d_min(make_figure1_mdp())) == pytest.approx(0.8)
    assert float(compute_d_min(generate_tree_mdp(TreeGenConfig(3, observed=True)))) == 1.0
    mdp = make_figure1_mdp()
    same = _replace(mdp, outcome_fn=np.full_like(mdp.outcome_fn, 0.5))
    d = compute_d_min(same)
    assert d.value == 0.0 and d.degenerate


def test_nudge_schedule_examples():
    assert np.all(nudge_schedule([0.0, 0.0, 0.0], 0.9) == 0.0)
    assert np.allclose(nudge_schedule([0.1, 0.1], 0.9, horizon=1), [0.38, 0.2], atol=1e-15)
    eps, T = 0.05, 6
    assert np.allclose(nudge_schedule([eps] * (T + 1), 1.0), [2 * (T - t + 1) * eps for t in range(T + 1)])


def test_error_bounds_examples():
    zero = error_bounds([0, 0], [0, 0], 0.9, 0.8)
    assert (zero.D0, zero.E0, zero.utility_gap) == (0.0, 0.0, 0.0)
    eb = error_bounds([0.1, 0.1], [0.1, 0.1], 1.0, 0.8)
    assert eb.D0 == pytest.approx(0.2) and eb.E0 == pytest.approx(0.2)
    assert eb.utility_gap == pytest.approx(1.15, abs=1e-12)
    eb = error_bounds([0.3, 0.7, 0.2], [0.05, 0.4, 0.4], 0.0, 0.5)
    assert eb.utility_gap == pytest.approx(2 * 0.3 + 2 * 0.05 / 0.5, abs=1e-12)


def _ic_holds(O, q, a, b, slack=1e-9):
    vals = O @ b + q
    return vals[a] >= vals.max() - slack


# Expected payments from scipy's HiGHS on the first 20 instances drawn with
# default_rng(7); -1 marks an infeasible recommendation.
HIGHS_FROZEN = [0.0, 0.0, -1.0, 0.0, 0.091496520281, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.723450151367, 2.040838658621, 0.0, 0.0, 1.279536946043, 1.946429072543]


def test_simplex_matches_frozen_reference():
    rng = np.random.default_rng(7)
    got = [minimal_contract(*random_static_instance(rng)).expected_payment for _ in range(len(HIGHS_FROZEN))]
    assert np.allclose(np.nan_to_num(got, posinf=-1.0), HIGHS_FROZEN, atol=1e-9)


def test_simplex_agrees_with_highs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        O, q, a = random_static_instance(rng)
        ours = minimal_contract(O, q, a)
        ref = cheapest_contract(O, q, a)
        assert ours.feasible == (ref is not None)
        if ref is not None:
            assert ours.expected_payment == pytest.approx(O[a] @ ref, abs=1e-8)
            assert _ic_holds(O, q, a, ours.contract)


def test_grid_oracle_close():
    rng = np.random.default_rng(3)
    for _ in range(15):
        O, q, a = random_static_instance(rng, max_outcomes=3)
        sol = solve_lp(boxed(build_lp(O, q, a)))
        ref = grid_reference(O, q, a)
        assert sol.feasible == np.isfinite(ref)
        if sol.feasible:
            assert abs(sol.expected_payment - ref) <= 1e-2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_contract_is_ic_and_minimal(seed):
    O, q, a = random_static_instance(np.random.default_rng(seed))
    sol = minimal_contract(O, q, a)
    ref = cheapest_contract(O, q, a)
    assert sol.feasible == (ref is not None)
    if sol.feasible:
        assert np.all(sol.contract >= 0)
        assert _ic_holds(O, q, a, sol.contract)
        assert sol.expected_payment <= O[a] @ ref + 1e-8

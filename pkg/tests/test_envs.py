import numpy as np
import pytest

from contract_rl.envs import (COOPERATE, DEFECT, CoinGameState, TreeGenConfig, coin_game_reset, coin_game_step,
                              generate_tree_mdp, make_coin_game, make_divergence_mdp, make_figure1_mdp,
                              make_prisoners_dilemma)
from contract_rl.envs.coin import BLUE, DOWN, LEFT, RED, RIGHT, UP, decode, encode
from contract_rl.exact import spe_backward_induction
from contract_rl.mdp import validate

RNG = np.random.default_rng(0)


def state(red, blue, coin, color, step=0):
    return CoinGameState(3, red, blue, coin, color, step)


def test_red_collects_own_coin():
    nxt, r, done = coin_game_step(state(0, 8, 1, RED), (RIGHT, UP), RNG)
    assert r.tolist() == [1.0, 0.0] and not done
    assert nxt.red == 1 and nxt.blue == 5 and nxt.coin not in (1, 5)


def test_blue_collects_other_coin():
    _, r, _ = coin_game_step(state(0, 2, 1, RED), (UP, LEFT), RNG)
    assert r.tolist() == [0.0, 0.2]


def test_nobody_on_coin():
    nxt, r, _ = coin_game_step(state(0, 8, 4, BLUE), (LEFT, RIGHT), RNG)
    assert r.tolist() == [0.0, 0.0]
    assert (nxt.red, nxt.blue, nxt.coin, nxt.color) == (0, 8, 4, BLUE)  # moves into walls are clamped


def test_both_collect_simultaneously():
    _, r, _ = coin_game_step(state(3, 5, 4, BLUE), (RIGHT, LEFT), RNG)
    assert r.tolist() == [0.2, 1.0]


def test_episode_ends_at_step_limit():
    s = state(0, 8, 4, RED, step=19)
    assert coin_game_step(s, (UP, UP), RNG)[2]
    assert not coin_game_step(state(0, 8, 4, RED, step=3), (UP, UP), RNG)[2]


def test_reset_keeps_coin_off_players():
    rng = np.random.default_rng(5)
    for _ in range(500):
        s = coin_game_reset(rng)
        assert s.coin not in (s.red, s.blue) and s.step_count == 0


def test_state_validation():
    with pytest.raises(ValueError):
        state(9, 0, 1, RED)
    with pytest.raises(ValueError):
        state(0, 0, 1, 2)


def test_encoding_round_trip():
    for idx in range(2 * 9 ** 3):
        assert encode(decode(idx)) == idx


def test_tables_match_step_function():
    game = make_coin_game()
    assert (game.n_states, game.n_joint, game.horizon) == (1458, 16, 20)
    rng = np.random.default_rng(1)
    for _ in range(300):
        s = decode(int(rng.integers(game.n_states)))
        if s.coin in (s.red, s.blue):
            continue
        j = int(rng.integers(16))
        acts = divmod(j, 4)
        nxt, r, _ = coin_game_step(s, acts, rng)
        sid = encode(s)
        assert np.array_equal(game.rewards[sid, j], r)
        support = game.next_state[sid, j][game.next_prob[sid, j] > 0]
        assert encode(nxt) in support
        if r.sum() == 0:
            assert support.tolist() == [encode(nxt)]


def test_respawn_distribution_matches_table():
    game = make_coin_game()
    s = state(0, 8, 1, RED)
    sid, j = encode(s), game.joint_index((RIGHT, UP))
    rng = np.random.default_rng(2)
    draws = [encode(coin_game_step(s, (RIGHT, UP), rng)[0]) for _ in range(14_000)]
    ids, counts = np.unique(draws, return_counts=True)
    table = {}
    for nid, p in zip(game.next_state[sid, j].tolist(), game.next_prob[sid, j].tolist()):
        table[nid] = table.get(nid, 0.0) + p  # unused slots repeat the last id with probability 0
    assert set(ids.tolist()) == set(table)
    for i, c in zip(ids, counts):
        assert c / len(draws) == pytest.approx(table[i], abs=0.01)


def test_initial_distribution():
    game = make_coin_game()
    assert game.initial.sum() == pytest.approx(1.0)
    for sid in np.flatnonzero(game.initial):
        s = decode(int(sid))
        assert s.coin not in (s.red, s.blue)


def test_prisoners_payoffs():
    g = make_prisoners_dilemma()
    R = g.rewards[0]
    assert R[g.joint_index((COOPERATE, COOPERATE))].tolist() == [3, 3]
    assert R[g.joint_index((COOPERATE, DEFECT))].tolist() == [0, 4]
    assert R[g.joint_index((DEFECT, COOPERATE))].tolist() == [4, 0]
    assert R[g.joint_index((DEFECT, DEFECT))].tolist() == [2, 2]
    assert np.all(g.next_state == -1) and g.horizon == 1


def test_toy_models_valid():
    assert validate(make_figure1_mdp()) == []
    assert validate(make_divergence_mdp()) == []


def test_tree_shape_and_determinism():
    big = generate_tree_mdp(TreeGenConfig(10, seed=3))
    assert big.n_states == 1023 and big.n_actions == 2 and big.n_outcomes == 2
    assert validate(big) == []
    again = generate_tree_mdp(TreeGenConfig(10, seed=3))
    assert big.to_json() == again.to_json()
    # heap layout: children strictly deeper, so the graph is acyclic
    src, o, dst = np.nonzero(big.transition_fn)
    assert np.all(dst > src) and np.all(big.timestep[dst] == big.timestep[src] + 1)


def test_tree_config_validation():
    with pytest.raises(ValueError):
        TreeGenConfig(0)
    with pytest.raises(ValueError):
        TreeGenConfig(3, outcome_prob=0.4)


@pytest.mark.slow
def test_depth10_spe_incentivizes_costly_action_often():
    share = []
    for seed in range(20):
        spe = spe_backward_induction(generate_tree_mdp(TreeGenConfig(10, seed=seed)))
        share.append(np.mean(spe.principal_policy.recommended == 1))
    assert np.mean(share) == pytest.approx(0.6, abs=0.1)

"""The three-state worked example and the two-state cycling example."""
import numpy as np

from ..mdp import PrincipalAgentMDP, PrincipalPolicy

# outcome index 0 = L, 1 = R; action index 0 = a_L, 1 = a_R
_NOISY = [[0.9, 0.1], [0.1, 0.9]]


def make_figure1_mdp():
    """s0 branches to s_L or s_R by outcome; each leaf takes one more decision."""
    O = np.array([_NOISY] * 3)
    T = np.zeros((3, 2, 3))
    T[0, 0, 1] = 1.0
    T[0, 1, 2] = 1.0
    r = np.tile([-0.8, 0.0], (3, 1))
    rp = np.tile([14.0 / 9.0, 0.0], (3, 1))
    return PrincipalAgentMDP(
        O, T, r, rp, gamma=1.0, horizon=2, timestep=[0, 1, 1],
        state_names=("s0", "sL", "sR"), action_names=("aL", "aR"), outcome_names=("L", "R"),
    )


def figure1_threat_policy():
    """Pay (0.9, 0) at s0 and (1, 0) at s_L; nothing at s_R."""
    return PrincipalPolicy(np.array([[0.9, 0.0], [1.0, 0.0], [0.0, 0.0]]))


def make_divergence_mdp(reward_s1=1.5, reward_s2=1.5):
    """Two states, outcome o_i moves to s_i; the meta-algorithm cycles here.

    The principal earns ``reward_s1`` on leaving s1 and ``reward_s2`` on
    leaving s2. The published q tables correspond to ``reward_s2=2.0``.
    """
    O = np.array([_NOISY] * 2)
    T = np.zeros((2, 2, 2))
    T[:, 0, 0] = 1.0
    T[:, 1, 1] = 1.0
    r = np.array([[0.0, -1.0], [-2.0, 0.0]])
    rp = np.array([[0.0, reward_s1], [reward_s2, 0.0]])
    return PrincipalAgentMDP(
        O, T, r, rp, gamma=0.9, horizon=None,
        state_names=("s1", "s2"), action_names=("a1", "a2"), outcome_names=("o1", "o2"),
    )

"""One-shot Prisoner's Dilemma as a two-agent game."""
import numpy as np

from ..multi import MultiAgentGame

COOPERATE, DEFECT = 0, 1
PAYOFFS = {  # (row, column) -> (row reward, column reward)
    (COOPERATE, COOPERATE): (3.0, 3.0),
    (COOPERATE, DEFECT): (0.0, 4.0),
    (DEFECT, COOPERATE): (4.0, 0.0),
    (DEFECT, DEFECT): (2.0, 2.0),
}


def make_prisoners_dilemma(alpha=0.1, gamma=0.99):
    rewards = np.zeros((1, 4, 2))
    for (a, b), r in PAYOFFS.items():
        rewards[0, 2 * a + b] = r
    return MultiAgentGame(
        n_agents=2, n_actions=2,
        next_state=np.full((1, 4, 1), -1), next_prob=np.ones((1, 4, 1)),
        rewards=rewards, initial=np.ones(1), horizon=1, gamma=gamma, alpha=alpha,
        name="prisoners-dilemma",
    )

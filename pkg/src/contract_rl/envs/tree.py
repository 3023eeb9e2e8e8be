"""Random complete binary decision trees."""
from dataclasses import dataclass

import numpy as np

from ..mdp import HIDDEN, OBSERVED, PrincipalAgentMDP


@dataclass(frozen=True)
class TreeGenConfig:
    depth: int
    seed: int = 0
    outcome_prob: float = 0.9
    observed: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if not 0.5 < self.outcome_prob <= 1.0:
            raise ValueError(f"outcome_prob must be in (0.5, 1], got {self.outcome_prob}")


def generate_tree_mdp(config):
    """Heap-indexed tree: outcome o_0 leads to child 2s+1, o_1 to 2s+2.

    Only a_1 / o_1 carry rewards: the agent pays a cost drawn as U[0, 1-v],
    v ~ U[0, 1]; the principal earns U[0, 2-v], v ~ U[0, 2].
    """
    d = config.depth
    S = 2 ** d - 1
    rng = np.random.default_rng(config.seed)
    p = 1.0 if config.observed else config.outcome_prob
    O = np.empty((S, 2, 2))
    O[:, 0] = [p, 1.0 - p]
    O[:, 1] = [1.0 - p, p]
    T = np.zeros((S, 2, S))
    inner = np.arange(2 ** (d - 1) - 1)
    T[inner, 0, 2 * inner + 1] = 1.0
    T[inner, 1, 2 * inner + 2] = 1.0
    r = np.zeros((S, 2))
    rp = np.zeros((S, 2))
    for s in range(S):
        v = rng.uniform(0.0, 1.0)
        r[s, 1] = -rng.uniform(0.0, 1.0 - v)
        v = rng.uniform(0.0, 2.0)
        rp[s, 1] = rng.uniform(0.0, 2.0 - v)
    ts = np.floor(np.log2(np.arange(S) + 1)).astype(np.int64)
    return PrincipalAgentMDP(O, T, r, rp, gamma=1.0, horizon=d, timestep=ts,
                             variant=OBSERVED if config.observed else HIDDEN)

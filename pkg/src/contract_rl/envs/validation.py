"""Validate a principal policy against an exactly best-responding agent."""
from dataclasses import dataclass

import numpy as np

from ..exact import best_response, evaluate_pair, spe_backward_induction
from ..lp import minimal_contract
from ..mdp import PrincipalPolicy


@dataclass(frozen=True)
class ValidationRecord:
    principal_utility: float
    agent_utility: float
    utility_ratio: float
    accuracy: float


def learned_policy(mdp, q, qbar, nudge=0.0):
    """Recommend argmax q and price it with the LP under the learned truncated Q."""
    S, n, m = mdp.outcome_fn.shape
    rec = np.argmax(q, axis=1)
    rho = np.zeros((S, m))
    for s in range(S):
        sol = minimal_contract(mdp.outcome_fn[s], qbar[s], rec[s], nudge)
        if sol.feasible:
            rho[s] = sol.contract
    return PrincipalPolicy(rho, rec)


def oracle_validate(mdp, rho, learned_q=None, spe=None):
    """Utilities of ``rho`` against the exact best response, relative to the SPE.

    Accuracy is the share of states where argmax ``learned_q`` (or the
    policy's own recommendation) matches the SPE recommendation.
    """
    spe = spe if spe is not None else spe_backward_induction(mdp)
    agent = best_response(mdp, rho)
    # the oracle agent does not know the recommendation; ties go the principal's way
    bare = PrincipalPolicy(rho.contracts)
    vp, va = evaluate_pair(mdp, bare, agent)
    if learned_q is not None:
        rec = np.argmax(learned_q, axis=1)
    else:
        rec = rho.recommended
    acc = float(np.mean(rec == spe.principal_policy.recommended))
    ratio = vp / spe.principal_utility if spe.principal_utility != 0 else np.nan
    return ValidationRecord(vp, va, float(ratio), acc)

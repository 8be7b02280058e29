"""Trajectory-level probability under a scorable policy.

The probability of a trajectory factorizes over its steps:
``p(e | u) = prod_t p(z_t, a_t | h_{t-1})``, so its log is a sum of per-step
log-probabilities.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from sand.core.errors import UnscorableError
from sand.core.types import History, Trajectory

if TYPE_CHECKING:
    from sand.policy.base import Policy

# Log-probability of a sample outside a distribution's support.
OFF_SUPPORT = -math.inf


def is_off_support(log_prob: float) -> bool:
    return log_prob == OFF_SUPPORT


def trajectory_log_prob(policy: "Policy", e: Trajectory) -> float:
    """Sum of ``score_step`` over every step, each conditioned on the expert prefix.

    Raises:
        UnscorableError: the policy does not expose per-step probabilities.
    """
    if not getattr(policy, "scorable", False):
        raise UnscorableError(f"policy '{type(policy).__name__}' cannot score steps")

    history = History(instruction=e.instruction)
    total = 0.0
    for step in e.steps:
        total += policy.score_step(history, step.sample)
        if is_off_support(total):
            return OFF_SUPPORT
        history = history.append(step)
    return total

"""Trajectory-level analysis metrics: efficiency, deliberation rate, difficulty and tokens."""

from __future__ import annotations

import math
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from sand.core.errors import DivisionDomainError, EmptyEvaluationError, PreconditionError, TooFewTasksError
from sand.core.text import count_tokens, is_deliberative_text
from sand.core.types import DeliberationTrajectory, Trajectory

if TYPE_CHECKING:
    from sand.metrics.evaluation import EvalReport

__all__ = [
    "Band",
    "band_histogram",
    "count_tokens",
    "deliberation_rate",
    "difficulty_bands",
    "format_multiplier",
    "per_step_reward",
    "token_multiplier",
]


class Band(str, Enum):
    HARD = "Hard"
    MEDIUM = "Medium"
    EASY = "Easy"


def per_step_reward(reward: float, steps: int) -> float:
    if steps < 1:
        raise PreconditionError(f"per-step reward needs at least one step, got {steps}")
    return reward / steps


def deliberation_rate(traj: Trajectory | DeliberationTrajectory) -> float:
    """
    Fraction of deliberative steps. Synthesized trajectories use their stored
    flags; anything else is classified from the thought text.
    """
    if not traj.steps:
        raise PreconditionError("deliberation rate of an empty trajectory")
    if isinstance(traj, DeliberationTrajectory):
        flags = [step.deliberated for step in traj.steps]
    else:
        flags = [is_deliberative_text(step.thought.text) for step in traj.steps]
    return sum(flags) / len(flags)


def difficulty_bands(base_rewards: dict[str, float]) -> dict[str, Band]:
    """
    Tertile bands over a base policy's rewards. A reward at or below the
    first tertile is Hard, at or below the second Medium; ties at a
    boundary fall into the lower band.
    """
    n = len(base_rewards)
    if n < 3:
        raise TooFewTasksError(f"difficulty bands need at least 3 tasks, got {n}")
    ordered = np.sort(np.fromiter(base_rewards.values(), dtype=float))
    q1 = ordered[math.ceil(n / 3) - 1]
    q2 = ordered[math.ceil(2 * n / 3) - 1]

    def band(reward: float) -> Band:
        if reward <= q1:
            return Band.HARD
        if reward <= q2:
            return Band.MEDIUM
        return Band.EASY

    return {task: band(reward) for task, reward in base_rewards.items()}


def _avg_tokens(value: "EvalReport | float") -> float:
    if isinstance(value, (int, float)):
        return float(value)
    if not value.per_task:
        raise EmptyEvaluationError("token multiplier over an empty report")
    return value.avg_tokens


def token_multiplier(report_a: "EvalReport | float", report_b: "EvalReport | float") -> float:
    """Average tokens of ``report_b`` relative to ``report_a``."""
    denominator = _avg_tokens(report_a)
    if denominator == 0:
        raise DivisionDomainError("reference report averages zero tokens")
    return _avg_tokens(report_b) / denominator


def format_multiplier(x: float) -> str:
    return f"{x:.1f}×"


def band_histogram(bands: dict[str, Band], rates: dict[str, float]) -> pd.DataFrame:
    """Per-task deliberation rates grouped by band, for distribution plots."""
    rows = [
        {"task_id": task, "band": band.value, "deliberation_rate": rates[task]}
        for task, band in bands.items()
        if task in rates
    ]
    order = {band.value: i for i, band in enumerate(Band)}
    frame = pd.DataFrame(rows, columns=["task_id", "band", "deliberation_rate"])
    if frame.empty:
        return frame
    frame["_order"] = frame["band"].map(order)
    return frame.sort_values(["_order", "task_id"]).drop(columns="_order").reset_index(drop=True)

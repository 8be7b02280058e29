"""Self-consistency action sampling along an expert trajectory.

At every expert step the current policy draws N actions from the expert
history. If the N draws together with the expert action contain more than
one distinct action, the step is uncertain and gets deliberated.
"""

from __future__ import annotations

from collections import Counter
from enum import Enum
from typing import Callable

from pydantic import BaseModel, ConfigDict, model_validator

from sand.core.errors import PreconditionError, ReplayDivergenceError
from sand.core.types import Action, History, Step, StepSample, Thought, Trajectory
from sand.core.utils import derive_seed
from sand.env.base import EnvBackend
from sand.env.task import TaskSpec
from sand.policy.base import Policy

SAMPLE_TEMPERATURE = 1.0


class SamplingMode(str, Enum):
    """Where the N candidates at a step come from."""

    # N independent policy draws.
    SELF_CONSISTENCY = "self_consistency"
    # One base-model completion listing N alternatives.
    IN_CONTEXT = "in_context"


class CandidateSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    step_index: int
    history: History
    expert: StepSample
    sampled: tuple[StepSample, ...]
    unique_actions: tuple[tuple[Action, int], ...]

    @model_validator(mode="after")
    def _check(self) -> "CandidateSet":
        if sum(count for _, count in self.unique_actions) != len(self.sampled) + 1:
            raise ValueError("unique action counts must sum to N + 1")
        if not self.unique_actions or self.unique_actions[0][0] != self.expert.action:
            raise ValueError("the expert action must lead the unique actions")
        return self

    @property
    def n(self) -> int:
        return len(self.sampled)

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(action for action, _ in self.unique_actions)

    def first_sample(self, action: Action) -> StepSample:
        """The earliest draw with ``action``, or the expert step for the expert action."""
        if action == self.expert.action:
            return self.expert
        return next(s for s in self.sampled if s.action == action)


Draw = Callable[[History, Step], CandidateSet]


def count_unique(expert: StepSample, sampled: tuple[StepSample, ...]) -> tuple[tuple[Action, int], ...]:
    """Counts over canonical actions: expert first, then order of first appearance."""
    counts = Counter(s.action for s in sampled)
    counts[expert.action] += 1
    order = [expert.action]
    for s in sampled:
        if s.action not in order:
            order.append(s.action)
    return tuple((action, counts[action]) for action in order)


def sample_candidates(
    policy: Policy,
    history: History,
    expert_step: Step,
    n: int,
    seed: int,
    temperature: float = SAMPLE_TEMPERATURE,
) -> CandidateSet:
    """Draw ``n`` independent steps at ``history`` and pool them with the expert action."""
    if n < 1:
        raise PreconditionError(f"need at least one sample, got N={n}")
    t = len(history.steps) + 1
    sampled = tuple(
        policy.sample_step(history, temperature, derive_seed(seed, t, i)) for i in range(n)
    )
    expert = StepSample(thought=Thought.plain(), action=expert_step.action)
    return CandidateSet(
        step_index=t,
        history=history,
        expert=expert,
        sampled=sampled,
        unique_actions=count_unique(expert, sampled),
    )


def needs_deliberation(c: CandidateSet) -> bool:
    return len(c.unique_actions) > 1


def scan_trajectory(
    policy: Policy,
    backend: EnvBackend,
    spec: TaskSpec,
    e: Trajectory,
    n: int,
    seed: int,
    temperature: float = SAMPLE_TEMPERATURE,
    stop_at: int | None = None,
    draw: Draw | None = None,
) -> list[CandidateSet]:
    """
    One candidate set per expert step, each conditioned on the true expert history.

    The environment is stepped alongside so a trajectory the environment
    disagrees with is caught at the step where it diverges. ``draw`` replaces
    the policy draws, e.g. with in-context proposals.
    """
    if draw is None:

        def draw(history: History, expert_step: Step) -> CandidateSet:
            return sample_candidates(policy, history, expert_step, n, seed, temperature)

    handle, initial = backend.reset(spec)
    if e.initial_observation is not None and e.initial_observation.text != initial.text:
        handle.close()
        raise ReplayDivergenceError(
            "reset observation differs from the recorded one",
            step=0,
            expected=e.initial_observation.text,
            got=initial.text,
        )
    history = History(instruction=e.instruction, initial_observation=initial)
    candidates: list[CandidateSet] = []
    last = len(e.steps) if stop_at is None else min(stop_at, len(e.steps))
    try:
        for t, expert_step in enumerate(e.steps[:last], start=1):
            candidates.append(draw(history, expert_step))
            if t == len(e.steps):
                break
            if handle.terminated:
                raise ReplayDivergenceError("episode ended before the recorded trajectory did", step=t)
            outcome = handle.step(expert_step.action)
            recorded = expert_step.observation
            if recorded is not None and recorded.text != outcome.observation.text:
                raise ReplayDivergenceError(
                    f"observation mismatch after '{expert_step.action}'",
                    step=t,
                    expected=recorded.text,
                    got=outcome.observation.text,
                )
            history = history.append(expert_step)
    finally:
        handle.close()
    return candidates

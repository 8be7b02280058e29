from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sand.core.errors import PreconditionError
from sand.core.types import Action, Observation, Step, StepSample, Trajectory
from sand.core.utils import derive_seed, stable_key
from sand.deliberation.sampler import SAMPLE_TEMPERATURE, CandidateSet, needs_deliberation
from sand.env.base import EnvBackend, replay_prefix
from sand.env.task import TaskSpec
from sand.policy.base import Policy, run_policy


class RolloutRecord(BaseModel):
    """A candidate executed from a branch point through to the end of the episode."""

    model_config = ConfigDict(frozen=True)

    step_index: int
    candidate: StepSample
    continuation: tuple[Step, ...]
    final_reward: float = Field(ge=0.0, le=1.0)
    truncated: bool = False
    is_expert_tail: bool = False

    @model_validator(mode="after")
    def _check(self) -> "RolloutRecord":
        if not self.continuation:
            raise ValueError("a rollout holds at least the candidate's own step")
        if self.continuation[0].action != self.candidate.action:
            raise ValueError("a rollout must start with its candidate action")
        return self

    @property
    def action(self) -> Action:
        return self.candidate.action


def execute(
    policy: Policy,
    backend: EnvBackend,
    spec: TaskSpec,
    e: Trajectory,
    t: int,
    candidate: StepSample,
    seed: int,
    temperature: float = SAMPLE_TEMPERATURE,
) -> RolloutRecord:
    """Replay ``t-1`` expert steps, take ``candidate``, then let ``policy`` finish the episode."""
    if not 1 <= t <= len(e.steps):
        raise PreconditionError(f"branch step {t} outside [1, {len(e.steps)}]")
    handle = replay_prefix(backend, spec, e, t - 1)
    try:
        history = e.history(t, handle.initial_observation)
        outcome = handle.step(candidate.action)
        first = Step(
            thought=candidate.thought,
            action=candidate.action,
            observation=Observation(text=outcome.observation.text),
        )
        history = history.append(first)
        rollout_seed = derive_seed(seed, t, stable_key(candidate.action.canonical))
        rest, _ = run_policy(policy, handle, history, temperature, rollout_seed)
        if not handle.terminated:
            handle.terminate()
        return RolloutRecord(
            step_index=t,
            candidate=candidate,
            continuation=(first, *rest),
            final_reward=handle.score(),
            truncated=handle.truncated,
        )
    finally:
        handle.close()


def expert_tail(spec: TaskSpec, e: Trajectory, t: int) -> RolloutRecord:
    """The expert's own continuation from step ``t``; its reward is the recorded one."""
    if not 1 <= t <= len(e.steps):
        raise PreconditionError(f"tail start {t} outside [1, {len(e.steps)}]")
    tail = e.steps[t - 1 :]
    return RolloutRecord(
        step_index=t,
        candidate=tail[0].sample,
        continuation=tail,
        final_reward=e.reward,
        truncated=False,
        is_expert_tail=True,
    )


def rollout_unique(
    policy: Policy,
    backend: EnvBackend,
    spec: TaskSpec,
    e: Trajectory,
    t: int,
    c: CandidateSet,
    seed: int,
    reroll_expert: bool = False,
    temperature: float = SAMPLE_TEMPERATURE,
) -> dict[Action, RolloutRecord]:
    """One rollout per distinct action; the expert action is grounded by its own tail."""
    if not needs_deliberation(c):
        raise PreconditionError(f"step {t} has a single candidate action; nothing to roll out")
    records: dict[Action, RolloutRecord] = {}
    for action in c.actions:
        if action == c.expert.action and not reroll_expert:
            records[action] = expert_tail(spec, e, t)
            continue
        candidate = c.first_sample(action)
        if action == c.expert.action:
            candidate = e.steps[t - 1].sample
        records[action] = execute(policy, backend, spec, e, t, candidate, seed, temperature)
    return records

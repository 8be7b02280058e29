from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sand.core.errors import ConfigError, ScriptExhaustedError, UnscorableError
from sand.core.text import render_first_turn, render_step_text, split_step_text
from sand.core.tools.log import log
from sand.core.types import History, Observation, Step, StepSample, Thought, Trajectory, canonicalize
from sand.core.utils import derive_seed
from sand.env.base import EnvHandle

BackendName = Literal["scripted_expert", "tabular", "remote_chat", "template_stub"]


class PolicyConfig(BaseModel):
    """Backend selection plus backend-specific knobs."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: BackendName = "template_stub"
    temperature: float = Field(default=1.0, ge=0.0)
    seed: int = 0
    # remote_chat
    model: str | None = None
    endpoint: str | None = None
    max_tokens: int | None = Field(default=None, ge=1)
    retries: int = Field(default=3, ge=1)
    backoff: float = Field(default=0.5, ge=0.0)
    timeout: float = Field(default=30.0, gt=0.0)
    max_in_flight: int = Field(default=4, ge=1)
    env_prompt: str = "alfworld"
    # tabular / scripted_expert
    path: str | None = None
    # template_stub
    actions: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_backend_fields(self) -> "PolicyConfig":
        if self.backend == "remote_chat" and not self.model:
            raise ConfigError("remote_chat backend needs a 'model'")
        if self.backend in ("tabular", "scripted_expert") and not self.path:
            raise ConfigError(f"{self.backend} backend needs a 'path'")
        return self


class Policy(ABC):
    """!
    The acting agent: draws one (thought, action) step given a history.

    Policies are immutable once built and may be shared across threads.
    """

    scorable: bool = False

    @abstractmethod
    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        """!
        Draw one step.

        @param history Interaction history up to the current step.
        @param temperature Decoding temperature; 0 means greedy.
        @param seed Seed for local backends.
        @return The sampled thought and action.
        """

    def score_step(self, history: History, sample: StepSample) -> float:
        """Log-probability of ``sample`` at ``history``; only tabular backends support it."""
        raise UnscorableError(f"policy '{type(self).__name__}' cannot score steps")


class CompletionModel(ABC):
    """The frozen base model used for critiques and deliberation synthesis."""

    @abstractmethod
    def complete_text(self, prompt: str, temperature: float) -> str:
        """Return one completion of ``prompt``."""


def parse_step_text(text: str) -> StepSample:
    """Parse a "Thought: ... Action: ..." turn; action-only turns have an empty thought."""
    thought, action = split_step_text(text)
    return StepSample(thought=Thought.plain(thought), action=canonicalize(action))


def history_to_messages(history: History, system_prompt: str) -> list[dict[str, str]]:
    """
    Chat messages for a history: system prompt, the opening user turn, then
    alternating assistant steps and observations.
    """
    initial = history.initial_observation
    first = render_first_turn(history.instruction.text, initial.text if initial else None)
    messages = [{"role": "system", "content": system_prompt}, {"role": "user", "content": first}]
    for step in history.steps:
        messages.append(
            {"role": "assistant", "content": render_step_text(step.thought.text, str(step.action))}
        )
        if step.observation is not None:
            messages.append({"role": "user", "content": step.observation.text})
    return messages


def run_policy(
    policy: Policy,
    handle: EnvHandle,
    history: History,
    temperature: float,
    seed: int,
) -> tuple[list[Step], History]:
    """
    Let ``policy`` act in ``handle`` until the episode ends.

    A scripted policy running out of script ends the episode early.
    Returns the steps taken and the extended history.
    """
    steps: list[Step] = []
    while not handle.terminated:
        draw_seed = derive_seed(seed, len(history.steps))
        try:
            sample = policy.sample_step(history, temperature, draw_seed)
        except ScriptExhaustedError:
            log.debug(f"script exhausted at step {len(history.steps) + 1}; ending episode")
            handle.terminate()
            break
        outcome = handle.step(sample.action)
        step = Step(
            thought=sample.thought,
            action=sample.action,
            observation=Observation(text=outcome.observation.text),
        )
        steps.append(step)
        history = history.append(step)
    return steps, history


def greedy_rollout(
    policy: Policy,
    handle: EnvHandle,
    history: History,
    max_steps: int | None = None,
    seed: int = 0,
) -> Trajectory:
    """
    Act at temperature 0 from ``history`` until done and return the whole trajectory.

    ``max_steps`` additionally caps the number of new steps.
    """
    if max_steps is not None and max_steps < handle.spec.max_steps - handle.steps_taken:
        capped = _StepCap(policy, len(history.steps) + max_steps)
        steps, history = run_policy(capped, handle, history, 0.0, seed)
    else:
        steps, history = run_policy(policy, handle, history, 0.0, seed)
    if not history.steps:
        raise ScriptExhaustedError("policy produced no steps")
    if not handle.terminated:
        handle.terminate()
    return Trajectory(
        instruction=history.instruction,
        steps=history.steps,
        reward=handle.score(),
        initial_observation=history.initial_observation,
    )


class _StepCap(Policy):
    def __init__(self, inner: Policy, limit: int) -> None:
        self.inner = inner
        self.limit = limit

    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        if len(history.steps) >= self.limit:
            raise ScriptExhaustedError("step cap reached")
        return self.inner.sample_step(history, temperature, seed)

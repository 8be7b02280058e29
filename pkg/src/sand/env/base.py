from __future__ import annotations

from abc import ABC, abstractmethod

from pydantic import BaseModel, ConfigDict, model_validator

from sand.core.errors import (
    EpisodeClosedError,
    EpisodeOpenError,
    PreconditionError,
    ReplayDivergenceError,
)
from sand.core.tools.log import log
from sand.core.types import Action, Observation, Trajectory
from sand.env.task import TaskSpec


class EnvOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    observation: Observation
    done: bool
    reward_if_done: float | None = None

    @model_validator(mode="after")
    def _reward_iff_done(self) -> "EnvOutcome":
        if self.done != (self.reward_if_done is not None):
            raise ValueError("reward_if_done must be present exactly when done")
        if self.reward_if_done is not None and not 0.0 <= self.reward_if_done <= 1.0:
            raise ValueError(f"reward {self.reward_if_done} outside [0, 1]")
        return self


class EnvHandle(ABC):
    """!
    One episode of one task. Handles are single-session and not shareable;
    open as many as needed to run episodes concurrently.
    """

    def __init__(self, spec: TaskSpec) -> None:
        self.spec = spec
        self.steps_taken = 0
        self._terminated = False
        self.initial_observation: Observation | None = None

    @property
    def terminated(self) -> bool:
        return self._terminated

    @property
    def truncated(self) -> bool:
        """Whether the episode ran into its step limit."""
        return self.steps_taken >= self.spec.max_steps

    def step(self, action: Action) -> EnvOutcome:
        """!
        Execute one action.

        @param action The action to execute.
        @return The feedback, with the score attached when the episode ended.
        """
        if self._terminated:
            raise EpisodeClosedError(f"task '{self.spec.id}' already terminated")
        outcome = self._step(action)
        self.steps_taken += 1
        if not outcome.done and self.truncated:
            # The step limit ends the episode whatever the backend says.
            self._terminated = True
            return EnvOutcome(observation=outcome.observation, done=True, reward_if_done=self._score())
        if outcome.done:
            self._terminated = True
        return outcome

    def score(self) -> float:
        if not self._terminated:
            raise EpisodeOpenError(f"task '{self.spec.id}' is still running")
        return self._score()

    def terminate(self) -> None:
        """Close the episode early; the score is whatever has been achieved."""
        self._terminated = True

    def close(self) -> None:
        """Release resources held by the session."""

    @abstractmethod
    def _step(self, action: Action) -> EnvOutcome:
        """Backend-specific transition. Must return done=True when the episode ends."""

    @abstractmethod
    def _score(self) -> float:
        """Backend-specific score of a terminated episode."""

    def __enter__(self) -> "EnvHandle":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


class EnvBackend(ABC):
    """Factory of episodes for one family of environments."""

    @abstractmethod
    def reset(self, spec: TaskSpec) -> tuple[EnvHandle, Observation]:
        """!
        Start a fresh episode.

        @param spec The task to load.
        @return The new handle and the initial observation.
        """


def step(env: EnvHandle, a: Action) -> EnvOutcome:
    return env.step(a)


def score(env: EnvHandle) -> float:
    return env.score()


def replay_prefix(backend: EnvBackend, spec: TaskSpec, e: Trajectory, t: int) -> EnvHandle:
    """
    Reset a fresh episode and replay the first ``t`` actions of ``e``.

    Every replayed observation must match the recorded one; steps recorded
    without an observation are not compared.

    Raises:
        ReplayDivergenceError: the environment disagrees with the record
            (``step`` is the 1-based index of the offending step, 0 for
            the reset observation).
    """
    if not 0 <= t <= len(e.steps):
        raise PreconditionError(f"replay length {t} outside [0, {len(e.steps)}]")

    handle, initial = backend.reset(spec)
    handle.initial_observation = initial
    if e.initial_observation is not None and e.initial_observation.text != initial.text:
        handle.close()
        raise ReplayDivergenceError(
            "reset observation differs from the recorded one",
            step=0,
            expected=e.initial_observation.text,
            got=initial.text,
        )
    for index, recorded in enumerate(e.steps[:t], start=1):
        if handle.terminated:
            handle.close()
            raise ReplayDivergenceError(
                "episode ended before the recorded trajectory did", step=index
            )
        outcome = handle.step(recorded.action)
        if recorded.observation is not None and outcome.observation.text != recorded.observation.text:
            log.debug(f"replay of '{e.id}' diverged at step {index}")
            handle.close()
            raise ReplayDivergenceError(
                f"observation mismatch after '{recorded.action}'",
                step=index,
                expected=recorded.observation.text,
                got=outcome.observation.text,
            )
    return handle

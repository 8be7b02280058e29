from __future__ import annotations

from typing import Iterable

from sand.core.errors import ConfigError, DatasetIOError, ScriptExhaustedError
from sand.core.types import History, StepSample, Trajectory
from sand.policy.base import Policy, PolicyConfig


class ScriptedExpertPolicy(Policy):
    """Replays recorded trajectories: step ``t`` of a task is the script's step ``t``."""

    def __init__(self, scripts: dict[str, tuple[StepSample, ...]]) -> None:
        self._scripts = scripts

    @classmethod
    def from_trajectories(cls, trajectories: Iterable[Trajectory]) -> "ScriptedExpertPolicy":
        return cls({e.instruction.id: tuple(step.sample for step in e.steps) for e in trajectories})

    @classmethod
    def from_config(cls, config: PolicyConfig) -> "ScriptedExpertPolicy":
        from sand.dataset.store import load_trajectories

        try:
            return cls.from_trajectories(load_trajectories(config.path))
        except DatasetIOError as exc:
            raise ConfigError(f"expert script not found: {config.path}") from exc

    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        script = self._scripts.get(history.instruction.id)
        if script is None:
            raise ScriptExhaustedError(f"no script for task '{history.instruction.id}'")
        index = len(history.steps)
        if index >= len(script):
            raise ScriptExhaustedError(
                f"script for '{history.instruction.id}' has {len(script)} steps, asked for {index + 1}"
            )
        return script[index]

"""On-disk trajectory records, one JSON object per line."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from sand.core.types import (
    DeliberationStep,
    DeliberationTrajectory,
    Instruction,
    Observation,
    Split,
    Step,
    Thought,
    ThoughtKind,
    Trajectory,
    canonicalize,
)

SCHEMA_VERSION = 1


def _text(observation: Observation | None) -> str | None:
    return observation.text if observation is not None else None


class StepRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    thought: str = ""
    kind: ThoughtKind = ThoughtKind.PLAIN
    action: str
    observation: str | None = None
    deliberated: bool = False
    candidate_count: int = Field(default=0, ge=0)

    def _parts(self) -> dict:
        return {
            "thought": Thought(text=self.thought, kind=self.kind),
            "action": canonicalize(self.action),
            "observation": Observation(text=self.observation) if self.observation is not None else None,
            "candidate_count": self.candidate_count,
        }

    def to_step(self) -> Step:
        return Step(**self._parts())

    def to_deliberation_step(self) -> DeliberationStep:
        return DeliberationStep(deliberated=self.deliberated, **self._parts())

    @classmethod
    def from_step(cls, step: Step | DeliberationStep) -> "StepRecord":
        return cls(
            thought=step.thought.text,
            kind=step.thought.kind,
            action=step.action.raw,
            observation=_text(step.observation),
            deliberated=getattr(step, "deliberated", False),
            candidate_count=step.candidate_count,
        )


class TrajectoryRecord(BaseModel):
    """
    ``{schema, id, instruction, split, reward, iteration, steps, initial_observation?}``.

    Iteration 0 marks expert data; deliberation records carry the iteration
    that produced them. Reward bounds are checked when converting to the
    domain types so they can be reported separately from malformed lines.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    id: str = Field(min_length=1)
    instruction: str
    split: Split = Split.TRAIN
    reward: float
    iteration: int = Field(default=0, ge=0)
    steps: list[StepRecord]
    initial_observation: str | None = None

    @property
    def is_deliberation(self) -> bool:
        return self.iteration >= 1

    def _instruction(self) -> Instruction:
        return Instruction(id=self.id, text=self.instruction, split=self.split)

    def _initial(self) -> Observation | None:
        return Observation(text=self.initial_observation) if self.initial_observation is not None else None

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            id=self.id,
            instruction=self._instruction(),
            steps=tuple(s.to_step() for s in self.steps),
            reward=self.reward,
            initial_observation=self._initial(),
        )

    def to_deliberation(self) -> DeliberationTrajectory:
        return DeliberationTrajectory(
            instruction=self._instruction(),
            steps=tuple(s.to_deliberation_step() for s in self.steps),
            source_trajectory_id=self.id,
            iteration=self.iteration,
            reward=self.reward,
            initial_observation=self._initial(),
        )

    @classmethod
    def from_trajectory(cls, e: Trajectory, iteration: int = 0) -> "TrajectoryRecord":
        return cls(
            id=e.id,
            instruction=e.instruction.text,
            split=e.instruction.split,
            reward=e.reward,
            iteration=iteration,
            steps=[StepRecord.from_step(s) for s in e.steps],
            initial_observation=_text(e.initial_observation),
        )

    @classmethod
    def from_deliberation(cls, d: DeliberationTrajectory) -> "TrajectoryRecord":
        return cls(
            id=d.id,
            instruction=d.instruction.text,
            split=d.instruction.split,
            reward=d.reward,
            iteration=d.iteration,
            steps=[StepRecord.from_step(s) for s in d.steps],
            initial_observation=_text(d.initial_observation),
        )

    def dump(self) -> dict:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)

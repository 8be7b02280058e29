"""Task specifications and their on-disk record format."""

from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from sand.core.errors import ConfigError, LoadError
from sand.core.types import Instruction, Split
from sand.core.utils import ConfigPath, write_jsonl

DEFAULT_MAX_STEPS = 40

LOCATE = "locate"
HOLD = "hold"
FOCUS = "focus"
PLACE = "place"

SUBGOALS = (LOCATE, HOLD, FOCUS, PLACE)
REQUIRABLE = frozenset({FOCUS})


class RewardMode(str, Enum):
    BINARY = "binary"
    GRANULAR = "granular"


class Goal(BaseModel):
    """Put ``object`` into ``receptacle``, optionally after reaching ``requires`` states."""

    model_config = ConfigDict(frozen=True)

    object: str
    receptacle: str
    requires: tuple[str, ...] = ()

    @field_validator("object", "receptacle")
    @classmethod
    def _lower(cls, value: str) -> str:
        return value.strip().lower()


def default_weights(goal: Goal) -> dict[str, float]:
    if FOCUS in goal.requires:
        return {LOCATE: 0.2, HOLD: 0.2, FOCUS: 0.2, PLACE: 0.4}
    return {LOCATE: 0.3, HOLD: 0.3, PLACE: 0.4}


class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    instruction: Instruction
    world_seed: int
    goal: Goal
    reward_mode: RewardMode = RewardMode.BINARY
    max_steps: int = Field(default=DEFAULT_MAX_STEPS, ge=1)
    weights: dict[str, float] | None = None

    @model_validator(mode="after")
    def _check_weights(self) -> "TaskSpec":
        if self.weights is None:
            return self
        unknown = set(self.weights) - set(SUBGOALS)
        if unknown:
            raise ValueError(f"unknown subgoals in weights: {sorted(unknown)}")
        if not math.isclose(sum(self.weights.values()), 1.0, abs_tol=1e-9):
            raise ValueError(f"subgoal weights must sum to 1.0, got {sum(self.weights.values())}")
        return self

    @property
    def id(self) -> str:
        return self.instruction.id

    @property
    def subgoal_weights(self) -> dict[str, float]:
        return dict(self.weights) if self.weights is not None else default_weights(self.goal)


class TaskRecord(BaseModel):
    """Flat task file record: id, text, split, world_seed, goal, reward_mode, max_steps."""

    id: str
    text: str
    split: Split = Split.TRAIN
    world_seed: int
    goal: Goal
    reward_mode: RewardMode = RewardMode.BINARY
    max_steps: int = DEFAULT_MAX_STEPS
    weights: dict[str, float] | None = None

    def to_spec(self) -> TaskSpec:
        return TaskSpec(
            instruction=Instruction(id=self.id, text=self.text, split=self.split),
            world_seed=self.world_seed,
            goal=self.goal,
            reward_mode=self.reward_mode,
            max_steps=self.max_steps,
            weights=self.weights,
        )

    @classmethod
    def from_spec(cls, spec: TaskSpec) -> "TaskRecord":
        return cls(
            id=spec.instruction.id,
            text=spec.instruction.text,
            split=spec.instruction.split,
            world_seed=spec.world_seed,
            goal=spec.goal,
            reward_mode=spec.reward_mode,
            max_steps=spec.max_steps,
            weights=spec.weights,
        )


def load_task_specs(path: str | Path) -> list[TaskSpec]:
    """Read a task file (one JSON record per line)."""
    path = ConfigPath(path)
    if not path.exists():
        raise ConfigError(f"task file not found: {path}")

    specs: list[TaskSpec] = []
    seen: set[str] = set()
    for number, line in path.iter_jsonl():
        try:
            spec = TaskRecord.model_validate(json.loads(line)).to_spec()
        except (json.JSONDecodeError, ValidationError) as exc:
            raise LoadError(str(exc), line=number) from exc
        if spec.id in seen:
            raise LoadError(f"duplicate task id '{spec.id}'", line=number)
        seen.add(spec.id)
        specs.append(spec)
    return specs


def write_task_specs(specs: list[TaskSpec], path: str | Path) -> int:
    return write_jsonl(
        Path(path),
        (TaskRecord.from_spec(s).model_dump(mode="json", exclude_none=True) for s in specs),
    )


def index_specs(specs: list[TaskSpec]) -> dict[str, TaskSpec]:
    return {spec.id: spec for spec in specs}

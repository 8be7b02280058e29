"""Domain types shared by every module.

All types are immutable pydantic models so they can be shared across worker
threads without copying.
"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sand.core.errors import EmptyActionError
from sand.core.text import canonical_form, count_tokens

_FROZEN = ConfigDict(frozen=True)


class Split(str, Enum):
    TRAIN = "train"
    TEST_SEEN = "test_seen"
    TEST_UNSEEN = "test_unseen"


class ThoughtKind(str, Enum):
    PLAIN = "plain"
    DELIBERATIVE = "deliberative"


class Instruction(BaseModel):
    model_config = _FROZEN

    id: str
    text: str
    split: Split = Split.TRAIN

    @field_validator("text")
    @classmethod
    def _text_not_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("instruction text must not be empty")
        return value


class Thought(BaseModel):
    model_config = _FROZEN

    text: str = ""
    kind: ThoughtKind = ThoughtKind.PLAIN

    @classmethod
    def plain(cls, text: str = "") -> "Thought":
        return cls(text=text, kind=ThoughtKind.PLAIN)

    @property
    def is_deliberative(self) -> bool:
        return self.kind is ThoughtKind.DELIBERATIVE


class Action(BaseModel):
    """An agent action. Two actions are equal when their canonical forms are."""

    model_config = _FROZEN

    raw: str
    canonical: str

    @model_validator(mode="after")
    def _canonical_matches_raw(self) -> "Action":
        if self.canonical != canonical_form(self.raw):
            raise ValueError(f"canonical form {self.canonical!r} does not match raw {self.raw!r}")
        if not self.canonical:
            raise ValueError("action must not be empty")
        return self

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Action):
            return self.canonical == other.canonical
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.canonical)

    def __str__(self) -> str:
        return self.raw.strip()


def canonicalize(raw: str) -> Action:
    """Build an :class:`Action`, keeping ``raw`` and deriving its canonical form."""
    canonical = canonical_form(raw)
    if not canonical:
        raise EmptyActionError(f"empty action: {raw!r}")
    return Action(raw=raw, canonical=canonical)


class Observation(BaseModel):
    model_config = _FROZEN

    text: str


class StepSample(BaseModel):
    """One (thought, action) draw from a policy."""

    model_config = _FROZEN

    thought: Thought = Field(default_factory=Thought)
    action: Action

    @classmethod
    def of(cls, action: str, thought: str = "") -> "StepSample":
        return cls(thought=Thought.plain(thought), action=canonicalize(action))


class Step(BaseModel):
    model_config = _FROZEN

    thought: Thought = Field(default_factory=Thought)
    action: Action
    observation: Observation | None = None
    # Carried from deliberation records so later iterations keep their flags.
    candidate_count: int = Field(default=0, ge=0)

    @property
    def sample(self) -> StepSample:
        return StepSample(thought=self.thought, action=self.action)


class History(BaseModel):
    """The interaction history up to a step: instruction plus completed steps."""

    model_config = _FROZEN

    instruction: Instruction
    steps: tuple[Step, ...] = ()
    initial_observation: Observation | None = None

    def append(self, step: Step) -> "History":
        return self.model_copy(update={"steps": (*self.steps, step)})

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def action_key(self) -> tuple[str, ...]:
        return tuple(step.action.canonical for step in self.steps)


def _check_final_observation(steps: tuple, what: str) -> None:
    for index, step in enumerate(steps[:-1], start=1):
        if step.observation is None:
            raise ValueError(f"{what} step {index} lacks an observation; only the final step may")


def tokens_of(steps: tuple) -> int:
    return sum(count_tokens(s.thought.text) + count_tokens(s.action.raw) for s in steps)


class Trajectory(BaseModel):
    model_config = _FROZEN

    id: str = ""
    instruction: Instruction
    steps: tuple[Step, ...]
    reward: float = Field(ge=0.0, le=1.0)
    token_count: int | None = None
    initial_observation: Observation | None = None

    @model_validator(mode="after")
    def _check(self) -> "Trajectory":
        if not self.steps:
            raise ValueError("a trajectory needs at least one step")
        _check_final_observation(self.steps, "trajectory")
        expected = tokens_of(self.steps)
        if self.token_count is None:
            object.__setattr__(self, "token_count", expected)
        elif self.token_count != expected:
            raise ValueError(f"token_count {self.token_count} != {expected}")
        if not self.id:
            object.__setattr__(self, "id", self.instruction.id)
        return self

    def __len__(self) -> int:
        return len(self.steps)

    def history(self, t: int, initial_observation: Observation | None = None) -> History:
        """The expert history before step ``t`` (1-based), i.e. the first ``t-1`` steps."""
        return History(
            instruction=self.instruction,
            steps=self.steps[: t - 1],
            initial_observation=initial_observation or self.initial_observation,
        )


def step_count(e: Trajectory) -> int:
    return len(e.steps)


class DeliberationStep(BaseModel):
    model_config = _FROZEN

    thought: Thought
    action: Action
    observation: Observation | None = None
    deliberated: bool
    candidate_count: int = Field(ge=0)

    @model_validator(mode="after")
    def _flag_consistency(self) -> "DeliberationStep":
        flags = (self.deliberated, self.thought.is_deliberative, self.candidate_count >= 2)
        if len(set(flags)) != 1:
            raise ValueError(
                "deliberated, deliberative thought and candidate_count >= 2 must agree "
                f"(got deliberated={flags[0]}, kind={self.thought.kind.value}, "
                f"candidate_count={self.candidate_count})"
            )
        return self

    def as_step(self) -> Step:
        return Step(
            thought=self.thought,
            action=self.action,
            observation=self.observation,
            candidate_count=self.candidate_count,
        )


class DeliberationTrajectory(BaseModel):
    model_config = _FROZEN

    instruction: Instruction
    steps: tuple[DeliberationStep, ...]
    source_trajectory_id: str
    iteration: int = Field(ge=1)
    reward: float = Field(ge=0.0, le=1.0)
    initial_observation: Observation | None = None

    @model_validator(mode="after")
    def _check(self) -> "DeliberationTrajectory":
        if not self.steps:
            raise ValueError("a deliberation trajectory needs at least one step")
        _check_final_observation(self.steps, "deliberation trajectory")
        return self

    @property
    def id(self) -> str:
        return self.source_trajectory_id

    @property
    def token_count(self) -> int:
        return tokens_of(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def to_trajectory(self) -> Trajectory:
        """View as a plain trajectory so the next iteration can replay it."""
        return Trajectory(
            id=self.source_trajectory_id,
            instruction=self.instruction,
            steps=tuple(step.as_step() for step in self.steps),
            reward=self.reward,
            initial_observation=self.initial_observation,
        )

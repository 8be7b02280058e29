"""Tabular policy: explicit finite distributions over (thought, action) pairs.

State keys are the canonical action sequences of the history, joined with
``" | "``; the empty history has key ``""``. A table file looks like::

    tasks:                      # per-instruction tables, looked up first
      tg-0007:
        "":
          - {action: go to kitchen, prob: 0.9}
          - {action: look, prob: 0.1}
    shared:                     # used when the task has no entry for a state
      "go to kitchen":
        - {thought: The fridge may hold it., action: open fridge, prob: 1.0}
    fallback:                   # used for any state nobody listed
      - {action: look, prob: 1.0}
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.special import softmax

from sand.core.errors import ConfigError, PreconditionError
from sand.core.probability import OFF_SUPPORT
from sand.core.types import History, StepSample, Thought, Trajectory, canonicalize
from sand.core.utils import ConfigPath, write_yaml
from sand.policy.base import Policy, PolicyConfig

KEY_SEPARATOR = " | "
NORMALIZATION_TOLERANCE = 1e-9


def state_key(actions: Iterable[str]) -> str:
    return KEY_SEPARATOR.join(actions)


class TabularEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    thought: str = ""
    action: str
    prob: float = Field(ge=0.0, le=1.0)


class TabularTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    tasks: dict[str, dict[str, tuple[TabularEntry, ...]]] = Field(default_factory=dict)
    shared: dict[str, tuple[TabularEntry, ...]] = Field(default_factory=dict)
    fallback: tuple[TabularEntry, ...] | None = None


@dataclass(frozen=True)
class _Distribution:
    samples: tuple[StepSample, ...]
    probs: np.ndarray

    def scaled(self, temperature: float) -> np.ndarray:
        """Probabilities after temperature scaling of the log-probability logits."""
        if temperature == 0:
            out = np.zeros_like(self.probs)
            out[int(np.argmax(self.probs))] = 1.0
            return out
        with np.errstate(divide="ignore"):
            logits = np.log(self.probs)
        return softmax(logits / temperature)


def _distribution(entries: tuple[TabularEntry, ...], where: str) -> _Distribution:
    if not entries:
        raise ConfigError(f"empty distribution at {where}")
    total = math.fsum(e.prob for e in entries)
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise ConfigError(f"distribution at {where} sums to {total}, not 1")
    samples = tuple(
        StepSample(thought=Thought.plain(e.thought), action=canonicalize(e.action)) for e in entries
    )
    return _Distribution(samples=samples, probs=np.array([e.prob for e in entries], dtype=float))


class TabularPolicy(Policy):
    scorable = True

    def __init__(self, table: TabularTable, temperature: float = 1.0) -> None:
        self.table = table
        self.temperature = temperature
        self._tasks = {
            task: {key: _distribution(entries, f"{task}/{key!r}") for key, entries in states.items()}
            for task, states in table.tasks.items()
        }
        self._shared = {
            key: _distribution(entries, f"shared/{key!r}") for key, entries in table.shared.items()
        }
        self._fallback = (
            _distribution(table.fallback, "fallback") if table.fallback is not None else None
        )

    @classmethod
    def from_config(cls, config: PolicyConfig) -> "TabularPolicy":
        path = ConfigPath(config.path)
        if not path.exists():
            raise ConfigError(f"tabular policy file not found: {path}")
        try:
            table = TabularTable.model_validate(path.read_yaml())
        except ValidationError as exc:
            raise ConfigError(f"invalid tabular policy {path}: {exc}") from exc
        return cls(table, temperature=config.temperature)

    @classmethod
    def from_trajectories(
        cls,
        trajectories: Iterable[Trajectory],
        expert_mass: float = 1.0,
        distractors: tuple[str, ...] = (),
        fallback: tuple[str, ...] = ("look",),
        temperature: float = 1.0,
    ) -> "TabularPolicy":
        """
        Per-task tables along each trajectory: the recorded step gets
        ``expert_mass`` and the distractor actions share the remainder.
        """
        if distractors and expert_mass >= 1.0:
            raise PreconditionError("distractors need expert_mass < 1")
        tasks: dict[str, dict[str, tuple[TabularEntry, ...]]] = {}
        for e in trajectories:
            states: dict[str, tuple[TabularEntry, ...]] = {}
            for index, step in enumerate(e.steps):
                key = state_key(s.action.canonical for s in e.steps[:index])
                others = [d for d in distractors if canonicalize(d) != step.action]
                mass = expert_mass if others else 1.0
                entries = [TabularEntry(thought=step.thought.text, action=step.action.raw, prob=mass)]
                entries += [
                    TabularEntry(action=d, prob=(1.0 - mass) / len(others)) for d in others
                ]
                states[key] = tuple(entries)
            tasks[e.instruction.id] = states
        table = TabularTable(
            tasks=tasks,
            fallback=tuple(TabularEntry(action=a, prob=1.0 / len(fallback)) for a in fallback)
            if fallback
            else None,
        )
        return cls(table, temperature=temperature)

    def write(self, path: str | Path) -> Path:
        """Save the table in the YAML layout :meth:`from_config` reads."""
        target = Path(path)
        write_yaml(target, self.table.model_dump(mode="json", exclude_none=True))
        return target

    def distribution(self, history: History) -> _Distribution | None:
        key = state_key(history.action_key)
        per_task = self._tasks.get(history.instruction.id, {})
        if key in per_task:
            return per_task[key]
        if key in self._shared:
            return self._shared[key]
        return self._fallback

    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        dist = self.distribution(history)
        if dist is None:
            raise PreconditionError(
                f"no distribution for state {state_key(history.action_key)!r} "
                f"of task '{history.instruction.id}'"
            )
        probs = dist.scaled(temperature)
        if temperature == 0:
            return dist.samples[int(np.argmax(probs))]
        index = np.random.default_rng(seed).choice(len(dist.samples), p=probs)
        return dist.samples[int(index)]

    def score_step(self, history: History, sample: StepSample) -> float:
        dist = self.distribution(history)
        if dist is None:
            return OFF_SUPPORT
        probs = dist.scaled(self.temperature)
        mass = math.fsum(
            float(p)
            for s, p in zip(dist.samples, probs)
            if s.action == sample.action and s.thought.text == sample.thought.text
        )
        return math.log(mass) if mass > 0 else OFF_SUPPORT

    def support(self, history: History) -> list[tuple[StepSample, float]]:
        """All (sample, probability) pairs at ``history`` under the policy's own temperature."""
        dist = self.distribution(history)
        if dist is None:
            return []
        return list(zip(dist.samples, (float(p) for p in dist.scaled(self.temperature))))

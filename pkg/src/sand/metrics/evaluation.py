"""Evaluation harness: roll a policy out over test tasks and aggregate rewards."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sand.core.errors import EmptyEvaluationError, SandError
from sand.core.tools.log import log
from sand.core.types import History, Trajectory
from sand.core.utils import derive_seed, stable_key
from sand.env.base import EnvBackend
from sand.env.task import TaskSpec
from sand.metrics.analysis import deliberation_rate, per_step_reward
from sand.policy.base import Policy, greedy_rollout, run_policy


class TaskResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: str
    reward: float = Field(ge=0.0, le=1.0)
    steps: int = Field(ge=0)
    tokens: int = Field(ge=0)
    deliberation_rate: float = Field(ge=0.0, le=1.0)
    per_step_reward: float = Field(ge=0.0, le=1.0)
    error: str | None = None

    @classmethod
    def failed(cls, task_id: str, error: str) -> "TaskResult":
        return cls(task_id=task_id, reward=0.0, steps=0, tokens=0, deliberation_rate=0.0, per_step_reward=0.0, error=error)

    @classmethod
    def from_trajectory(cls, task_id: str, e: Trajectory) -> "TaskResult":
        return cls(
            task_id=task_id,
            reward=e.reward,
            steps=len(e.steps),
            tokens=e.token_count,
            deliberation_rate=deliberation_rate(e),
            per_step_reward=per_step_reward(e.reward, len(e.steps)),
        )


class EvalReport(BaseModel):
    """Per-task rows; every average is the arithmetic mean of its column (macro average)."""

    model_config = ConfigDict(frozen=True)

    per_task: tuple[TaskResult, ...]

    def _mean(self, column: str) -> float:
        if not self.per_task:
            return 0.0
        return float(np.mean([getattr(row, column) for row in self.per_task]))

    @property
    def average_reward(self) -> float:
        return self._mean("reward")

    @property
    def avg_per_step_reward(self) -> float:
        return self._mean("per_step_reward")

    @property
    def avg_deliberation_rate(self) -> float:
        return self._mean("deliberation_rate")

    @property
    def avg_tokens(self) -> float:
        return self._mean("tokens")

    @property
    def failures(self) -> list[TaskResult]:
        return [row for row in self.per_task if row.error is not None]

    def averages(self) -> dict[str, float]:
        return {
            "average_reward": self.average_reward,
            "avg_per_step_reward": self.avg_per_step_reward,
            "avg_deliberation_rate": self.avg_deliberation_rate,
            "avg_tokens": self.avg_tokens,
        }


def rollout_task(
    policy: Policy,
    backend: EnvBackend,
    spec: TaskSpec,
    temperature: float = 0.0,
    seed: int = 0,
) -> Trajectory:
    handle, initial = backend.reset(spec)
    try:
        history = History(instruction=spec.instruction, initial_observation=initial)
        if temperature == 0:
            return greedy_rollout(policy, handle, history, seed=seed)
        steps, history = run_policy(policy, handle, history, temperature, seed)
        if not handle.terminated:
            handle.terminate()
        return Trajectory(
            instruction=history.instruction,
            steps=history.steps,
            reward=handle.score(),
            initial_observation=history.initial_observation,
        )
    finally:
        handle.close()


def evaluate(
    p: Policy,
    backend: EnvBackend,
    specs: list[TaskSpec],
    temperature: float = 0.0,
    seed: int = 0,
    jobs: int = 1,
) -> EvalReport:
    """!
    Roll ``p`` out once per task and collect the results.

    A task that fails scores 0 with an error note; the suite always completes.

    @param temperature Decoding temperature; evaluation is greedy by default.
    @param jobs Number of tasks evaluated concurrently.
    @return Rows in the order of ``specs``.
    """
    if not specs:
        raise EmptyEvaluationError("no tasks to evaluate")

    def one(spec: TaskSpec) -> TaskResult:
        try:
            e = rollout_task(p, backend, spec, temperature, derive_seed(seed, stable_key(spec.id)))
            return TaskResult.from_trajectory(spec.id, e)
        except (SandError, ValueError) as exc:
            log.warning(f"evaluation of '{spec.id}' failed: {type(exc).__name__}: {exc}")
            return TaskResult.failed(spec.id, f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = tuple(pool.map(one, specs))
    report = EvalReport(per_task=rows)
    log.ok(f"evaluated {len(rows)} tasks: average reward {report.average_reward:.4f}")
    return report

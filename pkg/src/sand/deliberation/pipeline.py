"""
One synthesis pass: scan, roll out, critique, deliberate and assemble every
expert trajectory of a dataset.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial

from pydantic import BaseModel, ConfigDict, Field
from tqdm.auto import tqdm

from sand.core.errors import EnvTimeoutError, PolicyUnavailableError, PreconditionError, SandError
from sand.core.tools.log import log
from sand.core.types import DeliberationTrajectory, Trajectory
from sand.core.utils import derive_seed, stable_key
from sand.deliberation.critique import critique_all
from sand.deliberation.proposal import propose_candidates
from sand.deliberation.rollout import rollout_unique
from sand.deliberation.sampler import SAMPLE_TEMPERATURE, SamplingMode, needs_deliberation, scan_trajectory
from sand.deliberation.synthesis import (
    Pair,
    StepPlan,
    assemble,
    build_deliberation_prompt,
    decide_switch,
    synthesize,
)
from sand.env.base import EnvBackend
from sand.env.task import TaskSpec
from sand.policy.base import CompletionModel, Policy

# Never quarantined: the whole run is unusable without its backends.
FATAL_ERRORS = (PolicyUnavailableError, EnvTimeoutError)


class DeliberationSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(default=5, ge=1)
    sample_temperature: float = Field(default=SAMPLE_TEMPERATURE, ge=0.0)
    expert_switch: bool = True
    reroll_expert: bool = False
    include_sampled_thoughts: bool = False
    critique: bool = True
    critique_workers: int = Field(default=4, ge=1)
    sampling: SamplingMode = SamplingMode.SELF_CONSISTENCY


class CountingModel(CompletionModel):
    """Counts completions issued through a base model."""

    def __init__(self, inner: CompletionModel) -> None:
        self.inner = inner
        self.count = 0
        self._lock = threading.Lock()

    def complete_text(self, prompt: str, temperature: float) -> str:
        with self._lock:
            self.count += 1
        return self.inner.complete_text(prompt, temperature)


@dataclass(frozen=True)
class DeliberationOutcome:
    trajectory: DeliberationTrajectory
    flagged: int
    switched: bool
    # needs_deliberation per scanned step, up to and including a switch.
    flags: tuple[bool, ...]


@dataclass
class Reject:
    id: str
    error: str
    message: str

    def to_record(self) -> dict[str, str]:
        return {"id": self.id, "error": self.error, "message": self.message}


@dataclass
class SynthesisResult:
    trajectories: list[DeliberationTrajectory] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    flagged: int = 0
    switches: int = 0
    completions: int = 0

    @property
    def total(self) -> int:
        return len(self.trajectories) + len(self.rejects)

    @property
    def reject_rate(self) -> float:
        return len(self.rejects) / self.total if self.total else 0.0


def deliberate(
    policy: Policy,
    base: CompletionModel,
    backend: EnvBackend,
    spec: TaskSpec,
    e: Trajectory,
    settings: DeliberationSettings,
    seed: int,
    iteration: int,
) -> DeliberationOutcome:
    """!
    Turn one expert trajectory into a deliberation trajectory.

    Steps where the policy's samples agree with the expert are copied. Every
    other step gets a deliberation thought built from the candidates and,
    unless critiques are disabled, from critiques of their grounded rollouts.
    Candidates come from policy draws or, in in-context mode, from one
    base-model proposal. Branching stops at the first expert switch, and a
    switch never makes the trajectory longer than ``e``.

    @param seed Run seed; the trajectory's own seed is derived from it and ``e.id``.
    @return The assembled trajectory with per-step sampler flags.
    """
    traj_seed = derive_seed(seed, stable_key(e.id))
    draw = None
    if settings.sampling is SamplingMode.IN_CONTEXT:
        draw = partial(propose_candidates, base, n=settings.n, temperature=settings.sample_temperature)
    scanned = scan_trajectory(
        policy, backend, spec, e, settings.n, traj_seed, settings.sample_temperature, draw=draw
    )

    plans: dict[int, StepPlan] = {}
    flags: list[bool] = []
    switched = False
    for c in scanned:
        t = c.step_index
        flagged = needs_deliberation(c)
        flags.append(flagged)
        if not flagged:
            plans[t] = StepPlan(candidates=c)
            continue

        records = None
        decision = None
        if settings.critique:
            records = rollout_unique(
                policy, backend, spec, e, t, c, traj_seed, settings.reroll_expert, settings.sample_temperature
            )
            critiques = critique_all(
                base,
                e.instruction,
                c.history,
                records,
                settings.include_sampled_thoughts,
                settings.critique_workers,
            )
            pairs: list[Pair] = [(action, critiques[action]) for action in c.actions]
            expert_action = c.expert.action
            others = {a: r for a, r in records.items() if a != expert_action}
            decision = decide_switch(
                settings.expert_switch, records[expert_action], others, max_length=len(e.steps) - t + 1
            )
        else:
            pairs = [(action, None) for action in c.actions]

        target = decision.chosen if decision is not None else c.expert.action
        prompt = build_deliberation_prompt(e.instruction, c.history, pairs, target)
        draft = synthesize(base, prompt, pairs, target)
        plans[t] = StepPlan(candidates=c, draft=draft, decision=decision, records=records)
        if decision is not None and decision.switched:
            log.info(f"{e.id}: switched '{decision.original}' -> '{decision.chosen}' at step {t}")
            switched = True
            break

    trajectory = assemble(e, plans, iteration)
    return DeliberationOutcome(
        trajectory=trajectory,
        flagged=sum(flags),
        switched=switched,
        flags=tuple(flags),
    )


def synthesize_dataset(
    policy: Policy,
    base: CompletionModel,
    backend: EnvBackend,
    specs: dict[str, TaskSpec],
    trajectories: list[Trajectory],
    settings: DeliberationSettings,
    seed: int,
    iteration: int,
    jobs: int = 1,
    progress: bool = True,
) -> SynthesisResult:
    """
    Deliberate every trajectory on a thread pool, keeping input order.

    Domain failures of a single trajectory are quarantined as rejects;
    unreachable backends abort the pass.
    """
    counting = CountingModel(base)

    def one(e: Trajectory) -> DeliberationOutcome | Reject:
        try:
            spec = specs.get(e.instruction.id)
            if spec is None:
                raise PreconditionError(f"no task spec for instruction '{e.instruction.id}'")
            return deliberate(policy, counting, backend, spec, e, settings, seed, iteration)
        except FATAL_ERRORS:
            raise
        except SandError as exc:
            log.warning(f"rejecting '{e.id}': {type(exc).__name__}: {exc}")
            return Reject(id=e.id, error=type(exc).__name__, message=str(exc))

    result = SynthesisResult()
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        outcomes = pool.map(one, trajectories)
        for outcome in tqdm(outcomes, total=len(trajectories), desc=f"iteration {iteration}", disable=not progress):
            if isinstance(outcome, Reject):
                result.rejects.append(outcome)
                continue
            result.trajectories.append(outcome.trajectory)
            result.flagged += outcome.flagged
            result.switches += int(outcome.switched)
    result.completions = counting.count
    return result

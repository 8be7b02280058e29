"""Deliberation synthesis, expert switching and trajectory assembly."""

from __future__ import annotations

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sand.core.errors import (
    AssemblyError,
    EmptyActionError,
    SynthesisContractError,
    SynthesisParseError,
)
from sand.core.text import BULLET_PATTERN
from sand.core.tools.log import log
from sand.core.types import (
    Action,
    DeliberationStep,
    DeliberationTrajectory,
    History,
    Instruction,
    Step,
    Thought,
    ThoughtKind,
    Trajectory,
    canonicalize,
)
from sand.deliberation.critique import Critique, render_history
from sand.deliberation.rollout import RolloutRecord
from sand.deliberation.sampler import CandidateSet
from sand.policy.base import CompletionModel
from sand.prompts import DELIBERATION, load_prompt

SYNTHESIS_TEMPERATURE = 0.0
FORBIDDEN_MENTIONS = ("scratch-pad", "scratch pad", "scratchpad", "simulation")
REMINDER = (
    "\n\nReminder: start with `Thought:`, give one `- <candidate action>: <judgement>` line "
    "for every candidate above, then your rationale."
)


class DeliberationDraft(BaseModel):
    model_config = ConfigDict(frozen=True)

    reflection: str
    bullets: tuple[tuple[Action, str], ...]
    rationale: str

    @model_validator(mode="after")
    def _check(self) -> "DeliberationDraft":
        if len(self.bullets) < 2:
            raise ValueError("a deliberation lists at least two candidates")
        actions = [action for action, _ in self.bullets]
        if len(set(actions)) != len(actions):
            raise ValueError("each candidate appears in exactly one bullet")
        return self

    def render(self) -> str:
        """Thought text in the deliberation output format, without the ``Thought:`` label."""
        lines = "\n".join(f"- {action}: {judgement}".rstrip() for action, judgement in self.bullets)
        return f"{self.reflection}\n\n{lines}\n\n{self.rationale}"


class SwitchDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    original: Action
    chosen: Action
    switched: bool
    original_reward: float
    best_reward: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> "SwitchDecision":
        if self.switched and not self.best_reward > self.original_reward:
            raise ValueError("a switch needs a strictly better reward")
        if not self.switched and self.chosen != self.original:
            raise ValueError("without a switch the original action stays")
        return self


Pair = tuple[Action, Critique | None]


def render_scratch_pad(pairs: list[Pair]) -> str:
    return "\n".join(
        f"- {action}: {critique.text if critique is not None else ''}".rstrip()
        for action, critique in pairs
    )


def build_deliberation_prompt(
    instruction: Instruction,
    history: History,
    pairs: list[Pair],
    target: Action,
) -> str:
    if target not in [action for action, _ in pairs]:
        raise SynthesisContractError(f"target '{target}' is not among the candidates", action=str(target))
    return load_prompt(DELIBERATION).fill(
        task_instruction=instruction.text,
        interaction_history=render_history(history),
        scratch_pad=render_scratch_pad(pairs),
        expert_action=str(target),
    )


def parse_deliberation(text: str, candidates: list[Action]) -> DeliberationDraft:
    """
    Split a completion into reflection, bullets and rationale and check it
    lists every candidate once without mentioning where its notes came from.
    """
    lowered = text.lower()
    for word in FORBIDDEN_MENTIONS:
        if word in lowered:
            raise SynthesisParseError(f"deliberation mentions '{word}'")

    body = text.strip()
    if body.lower().startswith("thought:"):
        body = body[len("thought:") :].lstrip()

    reflection_lines: list[str] = []
    bullets: list[tuple[Action, str]] = []
    rationale_lines: list[str] = []
    for line in body.splitlines():
        match = BULLET_PATTERN.match(line)
        if match and not rationale_lines:
            try:
                bullets.append((canonicalize(match["action"]), match["judgement"].strip()))
            except EmptyActionError as exc:
                raise SynthesisParseError(f"bullet without an action: {line!r}") from exc
        elif not bullets:
            reflection_lines.append(line)
        elif line.strip():
            rationale_lines.append(line.strip())

    reflection = " ".join(line.strip() for line in reflection_lines if line.strip())
    rationale = " ".join(rationale_lines)
    if not reflection:
        raise SynthesisParseError("missing reflection before the candidate list")
    if not rationale:
        raise SynthesisParseError("missing rationale after the candidate list")

    listed = [action for action, _ in bullets]
    missing = [str(a) for a in candidates if a not in listed]
    extra = [str(a) for a in listed if a not in candidates]
    if missing or extra or len(set(listed)) != len(listed):
        raise SynthesisParseError(
            f"bullets do not match candidates (missing={missing}, unexpected={extra})"
        )
    try:
        return DeliberationDraft(reflection=reflection, bullets=tuple(bullets), rationale=rationale)
    except ValueError as exc:
        raise SynthesisParseError(str(exc)) from exc


def synthesize(
    base: CompletionModel,
    prompt: str,
    pairs: list[Pair],
    target: Action,
) -> DeliberationDraft:
    candidates = [action for action, _ in pairs]
    last: SynthesisParseError | None = None
    for attempt, text in enumerate((prompt, prompt + REMINDER), start=1):
        try:
            return parse_deliberation(base.complete_text(text, SYNTHESIS_TEMPERATURE), candidates)
        except SynthesisParseError as exc:
            log.debug(f"deliberation for '{target}' rejected on attempt {attempt}: {exc}")
            last = exc
    raise SynthesisParseError(f"no valid deliberation after retry: {last}", action=str(target))


def decide_switch(
    enabled: bool,
    expert_record: RolloutRecord,
    others: dict[Action, RolloutRecord],
    max_length: int | None = None,
) -> SwitchDecision:
    """
    Switch to the best alternative only when its rollout strictly beats the
    expert's. With ``max_length``, alternatives whose continuation is longer
    than the expert steps it would replace are not eligible.
    """
    original = expert_record.action
    alternatives = [
        (a, r)
        for a, r in others.items()
        if a != original and (max_length is None or len(r.continuation) <= max_length)
    ]
    keep = SwitchDecision(
        original=original,
        chosen=original,
        switched=False,
        original_reward=expert_record.final_reward,
        best_reward=expert_record.final_reward,
    )
    if not enabled or not alternatives:
        return keep
    best_reward = max(r.final_reward for _, r in alternatives)
    if not best_reward > expert_record.final_reward:
        return keep
    # Lexicographic on canonical action; sorted() is stable so first-sampled wins exact ties.
    winner = sorted((a for a, r in alternatives if r.final_reward == best_reward), key=lambda a: a.canonical)[0]
    return SwitchDecision(
        original=original,
        chosen=winner,
        switched=True,
        original_reward=expert_record.final_reward,
        best_reward=best_reward,
    )


@dataclass(frozen=True)
class StepPlan:
    """Everything synthesis decided for one expert step."""

    candidates: CandidateSet
    draft: DeliberationDraft | None = None
    decision: SwitchDecision | None = None
    records: dict[Action, RolloutRecord] | None = None


def _copied(step: Step, t: int) -> DeliberationStep:
    # A deliberation carried over from an earlier iteration keeps its flags.
    carried = step.thought.is_deliberative
    if carried and step.candidate_count < 2:
        raise AssemblyError(f"step {t} has a deliberative thought but {step.candidate_count} candidates")
    return DeliberationStep(
        thought=step.thought,
        action=step.action,
        observation=step.observation,
        deliberated=carried,
        candidate_count=step.candidate_count if carried else 1,
    )


def assemble(e: Trajectory, per_step: dict[int, StepPlan], iteration: int) -> DeliberationTrajectory:
    """
    Build the deliberation trajectory. Steps without a draft are copied from
    ``e``; after a switch the winning rollout's continuation replaces the rest.
    """
    keys = sorted(per_step)
    if not keys or keys != list(range(1, keys[-1] + 1)) or keys[-1] > len(e.steps):
        raise AssemblyError(f"step plans {keys} do not cover steps 1..{len(e.steps)} of '{e.id}'")

    steps: list[DeliberationStep] = []
    reward = e.reward
    switched_at: int | None = None
    for t in keys:
        plan = per_step[t]
        expert = e.steps[t - 1]
        if plan.draft is None:
            steps.append(_copied(expert, t))
            continue

        thought = Thought(text=plan.draft.render(), kind=ThoughtKind.DELIBERATIVE)
        count = len(plan.candidates.unique_actions)
        decision = plan.decision
        if decision is None or not decision.switched:
            steps.append(
                DeliberationStep(
                    thought=thought,
                    action=expert.action,
                    observation=expert.observation,
                    deliberated=True,
                    candidate_count=count,
                )
            )
            continue

        if plan.records is None or decision.chosen not in plan.records:
            raise AssemblyError(f"switch at step {t} of '{e.id}' has no rollout for '{decision.chosen}'")
        record = plan.records[decision.chosen]
        if t - 1 + len(record.continuation) > len(e.steps):
            raise AssemblyError(
                f"switch at step {t} of '{e.id}' would grow it to "
                f"{t - 1 + len(record.continuation)} steps, past {len(e.steps)}"
            )
        first, *rest = record.continuation
        steps.append(
            DeliberationStep(
                thought=thought,
                action=decision.chosen,
                observation=first.observation,
                deliberated=True,
                candidate_count=count,
            )
        )
        steps.extend(
            DeliberationStep(
                thought=Thought.plain(s.thought.text),
                action=s.action,
                observation=s.observation,
                deliberated=False,
                candidate_count=0,
            )
            for s in rest
        )
        reward = decision.best_reward
        switched_at = t
        break

    if switched_at is None and keys[-1] != len(e.steps):
        raise AssemblyError(f"step plans stop at {keys[-1]} of {len(e.steps)} for '{e.id}'")

    return DeliberationTrajectory(
        instruction=e.instruction,
        steps=tuple(steps),
        source_trajectory_id=e.id,
        iteration=iteration,
        reward=reward,
        initial_observation=e.initial_observation,
    )

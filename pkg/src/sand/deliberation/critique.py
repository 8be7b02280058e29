"""Execution-guided critiques: the base model judges each candidate from its rollout."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor

from pydantic import BaseModel, ConfigDict, Field

from sand.core.errors import CritiqueParseError, PreconditionError, SandError
from sand.core.tools.log import log
from sand.core.types import Action, History, Instruction, Step
from sand.deliberation.rollout import RolloutRecord
from sand.policy.base import CompletionModel
from sand.prompts import CRITIQUE, load_prompt

CRITIQUE_TEMPERATURE = 0.0
MARKER = "Action Evaluation:"
REMINDER = (
    "\n\nReminder: reply with one short paragraph that starts exactly with "
    "`Action Evaluation:`."
)

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


class Critique(BaseModel):
    model_config = ConfigDict(frozen=True)

    action: Action
    text: str = Field(min_length=1)
    reward_context: float
    sentences: int = Field(ge=0)


def count_sentences(text: str) -> int:
    return len(_SENTENCE_END.findall(text.strip()))


def format_reward(reward: float) -> str:
    return f"{reward:.1f}"


def render_history(history: History) -> str:
    """The interaction so far: initial observation, then Thought/Action/Observation lines."""
    lines = []
    if history.initial_observation is not None:
        lines.append(history.initial_observation.text)
    for step in history.steps:
        lines.extend(render_step(step))
    return "\n".join(lines)


def render_step(step: Step, include_thought: bool = True) -> list[str]:
    lines = []
    if include_thought and step.thought.text.strip():
        lines.append(f"Thought: {step.thought.text}")
    lines.append(f"Action: {step.action}")
    if step.observation is not None:
        lines.append(f"Observation: {step.observation.text}")
    return lines


def render_rollout(record: RolloutRecord, include_sampled_thoughts: bool = False) -> str:
    """Ordered transcript of a rollout closed by its final reward."""
    lines = []
    for index, step in enumerate(record.continuation):
        lines.extend(render_step(step, include_thought=index > 0 or include_sampled_thoughts))
    lines.append(f"Final reward: {format_reward(record.final_reward)}")
    return "\n".join(lines)


def build_critique_prompt(
    instruction: Instruction,
    history: History,
    record: RolloutRecord,
    include_sampled_thoughts: bool = False,
) -> str:
    action = str(record.action)
    return load_prompt(CRITIQUE).fill(
        task_instruction=instruction.text,
        interaction_history=render_history(history),
        sample_action=action,
        sampled_action=action,
        executed_rollout=render_rollout(record, include_sampled_thoughts),
    )


def parse_critique(text: str) -> str | None:
    """Text after the first marker, trimmed; ``None`` if there is no usable paragraph."""
    _, marker, rest = text.partition(MARKER)
    if not marker:
        return None
    rest = rest.strip()
    return rest or None


def generate_critique(
    base: CompletionModel,
    prompt: str,
    action: Action,
    reward: float,
) -> Critique:
    """One critique at temperature 0; a reply without the marker gets one reminder retry."""
    for attempt, text in enumerate((prompt, prompt + REMINDER), start=1):
        parsed = parse_critique(base.complete_text(text, CRITIQUE_TEMPERATURE))
        if parsed is not None:
            return Critique(
                action=action,
                text=parsed,
                reward_context=reward,
                sentences=count_sentences(parsed),
            )
        log.debug(f"critique for '{action}' unparsable on attempt {attempt}")
    raise CritiqueParseError("no 'Action Evaluation:' paragraph after retry", action=str(action))


def critique_all(
    base: CompletionModel,
    instruction: Instruction,
    history: History,
    records: dict[Action, RolloutRecord],
    include_sampled_thoughts: bool = False,
    max_workers: int = 4,
) -> dict[Action, Critique]:
    """One critique per distinct action, generated concurrently; keyed like ``records``."""
    if not records:
        raise PreconditionError("no rollouts to critique")

    def one(action: Action, record: RolloutRecord) -> Critique:
        prompt = build_critique_prompt(instruction, history, record, include_sampled_thoughts)
        try:
            return generate_critique(base, prompt, action, record.final_reward)
        except SandError as exc:
            raise exc.with_action(str(action))

    with ThreadPoolExecutor(max_workers=max(1, min(max_workers, len(records)))) as pool:
        futures = {action: pool.submit(one, action, record) for action, record in records.items()}
        return {action: future.result() for action, future in futures.items()}

"""In-context candidate proposal.

Instead of drawing N independent steps from the policy, the base model is
asked once for N alternative actions at the current state. The proposals
are pooled with the expert action exactly like sampled ones.
"""

from __future__ import annotations

import re

from sand.core.errors import EmptyActionError, SynthesisParseError
from sand.core.tools.log import log
from sand.core.types import Action, History, Step, StepSample, Thought, canonicalize
from sand.deliberation.critique import render_history
from sand.deliberation.sampler import CandidateSet, count_unique
from sand.policy.base import CompletionModel
from sand.prompts import ALTERNATIVES, load_prompt

REMINDER = "\n\nReminder: reply with one `- <action>` line per alternative and nothing else."

_ITEM = re.compile(r"^\s*(?:[-*]|\d+[.)])\s+(?:action\s*:\s*)?(?P<action>.+?)\s*$", re.IGNORECASE)


def build_proposal_prompt(history: History, n: int) -> str:
    return load_prompt(ALTERNATIVES).fill(
        task_instruction=history.instruction.text,
        interaction_history=render_history(history),
        n=str(n),
    )


def parse_proposals(text: str, n: int) -> tuple[Action, ...]:
    """The first ``n`` listed actions; a reply listing none is a parse error."""
    actions: list[Action] = []
    for line in text.splitlines():
        match = _ITEM.match(line)
        if match is None:
            continue
        try:
            actions.append(canonicalize(match["action"]))
        except EmptyActionError:
            continue
        if len(actions) == n:
            break
    if not actions:
        raise SynthesisParseError("proposal lists no actions")
    return tuple(actions)


def propose_candidates(
    base: CompletionModel,
    history: History,
    expert_step: Step,
    n: int,
    temperature: float,
) -> CandidateSet:
    """!
    Ask ``base`` for ``n`` alternatives at ``history`` and pool them with the expert action.

    A reply listing fewer than ``n`` actions is accepted as is.
    """
    prompt = build_proposal_prompt(history, n)
    t = len(history.steps) + 1
    last: SynthesisParseError | None = None
    for text in (prompt, prompt + REMINDER):
        try:
            actions = parse_proposals(base.complete_text(text, temperature), n)
            break
        except SynthesisParseError as exc:
            log.debug(f"proposal at step {t} rejected: {exc}")
            last = exc
    else:
        raise SynthesisParseError(f"no usable proposal at step {t} after retry: {last}")
    if len(actions) < n:
        log.debug(f"proposal at step {t} listed {len(actions)} of {n} actions")
    sampled = tuple(StepSample(thought=Thought.plain(), action=action) for action in actions)
    expert = StepSample(thought=Thought.plain(), action=expert_step.action)
    return CandidateSet(
        step_index=t,
        history=history,
        expert=expert,
        sampled=sampled,
        unique_actions=count_unique(expert, sampled),
    )

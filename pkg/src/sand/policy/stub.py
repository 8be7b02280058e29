"""Deterministic template backend for hermetic runs.

As a policy it cycles through a fixed list of actions. As a base model it
recognizes the critique, deliberation and proposal prompts and answers them
from the fields it finds in the prompt, so its output is a pure function of
the prompt. Proposals list its own actions in order.
"""

from __future__ import annotations

import re

from sand.core.text import BULLET_PATTERN
from sand.core.types import History, StepSample
from sand.policy.base import CompletionModel, Policy, PolicyConfig

CRITIQUE_MARKER = "### Private Mental Simulations"
DELIBERATION_MARKER = "### Private Scratch-pad"
PROPOSAL_MARKER = "### Candidate Actions"
_DELIBERATION_END = "### Very Important"

_CANDIDATE = re.compile(r"start with the action \*\*(?P<action>.+?)\*\*")
_TARGET = re.compile(r"must be \*\*(?P<action>.+?)\*\*")
_REWARD = re.compile(r"Final reward: (?P<reward>\d+(?:\.\d+)?)")
_NOTE_REWARD = re.compile(r"reward of (?P<reward>\d+(?:\.\d+)?)")
_ACTION_LINE = re.compile(r"^Action: ", re.MULTILINE)
_PROPOSAL_COUNT = re.compile(r"exactly \*\*(?P<n>\d+)\*\*")

DEFAULT_ACTIONS = ("do nothing",)


class TemplateStubPolicy(Policy, CompletionModel):
    def __init__(self, actions: tuple[str, ...] = DEFAULT_ACTIONS) -> None:
        self.actions = tuple(actions) or DEFAULT_ACTIONS
        self._samples = tuple(StepSample.of(a) for a in self.actions)

    @classmethod
    def from_config(cls, config: PolicyConfig) -> "TemplateStubPolicy":
        return cls(config.actions or DEFAULT_ACTIONS)

    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        return self._samples[len(history.steps) % len(self._samples)]

    def complete_text(self, prompt: str, temperature: float) -> str:
        if CRITIQUE_MARKER in prompt:
            return self._critique(prompt)
        if DELIBERATION_MARKER in prompt:
            return self._deliberation(prompt)
        if PROPOSAL_MARKER in prompt:
            return self._proposal(prompt)
        return f"Action: {self.actions[0]}"

    def _proposal(self, prompt: str) -> str:
        count = _PROPOSAL_COUNT.search(prompt)
        n = int(count["n"]) if count else 1
        return "\n".join(f"- {self.actions[i % len(self.actions)]}" for i in range(n))

    @staticmethod
    def _critique(prompt: str) -> str:
        candidate = _CANDIDATE.search(prompt)
        action = candidate["action"] if candidate else "this action"
        rewards = _REWARD.findall(prompt)
        reward = rewards[-1] if rewards else "0.0"
        if float(reward) >= 0.5:
            verdict = "It moves the task forward and is worth committing to."
        else:
            verdict = "It does little for the goal and risks wasting steps."
        return f"Action Evaluation: Doing {action} now ends with a final reward of {reward}. {verdict}"

    @staticmethod
    def _deliberation(prompt: str) -> str:
        start = prompt.index(DELIBERATION_MARKER) + len(DELIBERATION_MARKER)
        end = prompt.find(_DELIBERATION_END, start)
        block = prompt[start : end if end != -1 else len(prompt)]
        bullets = []
        for line in block.splitlines():
            match = BULLET_PATTERN.match(line)
            if match is None:
                continue
            note = _NOTE_REWARD.search(match["judgement"])
            if note is None:
                judgement = "worth weighing against the other options"
            elif float(note["reward"]) >= 0.5:
                judgement = f"likely ends with a reward of {note['reward']}, a solid step"
            else:
                judgement = f"likely ends with a reward of {note['reward']}, probably a detour"
            bullets.append(f"- {match['action'].strip()}: {judgement}")

        target = _TARGET.search(prompt)
        chosen = target["action"] if target else "the next action"
        state_start = prompt.find("### Current State")
        taken = len(_ACTION_LINE.findall(prompt[state_start:start])) if state_start != -1 else 0
        reflection = (
            f"I have taken {taken} steps so far and need to choose my next action carefully."
        )
        rationale = f"Comparing these options, {chosen} is the most reliable way forward, so I will do it now."
        return f"Thought: {reflection}\n\n" + "\n".join(bullets) + f"\n\n{rationale}"

"""Text conventions shared by policies, synthesis, export and metrics."""

from __future__ import annotations

import re

# A deliberation bullet: "- <candidate action>: <judgement>"
BULLET_PATTERN = re.compile(r"^\s*-\s+(?P<action>[^:\n]+?)\s*:(?P<judgement>.*)$")

_THOUGHT_PATTERN = re.compile(r"^\s*Thought\s*:\s*", re.IGNORECASE)
_ACTION_PATTERN = re.compile(r"^\s*Action\s*:\s*(?P<action>.*)$", re.IGNORECASE | re.MULTILINE)

_WS = re.compile(r"\s+")


def canonical_form(raw: str) -> str:
    """Trim, collapse whitespace, lowercase, then drop trailing periods."""
    return _WS.sub(" ", raw.strip()).lower().rstrip(". ")


def count_tokens(text: str) -> int:
    """Whitespace-delimited token count; a model-agnostic proxy."""
    return len(text.split())


def bullet_lines(text: str) -> list[re.Match[str]]:
    return [m for line in text.splitlines() if (m := BULLET_PATTERN.match(line))]


def is_deliberative_text(text: str) -> bool:
    """A thought is deliberative when it lists at least two ``- <text>:`` bullets."""
    return len(bullet_lines(text)) >= 2


def split_step_text(text: str) -> tuple[str, str]:
    """
    Split a model turn following the "Thought: ... Action: ..." contract.

    Returns ``(thought, action)``. The thought is everything before the last
    ``Action:`` line with its ``Thought:`` label removed; an action-only turn
    yields an empty thought. Text without any ``Action:`` line is taken to be
    the action itself.
    """
    matches = list(_ACTION_PATTERN.finditer(text))
    if not matches:
        return "", text.strip()
    last = matches[-1]
    thought = _THOUGHT_PATTERN.sub("", text[: last.start()].strip(), count=1).strip()
    action = last.group("action").strip()
    return thought, action


def render_first_turn(instruction: str, initial_observation: str | None = None) -> str:
    """The opening user turn: the starting description, when known, then the instruction."""
    if initial_observation:
        return f"{initial_observation}\n{instruction}"
    return instruction


def render_step_text(thought: str, action: str) -> str:
    """Inverse of :func:`split_step_text`: the assistant turn for one step."""
    if thought.strip():
        return f"Thought: {thought}\nAction: {action}"
    return f"Action: {action}"


def with_article(noun: str) -> str:
    return f"{'an' if noun[:1] in 'aeiou' else 'a'} {noun}"


def join_listing(items: list[str]) -> str:
    """English listing: "x", "x and y", "x, y, and z"."""
    if not items:
        return ""
    if len(items) == 1:
        return items[0]
    if len(items) == 2:
        return f"{items[0]} and {items[1]}"
    return ", ".join(items[:-1]) + f", and {items[-1]}"

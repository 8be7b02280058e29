"""Prompt assets.

Each ``<name>.md`` file starts with a YAML front-matter block naming its
slots, followed by the template body. Slots use ``{slot_name}``; only the
declared slots are substituted, so other braces (``{obj}``, ``{recep}``)
survive untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import yaml

from sand.core.errors import ConfigError

PROMPTS_DIR = Path(__file__).parent
CRITIQUE = "critique"
DELIBERATION = "deliberation"
ALTERNATIVES = "alternatives"
ENV_PROMPTS = ("alfworld", "sciworld")

_FRONT_MATTER = re.compile(r"\A---\n(?P<meta>.*?)\n---\n(?P<body>.*)\Z", re.DOTALL)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    description: str
    slots: tuple[str, ...]
    body: str

    def fill(self, **values: str) -> str:
        """Substitute every declared slot; all of them must be given."""
        missing = [slot for slot in self.slots if slot not in values]
        if missing:
            raise ConfigError(f"prompt '{self.name}' is missing slots: {', '.join(missing)}")
        pattern = re.compile(r"\{(" + "|".join(map(re.escape, self.slots)) + r")\}")
        return pattern.sub(lambda m: str(values[m.group(1)]), self.body)


def parse_template(text: str, name: str) -> PromptTemplate:
    match = _FRONT_MATTER.match(text)
    if match is None:
        raise ConfigError(f"prompt '{name}' has no front matter")
    meta = yaml.safe_load(match["meta"]) or {}
    return PromptTemplate(
        name=meta.get("name", name),
        description=meta.get("description", ""),
        slots=tuple(meta.get("slots", ())),
        body=match["body"].rstrip("\n"),
    )


@lru_cache(maxsize=None)
def load_prompt(name: str) -> PromptTemplate:
    """Load a bundled prompt asset by name (without extension)."""
    path = PROMPTS_DIR / f"{name}.md"
    if not path.is_file():
        available = ", ".join(sorted(p.stem for p in PROMPTS_DIR.glob("*.md")))
        raise ConfigError(f"unknown prompt asset '{name}'. Available: {available}")
    return parse_template(path.read_text(encoding="utf-8"), name)


def system_prompt(asset: str) -> str:
    """Environment system prompt with an empty task slot."""
    if asset not in ENV_PROMPTS:
        raise ConfigError(f"unknown environment prompt '{asset}'. Available: {', '.join(ENV_PROMPTS)}")
    return load_prompt(asset).fill(task="").rstrip()

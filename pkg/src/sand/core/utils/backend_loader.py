from __future__ import annotations

import importlib
from enum import Enum
from typing import Any

from sand.core.errors import ConfigError


def resolve(dotted: str) -> Any:
    """
    Resolve 'package.module:Qual.Name' into the actual object,
    importing the module only when this is called.
    """
    mod_path, _, qualname = dotted.partition(":")
    mod = importlib.import_module(mod_path)
    obj = mod
    if qualname:
        for part in qualname.split("."):
            obj = getattr(obj, part)
    return obj


def resolve_member(registry: type[Enum], name: str) -> Any:
    """
    Look up ``name`` (case-insensitive) in an Enum whose values are
    ``"pkg.mod:QualName"`` strings and import only that member's target.

    Raises:
        ConfigError: unknown name, or the target cannot be imported.
    """
    key = name.strip().upper()
    member = registry.__members__.get(key)
    if member is None:
        available = ", ".join(m.lower() for m in registry.__members__) or "(none)"
        raise ConfigError(f"Unknown backend '{name}'. Available: {available}")
    try:
        return resolve(member.value)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(
            f"Backend '{name}' could not be imported (value='{member.value}'): {exc}"
        ) from exc

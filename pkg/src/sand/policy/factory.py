from __future__ import annotations

from enum import Enum

from sand.core.errors import ConfigError
from sand.core.tools.log import log
from sand.core.utils.backend_loader import resolve_member
from sand.policy.base import CompletionModel, Policy, PolicyConfig


class Backends(Enum):
    """Policy backends; values are resolved lazily so optional clients load on demand."""

    SCRIPTED_EXPERT = "sand.policy.scripted:ScriptedExpertPolicy"
    TABULAR = "sand.policy.tabular:TabularPolicy"
    REMOTE_CHAT = "sand.policy.remote:RemoteChatPolicy"
    TEMPLATE_STUB = "sand.policy.stub:TemplateStubPolicy"


def build_policy(config: PolicyConfig) -> Policy:
    cls = resolve_member(Backends, config.backend)
    log.debug(f"building {config.backend} policy")
    return cls.from_config(config)


def build_base_model(config: PolicyConfig) -> CompletionModel:
    model = build_policy(config)
    if not isinstance(model, CompletionModel):
        raise ConfigError(f"backend '{config.backend}' cannot complete text; use template_stub or remote_chat")
    return model

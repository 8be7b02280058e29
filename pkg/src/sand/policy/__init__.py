from sand.policy.base import (
    CompletionModel,
    Policy,
    PolicyConfig,
    greedy_rollout,
    history_to_messages,
    parse_step_text,
)
from sand.policy.factory import Backends, build_base_model, build_policy

__all__ = [
    "Backends",
    "CompletionModel",
    "Policy",
    "PolicyConfig",
    "build_base_model",
    "build_policy",
    "greedy_rollout",
    "history_to_messages",
    "parse_step_text",
]

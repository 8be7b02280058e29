from sand.env.base import EnvBackend, EnvHandle, EnvOutcome, replay_prefix, score, step
from sand.env.task import Goal, RewardMode, TaskSpec, load_task_specs, write_task_specs
from sand.env.textgrid import NOTHING_HAPPENED, TextGridEnv

__all__ = [
    "NOTHING_HAPPENED",
    "EnvBackend",
    "EnvHandle",
    "EnvOutcome",
    "Goal",
    "RewardMode",
    "TaskSpec",
    "TextGridEnv",
    "load_task_specs",
    "replay_prefix",
    "score",
    "step",
    "write_task_specs",
]

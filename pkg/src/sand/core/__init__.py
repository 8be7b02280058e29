from sand.core.errors import SandError
from sand.core.probability import OFF_SUPPORT, trajectory_log_prob
from sand.core.types import (
    Action,
    DeliberationStep,
    DeliberationTrajectory,
    History,
    Instruction,
    Observation,
    Split,
    Step,
    StepSample,
    Thought,
    ThoughtKind,
    Trajectory,
    canonicalize,
    step_count,
)

__all__ = [
    "OFF_SUPPORT",
    "Action",
    "DeliberationStep",
    "DeliberationTrajectory",
    "History",
    "Instruction",
    "Observation",
    "SandError",
    "Split",
    "Step",
    "StepSample",
    "Thought",
    "ThoughtKind",
    "Trajectory",
    "canonicalize",
    "step_count",
    "trajectory_log_prob",
]

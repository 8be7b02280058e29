from sand.dataset.iteration import IterationState, advance, load_state, save_state, start
from sand.dataset.records import SCHEMA_VERSION, StepRecord, TrajectoryRecord
from sand.dataset.store import (
    DatasetManifest,
    DatasetSource,
    check_dataset,
    describe_dataset,
    export_sft_chat,
    load_deliberation,
    load_records,
    load_trajectories,
    manifest_for,
    write_deliberation,
    write_trajectories,
)

__all__ = [
    "SCHEMA_VERSION",
    "DatasetManifest",
    "DatasetSource",
    "IterationState",
    "StepRecord",
    "TrajectoryRecord",
    "advance",
    "check_dataset",
    "describe_dataset",
    "export_sft_chat",
    "load_deliberation",
    "load_records",
    "load_state",
    "load_trajectories",
    "manifest_for",
    "save_state",
    "start",
    "write_deliberation",
    "write_trajectories",
]

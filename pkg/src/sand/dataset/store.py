"""Dataset files, their manifests and the chat export for finetuning."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sand.core.errors import (
    DatasetIOError,
    DatasetValidationError,
    LoadError,
    PreconditionError,
    SandError,
)
from sand.core.text import render_first_turn, render_step_text
from sand.core.tools.log import log
from sand.core.types import DeliberationTrajectory, Trajectory
from sand.core.utils import ConfigPath, write_jsonl
from sand.dataset.records import TrajectoryRecord
from sand.prompts import system_prompt

MANIFEST_SUFFIX = ".manifest.json"
# Advisory for the external trainer: 3 epochs on the first iteration, 1 afterwards.
FIRST_ITERATION_EPOCHS = 3
LATER_ITERATION_EPOCHS = 1


class DatasetSource(str, Enum):
    EXPERT = "expert"
    DELIBERATION = "deliberation"


class DatasetManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    trajectory_count: int = Field(ge=0)
    iteration: int = Field(ge=0)
    source: DatasetSource
    checksum: str
    epochs: int = Field(default=LATER_ITERATION_EPOCHS, ge=1)

    def verify(self) -> "DatasetManifest":
        """Raise :class:`DatasetIOError` unless the file still matches its checksum."""
        path = ConfigPath(self.path)
        if not path.is_file():
            raise DatasetIOError(f"dataset {self.path} is missing")
        actual = path.sha256()
        if actual != self.checksum:
            raise DatasetIOError(f"dataset {self.path} changed: checksum {actual[:12]} != {self.checksum[:12]}")
        return self


def manifest_path(path: str | Path) -> Path:
    return Path(f"{path}{MANIFEST_SUFFIX}")


def manifest_for(path: str | Path) -> DatasetManifest:
    """The sidecar manifest written next to ``path``."""
    sidecar = ConfigPath(manifest_path(path))
    try:
        return DatasetManifest.model_validate(sidecar.read_json())
    except FileNotFoundError as exc:
        raise DatasetIOError(f"no manifest for {path}") from exc
    except (ValidationError, ValueError) as exc:
        raise DatasetIOError(f"unreadable manifest {sidecar}: {exc}") from exc


def load_records(path: str | Path) -> list[tuple[int, TrajectoryRecord]]:
    """Parse every line into a record; malformed lines raise :class:`LoadError`."""
    source = ConfigPath(path)
    if not source.is_file():
        raise DatasetIOError(f"dataset file not found: {source}")
    records = []
    try:
        for line_no, text in source.iter_jsonl():
            try:
                records.append((line_no, TrajectoryRecord.model_validate(json.loads(text))))
            except json.JSONDecodeError as exc:
                raise LoadError(f"invalid JSON: {exc.msg}", line=line_no) from exc
            except ValidationError as exc:
                raise LoadError(_first_error(exc), line=line_no) from exc
    except OSError as exc:
        raise DatasetIOError(f"cannot read {source}: {exc}") from exc
    return records


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(p) for p in err["loc"])
    return f"{where}: {err['msg']}" if where else err["msg"]


def _convert(line_no: int, record: TrajectoryRecord, deliberation: bool):
    try:
        return record.to_deliberation() if deliberation else record.to_trajectory()
    except ValidationError as exc:
        raise DatasetValidationError(_first_error(exc), line=line_no) from exc
    except (SandError, ValueError) as exc:
        raise DatasetValidationError(str(exc), line=line_no) from exc


def load_trajectories(path: str | Path) -> list[Trajectory]:
    """
    Load and validate trajectories; deliberation records load as plain
    trajectories that keep their thought kinds and candidate counts.
    """
    trajectories = [_convert(n, r, deliberation=False) for n, r in load_records(path)]
    log.info(f"loaded {len(trajectories)} trajectories from {path}")
    return trajectories


def load_deliberation(path: str | Path) -> list[DeliberationTrajectory]:
    loaded = []
    for line_no, record in load_records(path):
        if not record.is_deliberation:
            raise DatasetValidationError("expert record in a deliberation dataset", line=line_no)
        loaded.append(_convert(line_no, record, deliberation=True))
    return loaded


def check_dataset(path: str | Path) -> tuple[list[tuple[int, Trajectory]], list[tuple[int, str]]]:
    """Validate every line without stopping at the first problem."""
    source = ConfigPath(path)
    if not source.is_file():
        raise DatasetIOError(f"dataset file not found: {source}")
    valid: list[tuple[int, Trajectory]] = []
    problems: list[tuple[int, str]] = []
    for line_no, text in source.iter_jsonl():
        try:
            record = TrajectoryRecord.model_validate(json.loads(text))
            if record.is_deliberation:
                _convert(line_no, record, deliberation=True)
            valid.append((line_no, _convert(line_no, record, deliberation=False)))
        except json.JSONDecodeError as exc:
            problems.append((line_no, f"invalid JSON: {exc.msg}"))
        except ValidationError as exc:
            problems.append((line_no, _first_error(exc)))
        except DatasetValidationError as exc:
            problems.append((line_no, str(exc).removeprefix(f"line {line_no}: ")))
    return valid, problems


def describe_dataset(path: str | Path, iteration: int = 0, source: DatasetSource = DatasetSource.EXPERT) -> DatasetManifest:
    """Manifest for an existing file: its sidecar if present, else computed from the content."""
    if manifest_path(path).is_file():
        return manifest_for(path)
    count = len(load_records(path))
    return DatasetManifest(
        path=str(path),
        trajectory_count=count,
        iteration=iteration,
        source=source,
        checksum=ConfigPath(path).sha256(),
    )


def _write(records: list[TrajectoryRecord], path: str | Path, iteration: int, source: DatasetSource) -> DatasetManifest:
    target = ConfigPath(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        count = write_jsonl(target, (r.dump() for r in records))
        manifest = DatasetManifest(
            path=str(target),
            trajectory_count=count,
            iteration=iteration,
            source=source,
            checksum=target.sha256(),
            epochs=FIRST_ITERATION_EPOCHS if iteration == 1 else LATER_ITERATION_EPOCHS,
        )
        manifest_path(target).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {target}: {exc}") from exc
    log.info(f"wrote {count} {source.value} trajectories to {target} (sha256 {manifest.checksum[:12]})")
    return manifest


def write_trajectories(trajectories: list[Trajectory], path: str | Path, iteration: int = 0) -> DatasetManifest:
    records = [TrajectoryRecord.from_trajectory(e, iteration) for e in trajectories]
    return _write(records, path, iteration, DatasetSource.EXPERT)


def write_deliberation(ds: list[DeliberationTrajectory], path: str | Path) -> DatasetManifest:
    if not ds:
        raise PreconditionError("nothing to write: empty deliberation dataset")
    iterations = {d.iteration for d in ds}
    if len(iterations) != 1:
        raise PreconditionError(f"deliberation dataset mixes iterations {sorted(iterations)}")
    records = [TrajectoryRecord.from_deliberation(d) for d in ds]
    return _write(records, path, iterations.pop(), DatasetSource.DELIBERATION)


def chat_messages(e: Trajectory | DeliberationTrajectory, system: str) -> list[dict[str, str]]:
    """
    One chat record: the system prompt, the opening user turn, then one
    assistant turn per step with the observations in between.
    """
    initial = e.initial_observation
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": render_first_turn(e.instruction.text, initial.text if initial else None)},
    ]
    last = len(e.steps) - 1
    for index, step in enumerate(e.steps):
        messages.append({"role": "assistant", "content": render_step_text(step.thought.text, str(step.action))})
        if index < last and step.observation is not None:
            messages.append({"role": "user", "content": step.observation.text})
    return messages


def export_sft_chat(
    ds: list[Trajectory] | list[DeliberationTrajectory],
    path: str | Path,
    system_prompt_asset: str = "alfworld",
) -> int:
    """Write ``{"messages": [...]}`` per trajectory; loss masking is left to the trainer."""
    system = system_prompt(system_prompt_asset)
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        count = write_jsonl(target, ({"messages": chat_messages(e, system)} for e in ds))
    except OSError as exc:
        raise DatasetIOError(f"cannot write {target}: {exc}") from exc
    log.info(f"exported {count} chat records to {target}")
    return count

"""State of the self-learning loop, persisted as ``state.json`` for resume."""

from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sand.core.errors import ConfigError, DatasetIOError, IterationCompleteError
from sand.core.tools.log import log
from sand.core.utils import ConfigPath
from sand.dataset.store import DatasetManifest
from sand.policy.base import PolicyConfig

STATE_FILE = "state.json"


class IterationState(BaseModel):
    """
    ``k`` completed iterations out of ``total``. ``history[0]`` is the expert
    dataset and ``history[k]`` the dataset the next iteration replays.
    ``pending`` holds a dataset synthesized in iteration ``k+1`` whose
    training hook has not succeeded yet.
    """

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)
    total: int = Field(ge=1)
    current_manifest: DatasetManifest
    history: tuple[DatasetManifest, ...]
    pending: DatasetManifest | None = None
    # Policy produced by the last training hook, used by the next iteration.
    policy: PolicyConfig | None = None

    @model_validator(mode="after")
    def _check(self) -> "IterationState":
        if self.k > self.total:
            raise ValueError(f"k={self.k} exceeds total iterations {self.total}")
        if len(self.history) != self.k + 1:
            raise ValueError(f"history holds {len(self.history)} manifests, expected {self.k + 1}")
        if self.history[-1] != self.current_manifest:
            raise ValueError("current manifest must be the last history entry")
        return self

    @property
    def complete(self) -> bool:
        return self.k == self.total


def start(expert: DatasetManifest, total: int) -> IterationState:
    return IterationState(k=0, total=total, current_manifest=expert, history=(expert,))


def advance(state: IterationState, new_manifest: DatasetManifest, policy: PolicyConfig | None = None) -> IterationState:
    """Make ``new_manifest`` the replay source of the next iteration."""
    if state.complete:
        raise IterationCompleteError(f"all {state.total} iterations already ran")
    return state.model_copy(
        update={
            "k": state.k + 1,
            "current_manifest": new_manifest,
            "history": (*state.history, new_manifest),
            "pending": None,
            "policy": policy if policy is not None else state.policy,
        }
    )


def with_pending(state: IterationState, manifest: DatasetManifest) -> IterationState:
    return state.model_copy(update={"pending": manifest})


def save_state(state: IterationState, directory: str | Path) -> Path:
    path = Path(directory) / STATE_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(state.model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write {path}: {exc}") from exc
    return path


def load_state(directory: str | Path) -> IterationState | None:
    """The saved state in ``directory``, or ``None`` when there is none."""
    path = ConfigPath(Path(directory) / STATE_FILE)
    if not path.is_file():
        return None
    try:
        state = IterationState.model_validate(path.read_json())
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"corrupt iteration state {path}: {exc}") from exc
    log.info(f"resuming at iteration {state.k}/{state.total} from {path}")
    return state

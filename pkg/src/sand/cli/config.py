"""Run configuration: built-in defaults, overridden by a YAML file, overridden by flags."""

from __future__ import annotations

import os
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sand.core.errors import ConfigError
from sand.core.tools.log import log
from sand.core.utils import ConfigPath, write_yaml
from sand.deliberation.pipeline import DeliberationSettings
from sand.deliberation.sampler import SamplingMode
from sand.env.base import EnvBackend
from sand.env.task import RewardMode, TaskSpec, load_task_specs
from sand.policy.base import PolicyConfig
from sand.prompts import ENV_PROMPTS

CONFIG_ECHO = "config.yaml"


class EnvKind(str, Enum):
    TEXTGRID = "textgrid"
    REMOTE = "remote"


class EnvConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: EnvKind = EnvKind.TEXTGRID
    endpoint: str | None = None
    timeout: float = Field(default=30.0, gt=0.0)

    @model_validator(mode="after")
    def _check(self) -> "EnvConfig":
        if self.kind is EnvKind.REMOTE and not self.endpoint:
            raise ValueError("a remote environment needs an 'endpoint' (host:port)")
        return self


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tasks: str | None = None
    expert_data: str | None = None
    output_dir: str = "runs/sand"


def _default_jobs() -> int:
    return os.cpu_count() or 1


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(default=5, ge=1)
    iterations: int = Field(default=3, ge=1)
    sample_temperature: float = Field(default=1.0, ge=0.0)
    eval_temperature: float = Field(default=0.0, ge=0.0)
    # None: on for binary-reward tasks, off when any task is graded.
    expert_switch: bool | None = None
    reroll_expert: bool = False
    include_sampled_thoughts: bool = False
    critique: bool = True
    sampling: SamplingMode = SamplingMode.SELF_CONSISTENCY
    # Overrides every task's own step limit when set.
    max_steps: int | None = Field(default=None, ge=1)
    seed: int = 0
    jobs: int = Field(default_factory=_default_jobs, ge=1)
    reject_threshold: float = Field(default=0.10, ge=0.0, le=1.0)
    env_prompt: str = "alfworld"
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    base_model: PolicyConfig = Field(default_factory=lambda: PolicyConfig(temperature=0.0))
    env: EnvConfig = Field(default_factory=EnvConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    hook: str | None = None

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.env_prompt not in ENV_PROMPTS:
            raise ValueError(f"env_prompt must be one of {', '.join(ENV_PROMPTS)}")
        return self

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)

    def switch_enabled(self, specs: list[TaskSpec]) -> bool:
        if self.expert_switch is not None:
            return self.expert_switch
        return all(spec.reward_mode is RewardMode.BINARY for spec in specs)

    def settings(self, specs: list[TaskSpec]) -> DeliberationSettings:
        return DeliberationSettings(
            n=self.n,
            sample_temperature=self.sample_temperature,
            expert_switch=self.switch_enabled(specs),
            reroll_expert=self.reroll_expert,
            include_sampled_thoughts=self.include_sampled_thoughts,
            critique=self.critique,
            sampling=self.sampling,
        )


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Resolve the effective configuration; any problem is a :class:`ConfigError`."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = ConfigPath(path).read_yaml()
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        log.debug(f"loaded config from {path}")
    try:
        return RunConfig.model_validate(_merge(data, overrides or {}))
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def echo_config(config: RunConfig, directory: Path | None = None) -> Path:
    """Write the effective configuration next to the outputs it produced."""
    out = directory or config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    target = out / CONFIG_ECHO
    write_yaml(target, config.model_dump(mode="json"))
    return target


def build_env(config: RunConfig) -> EnvBackend:
    if config.env.kind is EnvKind.REMOTE:
        from sand.env.remote import RemoteEnv

        return RemoteEnv(config.env.endpoint, config.env.timeout)
    from sand.env.textgrid import TextGridEnv

    return TextGridEnv()


def load_specs(config: RunConfig, tasks: Path | None = None) -> list[TaskSpec]:
    path = tasks or config.paths.tasks
    if path is None:
        raise ConfigError("no task file: set paths.tasks or pass --tasks")
    specs = load_task_specs(path)
    if config.max_steps is not None:
        specs = [spec.model_copy(update={"max_steps": config.max_steps}) for spec in specs]
    return specs

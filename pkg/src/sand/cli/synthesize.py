from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from sand.cli.common import (
    EXIT_REJECTS,
    Toggle,
    apply_verbosity,
    config_option,
    console,
    exit_on_error,
    output_option,
    overrides,
    verbose_option,
)
from sand.cli.config import RunConfig, build_env, echo_config, load_run_config, load_specs
from sand.core.errors import ConfigError
from sand.core.tools.log import log
from sand.core.types import Trajectory
from sand.core.utils import write_jsonl
from sand.dataset.store import DatasetManifest, load_trajectories, write_deliberation
from sand.deliberation.pipeline import SynthesisResult, synthesize_dataset
from sand.deliberation.sampler import SamplingMode
from sand.env.base import EnvBackend
from sand.env.task import TaskSpec, index_specs
from sand.policy.base import CompletionModel, Policy
from sand.policy.factory import build_base_model, build_policy

DELIBERATION_FILE = "deliberation.jsonl"
REJECTS_FILE = "rejects.jsonl"


def iteration_dir(out: Path, iteration: int) -> Path:
    return out / f"iter{iteration}"


def run_synthesis(
    config: RunConfig,
    policy: Policy,
    base: CompletionModel,
    backend: EnvBackend,
    specs: list[TaskSpec],
    trajectories: list[Trajectory],
    iteration: int,
    out: Path,
) -> tuple[DatasetManifest | None, SynthesisResult]:
    """Synthesize one iteration into ``out/iter<k>/``; rejects go to their own file."""
    result = synthesize_dataset(
        policy,
        base,
        backend,
        index_specs(specs),
        trajectories,
        config.settings(specs),
        config.seed,
        iteration,
        jobs=config.jobs,
    )
    target = iteration_dir(out, iteration)
    target.mkdir(parents=True, exist_ok=True)
    write_jsonl(target / REJECTS_FILE, (r.to_record() for r in result.rejects))
    manifest = write_deliberation(result.trajectories, target / DELIBERATION_FILE) if result.trajectories else None
    return manifest, result


def print_summary(result: SynthesisResult, manifest: DatasetManifest | None, iteration: int) -> None:
    table = Table(title=f"Synthesis, iteration {iteration}", header_style="bold")
    table.add_column("Item", justify="left", style="cyan")
    table.add_column("Value", justify="right", style="green")
    table.add_row("Trajectories", str(len(result.trajectories)))
    table.add_row("Flagged steps", str(result.flagged))
    table.add_row("Switches", str(result.switches))
    table.add_row("Completions issued", str(result.completions))
    table.add_row("Rejected", f"{len(result.rejects)} ({result.reject_rate:.1%})")
    table.add_row("Output", manifest.path if manifest is not None else "-")
    console.print(table)


def too_many_rejects(config: RunConfig, result: SynthesisResult) -> bool:
    if result.reject_rate > config.reject_threshold or not result.trajectories:
        log.error(f"{len(result.rejects)} of {result.total} trajectories rejected (threshold {config.reject_threshold:.0%})")
        return True
    return False


def synthesize(
    config_path: Optional[Path] = config_option(),
    expert_data: Optional[Path] = typer.Option(None, "--input", "-i", help="Expert dataset (overrides paths.expert_data)."),
    tasks: Optional[Path] = typer.Option(None, "--tasks", help="Task file (overrides paths.tasks)."),
    iteration: int = typer.Option(1, "--iteration", min=1, help="Iteration tag for the written records."),
    n: Optional[int] = typer.Option(None, "--n", min=1, help="Samples per step."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    expert_switch: Optional[Toggle] = typer.Option(None, "--expert-switch", help="Allow switching to better explored actions."),
    sampling: Optional[SamplingMode] = typer.Option(None, "--sampling", help="Where candidates come from."),
    backend: Optional[str] = typer.Option(None, "--backend", help="Policy backend."),
    base_backend: Optional[str] = typer.Option(None, "--base-backend", help="Base model backend."),
    jobs: Optional[int] = typer.Option(None, "--jobs", min=1, help="Trajectories processed concurrently."),
    output: Optional[Path] = output_option(),
    verbose: bool = verbose_option(),
) -> None:
    """Synthesize deliberation trajectories from an expert dataset (one iteration)."""
    apply_verbosity(verbose)
    with exit_on_error():
        config = load_run_config(
            config_path,
            overrides(
                n=n,
                seed=seed,
                expert_switch=expert_switch,
                sampling=sampling,
                backend=backend,
                base_backend=base_backend,
                jobs=jobs,
                output=output,
            ),
        )
        source = expert_data or config.paths.expert_data
        if source is None:
            raise ConfigError("no expert dataset: set paths.expert_data or pass --input")
        out = config.output_dir
        echo_config(config, out)
        specs = load_specs(config, tasks)
        trajectories = load_trajectories(source)
        manifest, result = run_synthesis(
            config,
            build_policy(config.policy),
            build_base_model(config.base_model),
            build_env(config),
            specs,
            trajectories,
            iteration,
            out,
        )
    print_summary(result, manifest, iteration)
    if too_many_rejects(config, result):
        raise typer.Exit(EXIT_REJECTS)
    log.ok(f"iteration {iteration} synthesized: {len(result.trajectories)} trajectories")

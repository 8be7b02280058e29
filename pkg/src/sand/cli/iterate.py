from __future__ import annotations

import os
import subprocess
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
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
from sand.cli.synthesize import iteration_dir, print_summary, run_synthesis, too_many_rejects
from sand.core.errors import ConfigError, HookError
from sand.core.tools.log import log
from sand.core.utils import ConfigPath
from sand.dataset.iteration import IterationState, advance, load_state, save_state, start, with_pending
from sand.dataset.store import DatasetManifest, describe_dataset, export_sft_chat, load_deliberation, load_trajectories
from sand.deliberation.sampler import SamplingMode
from sand.policy.base import PolicyConfig
from sand.policy.factory import build_base_model, build_policy

CHAT_FILE = "chat.jsonl"
POLICY_OUT = "policy.yaml"


def run_hook(command: str, chat: Path, manifest: DatasetManifest, iteration: int, workdir: Path) -> PolicyConfig | None:
    """!
    Run the external training command for one iteration.

    @param command Shell command; it sees SAND_CHAT_PATH, SAND_DATASET_PATH,
        SAND_ITERATION and SAND_POLICY_OUT in its environment.
    @return The policy the hook wrote to SAND_POLICY_OUT, if any.
    """
    policy_out = workdir / POLICY_OUT
    env = {
        **os.environ,
        "SAND_CHAT_PATH": str(chat),
        "SAND_DATASET_PATH": manifest.path,
        "SAND_ITERATION": str(iteration),
        "SAND_POLICY_OUT": str(policy_out),
    }
    log.info(f"running training hook for iteration {iteration}: {command}")
    result = subprocess.run(command, shell=True, env=env, check=False)
    if result.returncode != 0:
        raise HookError(f"training hook exited with status {result.returncode} at iteration {iteration}")
    if not policy_out.is_file():
        return None
    try:
        return PolicyConfig.model_validate(ConfigPath(policy_out).read_yaml())
    except ValidationError as exc:
        raise ConfigError(f"hook wrote an invalid policy config {policy_out}: {exc}") from exc


def _initial_state(config: RunConfig, out: Path) -> IterationState:
    state = load_state(out)
    if state is None:
        if config.paths.expert_data is None:
            raise ConfigError("no expert dataset: set paths.expert_data")
        return start(describe_dataset(config.paths.expert_data).verify(), config.iterations)
    if state.total != config.iterations:
        try:
            state = IterationState.model_validate({**state.model_dump(), "total": config.iterations})
        except ValidationError as exc:
            raise ConfigError(f"cannot run {config.iterations} iterations: {exc}") from exc
    return state


def print_lineage(state: IterationState) -> None:
    table = Table(title="Dataset lineage", header_style="bold")
    table.add_column("Iteration", justify="right", style="cyan")
    table.add_column("Source", justify="left")
    table.add_column("Trajectories", justify="right", style="green")
    table.add_column("Epochs", justify="right")
    table.add_column("Checksum", justify="left", style="magenta")
    for manifest in state.history:
        table.add_row(
            str(manifest.iteration),
            manifest.source.value,
            str(manifest.trajectory_count),
            str(manifest.epochs),
            manifest.checksum[:12],
        )
    console.print(table)


def iterate(
    config_path: Optional[Path] = config_option(),
    iterations: Optional[int] = typer.Option(None, "--iterations", min=1, help="Total iterations I."),
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
    """Run the self-learning loop: synthesize, train (hook), hand off, repeat."""
    apply_verbosity(verbose)
    with exit_on_error():
        config = load_run_config(
            config_path,
            overrides(
                n=n,
                iterations=iterations,
                seed=seed,
                expert_switch=expert_switch,
                sampling=sampling,
                backend=backend,
                base_backend=base_backend,
                jobs=jobs,
                output=output,
            ),
        )
        out = config.output_dir
        echo_config(config, out)
        specs = load_specs(config)
        backend_env = build_env(config)
        base = build_base_model(config.base_model)
        state = _initial_state(config, out)

        while not state.complete:
            k = state.k + 1
            workdir = iteration_dir(out, k)
            if state.pending is not None:
                manifest = state.pending.verify()
                log.info(f"iteration {k} already synthesized ({manifest.path}); skipping to training")
            else:
                source = state.current_manifest.verify()
                policy = build_policy(state.policy or config.policy)
                manifest, result = run_synthesis(
                    config, policy, base, backend_env, specs, load_trajectories(source.path), k, out
                )
                print_summary(result, manifest, k)
                if too_many_rejects(config, result):
                    save_state(state, out)
                    raise typer.Exit(EXIT_REJECTS)
                state = with_pending(state, manifest)
                save_state(state, out)

            chat = workdir / CHAT_FILE
            export_sft_chat(load_deliberation(manifest.path), chat, config.env_prompt)
            trained = run_hook(config.hook, chat, manifest, k, workdir) if config.hook else None
            state = advance(state, manifest, trained)
            save_state(state, out)
            log.ok(f"iteration {k}/{state.total} complete: next iteration replays {manifest.path}")

    print_lineage(state)

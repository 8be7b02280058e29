from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich.markup import escape
from rich.table import Table

from sand.cli.common import EXIT_VALIDATION, apply_verbosity, config_option, console, exit_on_error, verbose_option
from sand.cli.config import build_env, load_run_config, load_specs
from sand.core.errors import ReplayDivergenceError, SandError
from sand.core.tools.log import log
from sand.core.types import Trajectory
from sand.dataset.store import check_dataset, manifest_for, manifest_path
from sand.env.base import EnvBackend, replay_prefix
from sand.env.task import TaskSpec, index_specs


def replay_problems(
    backend: EnvBackend, specs: dict[str, TaskSpec], trajectories: list[tuple[int, Trajectory]]
) -> list[tuple[int, str]]:
    """Replay every trajectory in full and report where the environment disagrees."""
    problems = []
    for line_no, e in trajectories:
        spec = specs.get(e.instruction.id)
        if spec is None:
            problems.append((line_no, f"no task spec for '{e.instruction.id}'"))
            continue
        try:
            replay_prefix(backend, spec, e, len(e.steps)).close()
        except ReplayDivergenceError as exc:
            problems.append((line_no, f"ReplayDivergence at step {exc.step}: {exc}"))
        except SandError as exc:
            problems.append((line_no, f"{type(exc).__name__}: {exc}"))
    return problems


def validate(
    path: Path = typer.Argument(..., help="Dataset file to check."),
    config_path: Optional[Path] = config_option(),
    tasks: Optional[Path] = typer.Option(None, "--tasks", help="Task file; enables the environment replay check."),
    verbose: bool = verbose_option(),
) -> None:
    """Validate a dataset: record structure, checksum, and replay in the environment."""
    apply_verbosity(verbose)
    with exit_on_error():
        config = load_run_config(config_path)
        valid, problems = check_dataset(path)
        if manifest_path(path).is_file():
            try:
                manifest_for(path).verify()
            except SandError as exc:
                problems.append((0, str(exc)))
        if tasks is not None or config.paths.tasks is not None:
            specs = index_specs(load_specs(config, tasks))
            problems += replay_problems(build_env(config), specs, valid)

    if problems:
        table = Table(title=f"Problems in {path}", header_style="bold")
        table.add_column("Line", justify="right", style="cyan")
        table.add_column("Problem", justify="left", style="red")
        for line_no, message in sorted(problems):
            table.add_row(str(line_no) if line_no else "-", escape(message))
            log.error(f"{path}:{line_no}: {message}")
        console.print(table)
        raise typer.Exit(EXIT_VALIDATION)
    console.print(f"[green]OK[/green] {len(valid)} trajectories")
    log.ok(f"{path} is valid")

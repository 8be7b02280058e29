from __future__ import annotations

from pathlib import Path

import typer

from sand.cli.common import apply_verbosity, console, exit_on_error, verbose_option
from sand.dataset.store import export_sft_chat, load_trajectories


def export(
    path: Path = typer.Argument(..., help="Expert or deliberation dataset."),
    output: Path = typer.Option(..., "--output", "-o", help="Chat JSONL to write."),
    env_prompt: str = typer.Option("alfworld", "--env-prompt", help="System prompt asset (alfworld or sciworld)."),
    verbose: bool = verbose_option(),
) -> None:
    """Export a dataset as chat records for supervised finetuning."""
    apply_verbosity(verbose)
    with exit_on_error():
        count = export_sft_chat(load_trajectories(path), output, env_prompt)
    console.print(f"Exported {count} chat records to {output}")

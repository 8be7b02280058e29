from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer
from rich.table import Table

from sand.cli.common import apply_verbosity, console, exit_on_error, verbose_option
from sand.core.tools.log import log
from sand.core.types import Split
from sand.dataset.store import write_trajectories
from sand.env.fixtures import expert_corpus
from sand.env.remote import WireServer
from sand.env.task import DEFAULT_MAX_STEPS, RewardMode, write_task_specs
from sand.env.textgrid import TextGridEnv
from sand.policy.tabular import TabularPolicy

app = typer.Typer(help="TextGrid household environment")

TASKS_FILE = "tasks.jsonl"
EXPERT_FILE = "expert.jsonl"
POLICY_FILE = "policy.yaml"


@app.command()
def generate(
    output: Path = typer.Option(Path("data/textgrid"), "--output", "-o", help="Directory to write into."),
    n: int = typer.Option(30, "--n", min=1, help="Number of tasks."),
    mode: RewardMode = typer.Option(RewardMode.BINARY, "--mode", help="Reward mode."),
    seed: int = typer.Option(0, "--seed", help="World seed of the first task."),
    split: Split = typer.Option(Split.TRAIN, "--split"),
    max_steps: int = typer.Option(DEFAULT_MAX_STEPS, "--max-steps", min=1),
    expert_mass: float = typer.Option(1.0, "--expert-mass", min=0.0, max=1.0, help="Policy mass on the expert step."),
    distractor: Optional[list[str]] = typer.Option(
        None, "--distractor", help="Action sharing the remaining policy mass; repeatable."
    ),
    verbose: bool = verbose_option(),
) -> None:
    """Write a task file, solved expert trajectories and a tabular policy over them."""
    apply_verbosity(verbose)
    with exit_on_error():
        specs, trajectories = expert_corpus(n, reward_mode=mode, seed=seed, split=split, max_steps=max_steps)
        output.mkdir(parents=True, exist_ok=True)
        write_task_specs(specs, output / TASKS_FILE)
        manifest = write_trajectories(trajectories, output / EXPERT_FILE)
        policy = TabularPolicy.from_trajectories(
            trajectories, expert_mass=expert_mass, distractors=tuple(distractor or ())
        )
        policy.write(output / POLICY_FILE)

    table = Table(title="TextGrid corpus", header_style="bold")
    table.add_column("File", justify="left", style="cyan")
    table.add_column("Contents", justify="left", style="green")
    table.add_row(TASKS_FILE, f"{len(specs)} {mode.value} tasks")
    table.add_row(EXPERT_FILE, f"{manifest.trajectory_count} expert trajectories")
    table.add_row(POLICY_FILE, f"tabular policy, expert mass {expert_mass}")
    console.print(table)


@app.command()
def serve(
    host: str = typer.Option("127.0.0.1", "--host", help="Address to bind."),
    port: int = typer.Option(7878, "--port", help="Port to bind."),
    verbose: bool = verbose_option(),
) -> None:
    """Serve TextGrid over the newline-delimited JSON wire protocol."""
    apply_verbosity(verbose)
    server = WireServer(TextGridEnv(), host=host, port=port)
    log.ok(f"TextGrid listening on {server.endpoint}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        log.warning("KeyboardInterrupt received. Shutting down.")
    finally:
        server.stop()

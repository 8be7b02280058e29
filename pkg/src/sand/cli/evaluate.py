from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from sand.cli.common import (
    EXIT_BACKEND,
    apply_verbosity,
    config_option,
    console,
    exit_on_error,
    output_option,
    overrides,
    verbose_option,
)
from sand.cli.config import build_env, echo_config, load_run_config, load_specs
from sand.core.errors import EnvTimeoutError, PolicyUnavailableError
from sand.core.tools.log import log
from sand.core.types import Split
from sand.metrics.analysis import band_histogram, difficulty_bands, format_multiplier, token_multiplier
from sand.metrics.evaluation import EvalReport, evaluate as evaluate_policy
from sand.metrics.report import BANDS_CSV, load_report, render_report, write_bands, write_report
from sand.policy.factory import build_policy

_BACKEND_FAILURES = tuple(cls.__name__ for cls in (PolicyUnavailableError, EnvTimeoutError))


def backend_down(report: EvalReport) -> bool:
    """Every task failed because a backend could not be reached."""
    return all(row.error is not None and row.error.startswith(_BACKEND_FAILURES) for row in report.per_task)


def evaluate(
    config_path: Optional[Path] = config_option(),
    tasks: Optional[Path] = typer.Option(None, "--tasks", help="Task file (overrides paths.tasks)."),
    split: Optional[Split] = typer.Option(None, "--split", help="Only evaluate tasks of this split."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    backend: Optional[str] = typer.Option(None, "--backend", help="Policy backend."),
    jobs: Optional[int] = typer.Option(None, "--jobs", min=1, help="Tasks evaluated concurrently."),
    bands_from: Optional[Path] = typer.Option(
        None, "--bands-from", help="Base policy report.json: assign difficulty bands and write bands.csv."
    ),
    output: Optional[Path] = output_option(),
    verbose: bool = verbose_option(),
) -> None:
    """Evaluate a policy on test tasks and write report.csv / report.json."""
    apply_verbosity(verbose)
    with exit_on_error():
        config = load_run_config(
            config_path, overrides(seed=seed, backend=backend, jobs=jobs, output=output)
        )
        out = config.output_dir
        echo_config(config, out)
        specs = load_specs(config, tasks)
        if split is not None:
            specs = [spec for spec in specs if spec.instruction.split is split]
        report = evaluate_policy(
            build_policy(config.policy),
            build_env(config),
            specs,
            temperature=config.eval_temperature,
            seed=config.seed,
            jobs=config.jobs,
        )
        render_report(report)
        csv_path, json_path = write_report(report, out)
        log.info(f"report written to {csv_path} and {json_path}")

        if bands_from is not None:
            base = load_report(bands_from)
            bands = difficulty_bands({row.task_id: row.reward for row in base.per_task})
            rates = {row.task_id: row.deliberation_rate for row in report.per_task}
            target = write_bands(band_histogram(bands, rates), out / BANDS_CSV)
            console.print(f"Token multiplier vs base: {format_multiplier(token_multiplier(base, report))}")
            log.info(f"difficulty bands written to {target}")

    if backend_down(report):
        raise typer.Exit(EXIT_BACKEND)

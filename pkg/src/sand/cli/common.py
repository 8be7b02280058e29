"""Options, exit codes and error reporting shared by all commands."""

from __future__ import annotations

from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Optional

import typer
from rich.console import Console
from rich.markup import escape

from sand.core.errors import EnvTimeoutError, PolicyUnavailableError, SandError
from sand.core.tools.log import log, set_level
from sand.deliberation.sampler import SamplingMode

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BACKEND = 2
EXIT_REJECTS = 3

console = Console()


class Toggle(str, Enum):
    ON = "on"
    OFF = "off"


def config_option() -> Any:
    return typer.Option(None, "--config", "-c", help="Path to a run configuration YAML file.", dir_okay=False)


def output_option(help: str = "Output directory (overrides paths.output_dir).") -> Any:
    return typer.Option(None, "--output", "-o", help=help)


def verbose_option() -> Any:
    return typer.Option(False, "--verbose", "-v", help="Log at DEBUG level.")


def apply_verbosity(verbose: bool) -> None:
    if verbose:
        set_level("DEBUG")


def overrides(
    *,
    n: Optional[int] = None,
    iterations: Optional[int] = None,
    seed: Optional[int] = None,
    expert_switch: Optional[Toggle] = None,
    sampling: Optional[SamplingMode] = None,
    backend: Optional[str] = None,
    base_backend: Optional[str] = None,
    jobs: Optional[int] = None,
    output: Optional[Path] = None,
) -> dict[str, Any]:
    """Nested config overrides for the flags that were actually given."""
    flat = {"n": n, "iterations": iterations, "seed": seed, "jobs": jobs}
    result: dict[str, Any] = {k: v for k, v in flat.items() if v is not None}
    if expert_switch is not None:
        result["expert_switch"] = expert_switch is Toggle.ON
    if sampling is not None:
        result["sampling"] = sampling.value
    if backend is not None:
        result["policy"] = {"backend": backend}
    if base_backend is not None:
        result["base_model"] = {"backend": base_backend}
    if output is not None:
        result["paths"] = {"output_dir": str(output)}
    return result


@contextmanager
def exit_on_error() -> Iterator[None]:
    """Report domain errors and exit with the matching status code."""
    try:
        yield
    except (PolicyUnavailableError, EnvTimeoutError) as exc:
        log.error(f"{type(exc).__name__}: {exc}")
        console.print(f"[red]Backend unavailable:[/red] {escape(str(exc))}")
        raise typer.Exit(EXIT_BACKEND)
    except SandError as exc:
        log.error(f"{type(exc).__name__}: {exc}")
        console.print(f"[red]{type(exc).__name__}:[/red] {escape(str(exc))}")
        raise typer.Exit(EXIT_VALIDATION)

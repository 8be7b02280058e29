"""Report output: a rich table for the terminal, CSV and JSON for tooling."""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from sand.core.errors import ConfigError, DatasetIOError
from sand.core.utils import ConfigPath
from sand.metrics.evaluation import EvalReport

TOKEN_NOTE = "Token counts are whitespace-delimited proxy tokens; only ratios between reports are meaningful."
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
BANDS_CSV = "bands.csv"

console = Console()


def report_frame(report: EvalReport) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.per_task])


def render_report(report: EvalReport, title: str = "Evaluation", out: Console | None = None) -> None:
    table = Table(title=title, header_style="bold", caption=TOKEN_NOTE)
    table.add_column("Task", justify="left", style="cyan")
    table.add_column("Reward", justify="right", style="green")
    table.add_column("Steps", justify="right")
    table.add_column("Tokens", justify="right")
    table.add_column("Delib. rate", justify="right", style="magenta")
    table.add_column("Reward/step", justify="right")
    table.add_column("Error", justify="left", style="yellow")
    for row in report.per_task:
        table.add_row(
            row.task_id,
            f"{row.reward:.3f}",
            str(row.steps),
            str(row.tokens),
            f"{row.deliberation_rate:.3f}",
            f"{row.per_step_reward:.3f}",
            row.error or "-",
        )
    table.add_section()
    table.add_row(
        "average",
        f"{report.average_reward:.3f}",
        "",
        f"{report.avg_tokens:.1f}",
        f"{report.avg_deliberation_rate:.3f}",
        f"{report.avg_per_step_reward:.3f}",
        f"{len(report.failures)} failed" if report.failures else "-",
    )
    (out or console).print(table)


def write_report(report: EvalReport, directory: str | Path) -> tuple[Path, Path]:
    """Write ``report.csv`` (with a comment header) and ``report.json``."""
    out = Path(directory)
    csv_path, json_path = out / REPORT_CSV, out / REPORT_JSON
    try:
        out.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", encoding="utf-8", newline="") as f:
            f.write(f"# {TOKEN_NOTE}\n")
            report_frame(report).to_csv(f, index=False)
        payload = {
            "note": TOKEN_NOTE,
            "averages": report.averages(),
            "per_task": [row.model_dump() for row in report.per_task],
        }
        json_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot write report to {out}: {exc}") from exc
    return csv_path, json_path


def load_report(path: str | Path) -> EvalReport:
    try:
        payload = ConfigPath(path).read_json()
        return EvalReport.model_validate({"per_task": payload["per_task"]})
    except FileNotFoundError as exc:
        raise ConfigError(f"report not found: {path}") from exc
    except (KeyError, ValueError, ValidationError) as exc:
        raise ConfigError(f"unreadable report {path}: {exc}") from exc


def write_bands(frame: pd.DataFrame, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False)
    except OSError as exc:
        raise DatasetIOError(f"cannot write {target}: {exc}") from exc
    return target

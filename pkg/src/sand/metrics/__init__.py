from sand.metrics.analysis import (
    Band,
    band_histogram,
    count_tokens,
    deliberation_rate,
    difficulty_bands,
    format_multiplier,
    per_step_reward,
    token_multiplier,
)
from sand.metrics.evaluation import EvalReport, TaskResult, evaluate
from sand.metrics.report import load_report, render_report, write_report

__all__ = [
    "Band",
    "EvalReport",
    "TaskResult",
    "band_histogram",
    "count_tokens",
    "deliberation_rate",
    "difficulty_bands",
    "evaluate",
    "format_multiplier",
    "load_report",
    "per_step_reward",
    "render_report",
    "token_multiplier",
    "write_report",
]

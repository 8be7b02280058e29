"""Error hierarchy shared by every stage of the synthesis loop.

Each error carries enough context to point at the offending input: the
candidate action (``action``), the trajectory step (``step``) or the dataset
line (``line``).
"""

from __future__ import annotations


class SandError(Exception):
    """Base class for all domain errors raised by the package."""

    def __init__(self, message: str = "", *, action: str | None = None) -> None:
        super().__init__(f"[{action}] {message}" if action is not None else message)
        self.action = action

    def with_action(self, action: str) -> "SandError":
        """Attach the candidate action this error concerns, if not already set."""
        if self.action is None:
            self.action = action
            self.args = (f"[{action}] {self.args[0] if self.args else ''}",)
        return self


# --- core ---------------------------------------------------------------------


class EmptyActionError(SandError):
    """An action string was empty after trimming."""


class UnscorableError(SandError):
    """The policy backend exposes no per-step probabilities."""


class PreconditionError(SandError):
    """An operation was called with arguments outside its contract."""


# --- env ----------------------------------------------------------------------


class InvalidTaskError(SandError):
    """A task goal references unknown entities or is already satisfied."""


class EpisodeClosedError(SandError):
    """Step called on an environment that already terminated."""


class EpisodeOpenError(SandError):
    """Score requested before the episode terminated."""


class ReplayDivergenceError(SandError):
    """Replaying expert actions produced observations that differ from the record."""

    def __init__(self, message: str, *, step: int, expected: str = "", got: str = "") -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.expected = expected
        self.got = got


class EnvTimeoutError(SandError):
    """A remote environment did not answer in time or could not be reached."""


class ProtocolError(SandError):
    """A remote environment answered with a malformed record."""


# --- policy -------------------------------------------------------------------


class PolicyUnavailableError(SandError):
    """A remote model failed after exhausting its retries."""


class ScriptExhaustedError(SandError):
    """A scripted policy was asked for a step past the end of its script."""


# --- deliberation -------------------------------------------------------------


class CritiqueParseError(SandError):
    """The base model did not return a parsable action evaluation."""


class SynthesisContractError(SandError):
    """The deliberation target is not among the candidate actions."""


class SynthesisParseError(SandError):
    """The base model did not return a valid deliberation thought."""


class AssemblyError(SandError):
    """Per-step synthesis results do not cover the source trajectory."""


# --- dataset ------------------------------------------------------------------


class LoadError(SandError):
    """A dataset line could not be parsed into a record."""

    def __init__(self, message: str, *, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetValidationError(SandError):
    """A dataset record parsed but violates trajectory invariants."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DatasetIOError(SandError):
    """Reading or writing a dataset file failed, or its checksum does not match."""


class ConfigError(SandError):
    """A configuration file, prompt asset or backend name is invalid."""


class IterationCompleteError(SandError):
    """The self-learning loop already ran all of its iterations."""


# --- metrics ------------------------------------------------------------------


class EmptyEvaluationError(SandError):
    """Evaluation was requested over zero tasks."""


class TooFewTasksError(SandError):
    """Difficulty bands need at least three tasks."""


class DivisionDomainError(SandError):
    """A ratio was requested with a zero denominator."""


# --- cli ----------------------------------------------------------------------


class HookError(SandError):
    """The external training hook exited with a nonzero status."""

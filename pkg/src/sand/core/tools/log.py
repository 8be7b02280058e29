from datetime import datetime
import logging
import os


class bcolors:
    """! Color codes giving each log level a visual cue on the terminal."""

    OKBLUE = "\033[94m"  # Blue
    OKCYAN = "\033[96m"  # Cyan
    OKGREEN = "\033[92m"  # Green
    WARNING = "\033[93m"  # Yellow
    FAIL = "\033[91m"  # Red
    ENDC = "\033[0m"  # Reset color
    BOLD = "\033[1m"  # Bold


# Custom log level: OK (between INFO and WARNING)
OK_LEVEL_NUM = 25
logging.addLevelName(OK_LEVEL_NUM, "OK")

LOGGER_NAME = "sand"
LEVEL_ENV_VAR = "SAND_LOG_LEVEL"


def ok(
    self: logging.Logger, message: str, *args: object, **kwargs: object
) -> None:
    """! Log at the OK level.

    Used for milestones of a run (an iteration finished, a dataset written)
    that matter more than INFO chatter.

    @param message The log message.
    @param args Additional arguments for formatting the message.
    @param kwargs Additional keyword arguments.
    """
    if self.isEnabledFor(OK_LEVEL_NUM):
        self._log(OK_LEVEL_NUM, message, args, **kwargs)


logging.Logger.ok = ok  # Add the `ok` method to the Logger class


class CustomFormatter(logging.Formatter):
    """! Colorizes log levels and stamps each line with a millisecond timestamp."""

    COLORS: dict[str, str] = {
        "DEBUG": bcolors.OKBLUE,
        "INFO": bcolors.OKCYAN,
        "OK": bcolors.OKGREEN + bcolors.BOLD,
        "WARNING": bcolors.WARNING,
        "ERROR": bcolors.FAIL,
        "CRITICAL": bcolors.FAIL + bcolors.BOLD,
        "NOTSET": bcolors.ENDC,
    }

    def __init__(
        self,
        fmt: str = "[%(levelname)s] [%(asctime)s] - %(message)s",
        datefmt: str | None = None,
    ) -> None:
        super().__init__(fmt, datefmt)

    def formatTime(
        self, record: logging.LogRecord, datefmt: str | None = None
    ) -> str:
        """! Format the timestamp as HH:MM:SS.mmm unless a format is given.

        @param record The log record.
        @param datefmt Optional format string for the timestamp.
        @return The formatted timestamp.
        """
        if datefmt:
            return datetime.fromtimestamp(record.created).strftime(datefmt)
        return (
            datetime.fromtimestamp(record.created).strftime("%H:%M:%S.")
            + f"{int(record.msecs):03d}"
        )

    def format(self, record: logging.LogRecord) -> str:
        log_message = super().format(record)
        color = self.COLORS.get(record.levelname, bcolors.ENDC)
        return color + log_message + bcolors.ENDC


def _level_from_env(default: str = "INFO") -> int:
    name = os.environ.get(LEVEL_ENV_VAR, default).upper()
    if name == "OK":
        return OK_LEVEL_NUM
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def setup_logger() -> logging.Logger:
    """! Configure the package logger with the colorized formatter.

    The level comes from ``SAND_LOG_LEVEL`` (default INFO). Calling this
    twice does not stack handlers.

    @return The configured logger.
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(_level_from_env())
    logger.propagate = False

    if not logger.handlers:
        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(CustomFormatter())
        logger.addHandler(stream_handler)

    return logger


def set_level(level: int | str) -> None:
    """! Change the level of the package logger at runtime (CLI ``--verbose``)."""
    if isinstance(level, str):
        level = OK_LEVEL_NUM if level.upper() == "OK" else logging.getLevelName(level.upper())
    log.setLevel(level)


log = setup_logger()

__all__ = ["log", "set_level", "OK_LEVEL_NUM"]

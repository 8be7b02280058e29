import hashlib
import json
import os
import zlib
from pathlib import Path, PosixPath, WindowsPath
from typing import Any, Iterable, Iterator, Type

import numpy as np
import yaml

from sand.core.tools.log import log

# Explicit mapping for known platforms
_OS_NAME_TO_PATH_CLS: dict[str, Type[Path]] = {
    "posix": PosixPath,  # Linux, macOS
    "nt": WindowsPath,  # Windows
}

BasePathClass: Type[Path] = _OS_NAME_TO_PATH_CLS.get(os.name, type(Path()))


class ConfigPath(BasePathClass):
    """
    A Path subclass with convenience methods for reading configuration and
    dataset files.
    """

    @property
    def str(self) -> str:
        return str(self)

    def read_yaml(self, raise_fnf_error: bool = True) -> dict:
        """
        Load a YAML mapping from this path.

        Args:
            raise_fnf_error: If True, raise FileNotFoundError when the file is missing.

        Returns:
            Parsed YAML as a dictionary. Returns {} if empty.
        """
        if self.exists():
            with self.open("r", encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        if raise_fnf_error:
            raise FileNotFoundError(f"Config file not found: {self}")
        log.error(f"Config file {self} does not exist.")
        return {}

    def read_json(self, raise_fnf_error: bool = True) -> dict:
        """
        Load a JSON document from this path.

        Args:
            raise_fnf_error: If True, raise FileNotFoundError when the file is missing.
        """
        if self.exists():
            with self.open("r", encoding="utf-8") as f:
                return json.load(f)
        if raise_fnf_error:
            raise FileNotFoundError(f"Config file not found: {self}")
        log.error(f"Config file {self} does not exist.")
        return {}

    def iter_jsonl(self) -> Iterator[tuple[int, str]]:
        """
        Yield ``(line_number, text)`` for every non-blank line, 1-based.
        """
        with self.open("r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if line.strip():
                    yield number, line

    def sha256(self) -> str:
        """Hex digest of the file content."""
        return hashlib.sha256(self.read_bytes()).hexdigest()

    def __repr__(self) -> str:
        return f"<ConfigPath path={super().__str__()}>"


def write_jsonl(path: Path, records: Iterable[dict[str, Any]]) -> int:
    """Write one compact JSON object per line; returns the record count."""
    count = 0
    with Path(path).open("w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def write_yaml(path: Path, data: dict[str, Any]) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False)


def stable_key(text: str) -> int:
    """A process-independent integer key for a string (``hash`` is salted)."""
    return zlib.crc32(text.encode("utf-8"))


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive an independent child seed from a root seed and integer keys.

    The result only depends on its arguments, so a draw can be reproduced
    from ``(seed, step, candidate)`` alone regardless of evaluation order.
    """
    entropy = [int(seed) & 0xFFFFFFFF, *(int(k) & 0xFFFFFFFF for k in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])

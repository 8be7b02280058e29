from sand.core.utils.utils import ConfigPath, derive_seed, stable_key, write_jsonl, write_yaml

__all__ = ["ConfigPath", "derive_seed", "stable_key", "write_jsonl", "write_yaml"]

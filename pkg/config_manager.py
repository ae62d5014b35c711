#!/usr/bin/env python3
"""
ANEPFC Configuration Manager
Loads YAML settings files and merges them over the built-in defaults
"""

import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = "anepfc.yaml"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(ValueError):
    """Unknown or ill-typed settings key, or an unreadable settings file"""


@dataclass(frozen=True)
class Settings:
    net_budget: int = 20000
    tag_budget: int = 1000
    max_words_per_node: Optional[int] = None
    max_word_length: Optional[int] = None
    max_memory_mb: Optional[float] = None
    workers: int = 1
    detect_cycles: bool = False
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    golden_dir: str = "test_corpus"


_TYPES = {
    "net_budget": (int,),
    "tag_budget": (int,),
    "max_words_per_node": (int, type(None)),
    "max_word_length": (int, type(None)),
    "max_memory_mb": (int, float, type(None)),
    "workers": (int,),
    "detect_cycles": (bool,),
    "log_level": (str,),
    "log_file": (str, type(None)),
    "golden_dir": (str,),
}


class ConfigManager:
    """Resolves the settings file and exposes the effective Settings"""

    def __init__(self, config_path: Optional[Union[str, Path]] = None, working_dir: Union[str, Path] = "."):
        if config_path is not None:
            self.config_path: Optional[Path] = Path(config_path)
            if not self.config_path.exists():
                raise ConfigError(f"settings file {self.config_path} does not exist")
        else:
            candidate = Path(working_dir) / DEFAULT_CONFIG_NAME
            self.config_path = candidate if candidate.exists() else None
        self.settings = self.load()

    def load(self) -> Settings:
        if self.config_path is None:
            return Settings()
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{self.config_path} is not valid YAML: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{self.config_path} must hold a mapping of settings")
        settings = merge_settings(Settings(), data)
        logger.info(f"Loaded settings from {self.config_path}")
        return settings

    def get_config_info(self) -> dict:
        """Get the resolved settings file and the effective values"""
        return {
            "config_path": str(self.config_path) if self.config_path else None,
            "defaults_only": self.config_path is None,
            "settings": asdict(self.settings),
        }


def merge_settings(base: Settings, overrides: dict) -> Settings:
    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(unknown)}")
    for key, value in overrides.items():
        allowed = _TYPES[key]
        # bool is an int subclass; only detect_cycles takes booleans
        if isinstance(value, bool) and bool not in allowed:
            raise ConfigError(f"{key} must not be a boolean")
        if not isinstance(value, allowed):
            names = " or ".join("null" if t is type(None) else t.__name__ for t in allowed)
            raise ConfigError(f"{key} must be {names}, got {value!r}")
    merged = replace(base, **overrides)
    if merged.log_level.upper() not in LOG_LEVELS:
        raise ConfigError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
    if merged.workers < 1 or merged.net_budget < 0 or merged.tag_budget < 0:
        raise ConfigError("workers must be positive and budgets non-negative")
    return replace(merged, log_level=merged.log_level.upper())


if __name__ == "__main__":
    import json
    import sys

    manager = ConfigManager(sys.argv[1] if len(sys.argv) > 1 else None)
    print(json.dumps(manager.get_config_info(), indent=2))

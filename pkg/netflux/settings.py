"""User-level run settings for netflux."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, fields, replace

from netflux.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class RunSettings:
    """Resource and logging defaults shared by every campaign."""

    # Refuse any (d, L) whose grid has more than this many cells
    cell_budget: int = 10**6
    # Fraction of replicas allowed to drop out on solver failure
    failure_budget: float = 0.01
    log_level: str = "INFO"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.cell_budget, bool) or not isinstance(self.cell_budget, int) or self.cell_budget < 1:
            raise ConfigError(f"cell_budget must be a positive integer, got {self.cell_budget!r}")
        if isinstance(self.failure_budget, bool) or not isinstance(self.failure_budget, (int, float)):
            raise ConfigError(f"failure_budget must be a number, got {self.failure_budget!r}")
        if not 0.0 <= self.failure_budget < 1.0:
            raise ConfigError(f"failure_budget must lie in [0, 1), got {self.failure_budget}")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {', '.join(LOG_LEVELS)}, got {self.log_level!r}")
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")


class SettingsManager:
    """Reads and writes the per-user settings.json under the XDG config directory."""

    CONFIG_DIR = "netflux"
    CONFIG_FILE = "settings.json"

    def __init__(self):
        self.run = RunSettings()
        self._config_path: str | None = None

    def get_config_path(self) -> str:
        if self._config_path is None:
            base = os.environ.get("XDG_CONFIG_HOME") or os.path.join(os.path.expanduser("~"), ".config")
            self._config_path = os.path.join(base, self.CONFIG_DIR, self.CONFIG_FILE)
        return self._config_path

    def load(self):
        """
        Read settings.json over the defaults.

        An unreadable file leaves every default in place; a single invalid
        value keeps the default for that key only.
        """
        path = self.get_config_path()
        if not os.path.exists(path):
            return
        try:
            with open(path, "r") as f:
                section = json.load(f).get("run", {})
            items = list(section.items())
        except (OSError, json.JSONDecodeError, AttributeError):
            return

        known = {f.name for f in fields(RunSettings)}
        for key, value in items:
            if key not in known:
                logger.warning("Ignoring unknown setting %r in %s", key, path)
                continue
            try:
                self.run = replace(self.run, **{key: value})
            except ConfigError as e:
                logger.warning("Keeping default %s: %s", key, e)

    def save(self):
        path = self.get_config_path()
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as f:
            json.dump({"run": asdict(self.run)}, f, indent=2)

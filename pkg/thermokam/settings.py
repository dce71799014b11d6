"""Process-level settings read from the environment (.env honoured)."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from .errors import ConfigError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


@dataclass
class Settings:
    """Runtime settings; CLI flags override these."""
    log_level: str = "INFO"
    threads: int = 1
    output_dir: str = "outputs"
    color_logs: bool = True

    @classmethod
    def from_env(cls) -> 'Settings':
        """Load and validate settings from THERMOKAM_* environment variables"""
        try:
            threads = int(os.getenv('THERMOKAM_THREADS', '1'))
        except ValueError:
            raise ConfigError([f"THERMOKAM_THREADS must be an integer, got {os.getenv('THERMOKAM_THREADS')!r}"])
        settings = cls(
            log_level=os.getenv('THERMOKAM_LOG_LEVEL', 'INFO').upper(),
            threads=threads,
            output_dir=os.getenv('THERMOKAM_OUTPUT_DIR', 'outputs'),
            color_logs=os.getenv('THERMOKAM_COLOR_LOGS', 'true').lower() == 'true',
        )
        settings._validate()
        return settings

    def _validate(self):
        errors = []
        if self.log_level not in _LEVELS:
            errors.append(f"THERMOKAM_LOG_LEVEL must be one of {sorted(_LEVELS)}, got {self.log_level!r}")
        if self.threads < 1:
            errors.append(f"THERMOKAM_THREADS must be >= 1, got {self.threads}")
        if not self.output_dir:
            errors.append("THERMOKAM_OUTPUT_DIR must not be empty")
        if errors:
            raise ConfigError(errors)


def configure_logging(level: str = "INFO", *, color: bool = True) -> None:
    """Install the root handler once, coloured when requested."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    if color:
        import coloredlogs

        coloredlogs.install(level=numeric, fmt=LOG_FORMAT)
    else:
        logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)

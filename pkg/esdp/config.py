# esdp/config.py

import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Defaults shared by every command in this project
DEFAULT_MIN_SUPPORT = 2
DEFAULT_MAX_PATTERNS = 50      # cap for the adaptive miner
DEFAULT_SIGMA = 2
DEFAULT_TOP_N = 5
DEFAULT_MAX_GROUM_SIZE = 8
DEFAULT_REPO_FILENAME = "esdp-repo.xml"
DEFAULT_EXTENSIONS = (".java",)

REPO_ENV_VAR = "ESDP_REPO"
SOURCE_DATE_ENV_VAR = "SOURCE_DATE_EPOCH"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class RunConfig(BaseModel):
    """Thresholds and paths for one CLI run."""

    model_config = ConfigDict(frozen=True)

    corpus_dirs: list[Path] = Field(default_factory=list)
    extensions: tuple[str, ...] = DEFAULT_EXTENSIONS
    min_support: int = Field(default=DEFAULT_MIN_SUPPORT, ge=1)
    max_patterns: int = Field(default=DEFAULT_MAX_PATTERNS, ge=1)
    sigma: int = Field(default=DEFAULT_SIGMA, ge=1)
    max_groum_size: int | None = Field(default=DEFAULT_MAX_GROUM_SIZE, ge=1)
    top_n: int = Field(default=DEFAULT_TOP_N, ge=1)
    repo_path: Path = Path(DEFAULT_REPO_FILENAME)
    workers: int = Field(default=1, ge=1)

    @field_validator("extensions")
    @classmethod
    def _dotted(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(ext if ext.startswith(".") else f".{ext}" for ext in value)


def load_run_config(**overrides: Any) -> RunConfig:
    """
    Factory that combines the module defaults, the environment and explicit
    overrides into a validated RunConfig.

    Overrides whose value is None are ignored so argparse namespaces can be
    passed through unchanged.
    """
    values = {key: value for key, value in overrides.items() if value is not None}
    if "repo_path" not in values:
        values["repo_path"] = Path(os.getenv(REPO_ENV_VAR, DEFAULT_REPO_FILENAME))
    return RunConfig(**values)


def creation_timestamp(explicit: str | None = None) -> str:
    """
    Timestamp written into a mined repository.

    An explicit value wins; otherwise SOURCE_DATE_EPOCH pins it so identical
    corpora produce identical files; otherwise the current UTC time is used.
    """
    if explicit:
        moment = datetime.fromisoformat(explicit)
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=timezone.utc)
        return moment.isoformat()
    epoch = os.getenv(SOURCE_DATE_ENV_VAR)
    moment = (
        datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        if epoch
        else datetime.now(timezone.utc)
    )
    return moment.replace(microsecond=0).isoformat()


def configure_logging(verbose: bool = False) -> None:
    """Send log records to stderr; stdout is reserved for reports."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "esdp_handler", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.esdp_handler = True
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)

"""
Configuration Utilities for Wiki-ES

This module holds the validated configuration models and the helpers that
read them from JSON files and the environment.

Key features:
- GpConfig: the genetic-programming parameters and their defaults
- SensitivityConfig: acceptance thresholds c1/c2 and the concept matcher
- Run configuration files combining both (GpConfig fields at top level plus
  an optional "sensitivity" object)
- Environment fallbacks for worker threads and debug checks

Dependencies:
- pydantic: For field validation of configuration files
- dotenv: For environment variable management
"""

import json
import os
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.errors import ConfigError
from utils.log_utils import get_logger

logger = get_logger(__name__)

load_dotenv()


class Matcher(str, Enum):
    """How a query terminal is matched against a document profile."""

    WIKI_RELATEDNESS = "wiki"
    EXACT_TOKEN = "exact"


class SensitivityConfig(BaseModel):
    """
    Acceptance sensitivity of the concept-evaluator.

    c1 applies to named-entity concepts and c2 to general concepts; a concept
    absent from a document still matches when its document relatedness is
    strictly above the threshold. EXACT_TOKEN ignores both thresholds.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    c1: float = Field(default=0.95, gt=0.0, le=1.0)
    c2: float = Field(default=0.5, gt=0.0, le=1.0)
    matcher: Matcher = Matcher.WIKI_RELATEDNESS


class GpConfig(BaseModel):
    """Parameters of the co-evolutionary genetic program."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    generations: int = Field(default=250, gt=0)
    subpopulations: int = Field(default=10, gt=0)
    subpopulation_size: int = Field(default=100, gt=0)
    crossover_prob: float = Field(default=0.9, ge=0.0, le=1.0)
    mutation_prob: float = Field(default=0.9, ge=0.0, le=1.0)
    per_node_mutation_rate: float = Field(default=0.1, ge=0.0, le=1.0)
    initial_depth: int = Field(default=4, gt=0)
    max_crossover_depth: int = Field(default=8, gt=0)
    terminal_cap: int = Field(default=15, gt=0)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.subpopulation_size % 2:
            raise ValueError("subpopulation_size must be even (offspring are produced in pairs)")
        if self.max_crossover_depth < self.initial_depth:
            raise ValueError("max_crossover_depth must be at least initial_depth")
        return self

    def resolved_seed(self) -> int:
        """Return the seed, falling back to 0 with a warning when it is unset."""
        if self.seed is None:
            logger.warning("No seed configured; using seed 0")
            return 0
        return self.seed


def load_run_config(path: Optional[Union[str, Path]]) -> Tuple[GpConfig, SensitivityConfig]:
    """
    Read a run configuration file.

    Args:
        path (str | Path | None): JSON file; None yields the defaults

    Returns:
        tuple: (GpConfig, SensitivityConfig)

    Raises:
        ConfigError: If the file is not valid JSON or a field fails validation
    """
    if path is None:
        return GpConfig(), SensitivityConfig()

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")

    sensitivity = data.pop("sensitivity", None) or {}
    if not isinstance(sensitivity, dict):
        raise ConfigError(f"{path}: \"sensitivity\" must be a JSON object")
    try:
        return GpConfig(**data), SensitivityConfig(**sensitivity)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def write_sensitivity(path: Union[str, Path], sensitivity: SensitivityConfig) -> None:
    """Write a run configuration file holding only the sensitivity section."""
    payload = {"sensitivity": sensitivity.model_dump(mode="json")}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def resolve_threads(value: Optional[int] = None) -> int:
    """
    Decide the worker cap.

    Args:
        value (int, optional): Explicit --threads value

    Returns:
        int: The flag value, else WIKIES_THREADS, else the number of cores
    """
    if value is None:
        env_value = os.getenv("WIKIES_THREADS")
        if env_value:
            try:
                value = int(env_value)
            except ValueError as e:
                raise ConfigError(f"WIKIES_THREADS must be an integer, got {env_value!r}") from e
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError("thread count must be at least 1")
    return value


def debug_checks_enabled() -> bool:
    """Whether WIKIES_DEBUG_CHECKS asks for validators inside the GP loop."""
    return os.getenv("WIKIES_DEBUG_CHECKS", "false").lower() == "true"

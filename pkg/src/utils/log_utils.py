"""
Logging Utilities for Wiki-ES

Configures the ``wikies`` logger hierarchy from the environment. Diagnostics
are written to stderr so that command results on stdout stay machine-readable.

Environment:
- WIKIES_LOG: one of error, info, debug (default info)
"""

import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

ROOT_LOGGER = "wikies"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

LEVELS = {
    "error": logging.ERROR,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def get_logger(name: str) -> logging.Logger:
    """Return a logger below the ``wikies`` namespace."""
    if name.startswith(ROOT_LOGGER):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def configure_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Install a single stderr handler on the ``wikies`` logger.

    Args:
        level (str, optional): Level name; falls back to WIKIES_LOG, then "info"

    Returns:
        logging.Logger: The configured root logger of the package

    Raises:
        ValueError: If the level name is not recognised
    """
    load_dotenv()
    name = (level or os.getenv("WIKIES_LOG", "info")).strip().lower()
    if name not in LEVELS:
        raise ValueError(f"Invalid log level {name!r}. Use one of: {', '.join(LEVELS)}")

    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(LEVELS[name])
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    return logger

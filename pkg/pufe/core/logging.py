import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

import structlog

from pufe.core.config import settings

# Create a logger for the library
app_logger = logging.getLogger("pufe")

# Set the default level
app_logger.setLevel(logging.INFO)
app_logger.propagate = False

# Create a formatter
formatter = logging.Formatter(
    "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)

# Console output goes to stderr so report files and stdout stay clean
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setFormatter(formatter)
app_logger.addHandler(console_handler)

file_handler: Optional[RotatingFileHandler] = None

# Create a file handler if LOG_FILE is set
log_file = settings.log_file
if log_file:
    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    # 10 MB max size, keep 5 backup files
    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,
        backupCount=5,
    )
    file_handler.setFormatter(formatter)
    app_logger.addHandler(file_handler)

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

log_level = settings.log_level.upper()
if log_level in _LEVELS:
    app_logger.setLevel(getattr(logging, log_level))

structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.format_exc_info,
        structlog.processors.KeyValueRenderer(key_order=["event"], drop_missing=True),
    ],
    logger_factory=structlog.stdlib.LoggerFactory(),
    wrapper_class=structlog.stdlib.BoundLogger,
    cache_logger_on_first_use=True,
)


def setup_logging(level: Optional[str] = None) -> None:
    """Change the library log level at runtime (e.g. from a CLI flag)."""
    if level and level.upper() in _LEVELS:
        app_logger.setLevel(getattr(logging, level.upper()))


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Create a logger for a specific module.

    Args:
        name: The name of the module (typically __name__, under "pufe.")

    Returns:
        A structlog logger writing through the "pufe" handlers
    """
    return structlog.get_logger(name)

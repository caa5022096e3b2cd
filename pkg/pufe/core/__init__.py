"""Core module for the library.

This module contains core functionality shared by every service, including:
- Configuration management
- Logging
- Exception handling
- Utilities

These components provide the foundation for the numerical services and the
CLI and should be imported and used by other modules as needed.
"""

# This directory contains modules for:
# - exceptions.py: Custom exception classes
# - config.py: Process settings and the key=value run-config loader
# - logging.py: Logging setup and configuration
# - error_handlers.py: Error handling utilities
# - utils.py: Utility functions

from pufe.core.exceptions import (
    PufeError,
    ContractViolationError,
    ConfigurationError,
    DatasetParseError,
    TrialFailureError,
)
from pufe.core.config import (
    settings,
    Settings,
    load_run_config,
    parse_key_value_text,
    read_key_value_file,
)
from pufe.core.logging import setup_logging, app_logger, get_logger
from pufe.core.error_handlers import format_diagnostic, with_error_handling
from pufe.core.utils import create_dir_if_not_exists, spawn_seeds, split_csv_list

__all__ = [
    "settings",
    "Settings",
    "load_run_config",
    "parse_key_value_text",
    "read_key_value_file",
    "setup_logging",
    "app_logger",
    "get_logger",
    "PufeError",
    "ContractViolationError",
    "ConfigurationError",
    "DatasetParseError",
    "TrialFailureError",
    "format_diagnostic",
    "with_error_handling",
    "create_dir_if_not_exists",
    "spawn_seeds",
    "split_csv_list",
]

"""
Configuration loading: built-in defaults deep-merged with brackets_config.json
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import psutil

from .error_handler import DerivedBracketsError, ErrorCategory

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "brackets_config.json"

DEFAULT_CONFIG: Dict[str, Any] = {
    "arity": {
        "default": 4,
        "hard_cap": 7,
        "warn_above": 5,
    },
    "random": {
        "seed": 0,
        "fixtures": 20,
        "max_attempts": 4000,
    },
    "output": {
        "format": "json",
        "indent": 2,
        "include_timing": False,
        "max_failures": None,
    },
    "logging": {
        "level": "INFO",
        "file_logging": False,
        "log_dir": "logs",
    },
    "workers": 1,
    "polyform": {
        "t_degree_factor": 2,
    },
}


class ConfigurationError(DerivedBracketsError):
    category = ErrorCategory.CONFIGURATION


def deep_merge_config(default: Dict, user: Dict) -> Dict:
    """Deep merge user configuration with defaults"""
    result = copy.deepcopy(default)
    for key, value in user.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge_config(result[key], value)
        else:
            result[key] = value
    return result


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load configuration from `path` (or the repository default) over the built-in defaults.

    A missing default file is not an error; an explicitly named file that cannot be read is
    logged and the defaults are returned.
    """
    config_path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    defaults = copy.deepcopy(DEFAULT_CONFIG)
    try:
        if config_path.exists():
            with open(config_path, "r") as f:
                user = json.load(f)
            if not isinstance(user, dict):
                logger.error(f"Configuration {config_path} is not a JSON object, using defaults")
                return defaults
            logger.info(f"Loaded configuration from {config_path}")
            return deep_merge_config(defaults, user)
        if path is not None:
            logger.error(f"Configuration file not found: {config_path}, using defaults")
        else:
            logger.debug("No configuration file found, using defaults")
        return defaults
    except Exception as e:
        logger.error(f"Error loading configuration from {config_path}: {e}")
        return defaults


def resolve_workers(config: Dict[str, Any]) -> int:
    """`workers` is a positive count or "auto" for the number of physical cores"""
    workers = config.get("workers", 1)
    if workers == "auto":
        return psutil.cpu_count(logical=False) or 1
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigurationError(f"workers must be a positive integer or 'auto', got {workers!r}")
    return workers


def resolve_arity(config: Dict[str, Any], requested: Optional[int]) -> int:
    """Requested arity or the configured default, clamped to the hard cap with a warning"""
    limits = config["arity"]
    arity = limits["default"] if requested is None else requested
    if arity < 1:
        raise ConfigurationError(f"Arity must be at least 1, got {arity}")
    if arity > limits["hard_cap"]:
        logger.warning(f"Arity {arity} exceeds the hard cap {limits['hard_cap']}; using {limits['hard_cap']}")
        arity = limits["hard_cap"]
    if arity > limits["warn_above"]:
        logger.warning(f"Arity {arity}: every word sums over {arity}! permutations, expect long runs")
    return arity


def resolve_max_failures(config: Dict[str, Any]) -> Optional[int]:
    """`output.max_failures` caps how many violations a report lists; null lists them all"""
    limit = config["output"].get("max_failures")
    if limit is None:
        return None
    if isinstance(limit, bool) or not isinstance(limit, int) or limit < 0:
        raise ConfigurationError(f"output.max_failures must be a non-negative integer or null, got {limit!r}")
    return limit

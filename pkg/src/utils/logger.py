"""
Logging configuration for the derived brackets toolkit
"""

import logging
import sys
from pathlib import Path
from datetime import datetime


def setup_logger(log_level=logging.INFO, log_file=None, log_dir="logs", file_logging=True):
    """
    Setup logging configuration for the application

    Console output goes to stderr so that reports on stdout stay machine-readable.

    Args:
        log_level: Logging level (default: INFO)
        log_file: Optional log file path (default: auto-generated under log_dir)
        log_dir: Directory for generated log files
        file_logging: Also write a log file
    """
    handlers = [logging.StreamHandler(sys.stderr)]

    if file_logging:
        # Create logs directory if it doesn't exist
        logs_dir = Path(log_dir)
        logs_dir.mkdir(parents=True, exist_ok=True)

        # Generate log file name if not provided
        if log_file is None:
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            log_file = logs_dir / f"derived_brackets_{timestamp}.log"
        handlers.append(logging.FileHandler(log_file))

    # Configure logging format
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    date_format = '%Y-%m-%d %H:%M:%S'

    # Configure root logger
    logging.basicConfig(
        level=log_level,
        format=log_format,
        datefmt=date_format,
        handlers=handlers,
        force=True,
    )

    # Set specific logger levels
    logging.getLogger('sympy').setLevel(logging.WARNING)

    logger = logging.getLogger(__name__)
    if file_logging:
        logger.debug(f"Logging initialized - Log file: {log_file}")
    else:
        logger.debug("Logging initialized - console only")

    return logger

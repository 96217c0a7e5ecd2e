"""
Logging Configuration for Characterization Runs
Console output plus rotating run and error logs, and an issue monitor
that collects warnings and failures for the final report
"""

import logging
import logging.handlers
import os
from datetime import datetime
from typing import Dict, List, Optional

import config


def setup_logging(log_dir: Optional[str] = None, verbose: bool = False) -> logging.Logger:
    """
    Configure logging with both file and console handlers

    Args:
        log_dir: directory for the log files (current directory when None)
        verbose: show DEBUG messages on the console

    Returns:
        The configured root logger
    """
    log_dir = log_dir or '.'
    if not os.path.exists(log_dir):
        os.makedirs(log_dir)

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Clear any existing handlers
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers = []

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # Max 10MB per file, keep 5 backup files
    file_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, config.LOG_FILE),
        maxBytes=10*1024*1024,
        backupCount=5,
        encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    error_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, config.ERROR_LOG_FILE),
        maxBytes=5*1024*1024,
        backupCount=3,
        encoding='utf-8'
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(formatter)
    logger.addHandler(error_handler)

    logger.info("=" * 80)
    logger.info(f"Logging initialized at {datetime.now().isoformat()}")
    logger.info("=" * 80)

    return logger


class IssueMonitor:
    """
    Collect warnings and recoverable errors raised while a run continues
    Everything recorded here ends up in the report's issue summary
    """

    def __init__(self):
        self.error_counts: Dict[str, int] = {}
        self.warnings: List[Dict[str, str]] = []
        self.errors: List[Dict[str, str]] = []
        self.logger = logging.getLogger(__name__)

    def log_error(self, error_type: str, error_message: str):
        """
        Log a recoverable error (the affected stage is skipped)

        Args:
            error_type: stage or category, e.g. 'Decoherence', 'RPE', 'MLE'
            error_message: detailed error description
        """
        self.logger.error(f"{error_type}: {error_message}")
        self.error_counts[error_type] = self.error_counts.get(error_type, 0) + 1
        self.errors.append({'type': error_type, 'message': error_message})

    def log_warning(self, warning_type: str, warning_message: str):
        """Log a warning flag (the stage still produced a value)"""
        self.logger.warning(f"{warning_type}: {warning_message}")
        self.warnings.append({'type': warning_type, 'message': warning_message})

    @property
    def has_errors(self) -> bool:
        return bool(self.errors)

    def get_issue_summary(self) -> dict:
        """Get summary of recorded issues"""
        return {
            'total_error_types': len(self.error_counts),
            'error_counts': dict(self.error_counts),
            'errors': list(self.errors),
            'warnings': list(self.warnings),
        }

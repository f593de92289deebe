#!/usr/bin/env python3
"""
Centralized Logging System for the cloning-eavesdropper lab
Provides structured logging across all modules with rotation and formatting
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional
import sys

DEFAULT_LOG_DIR = os.path.join(os.path.expanduser("~"), ".clonelab", "logs")


class CloneLabLogger:
    """Centralized logger for the simulator and analysis pipeline"""

    _instance = None
    _logger = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(CloneLabLogger, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if self._logger is not None:
            return

        self._logger = logging.getLogger("clonelab")
        level_name = os.getenv("CLONELAB_LOG_LEVEL", "INFO").upper()
        self._logger.setLevel(getattr(logging, level_name, logging.INFO))

        # Prevent duplicate handlers
        if self._logger.handlers:
            return

        file_formatter = logging.Formatter(
            '%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        console_formatter = logging.Formatter('%(levelname)-8s | %(message)s')

        log_dir = os.getenv("CLONELAB_LOG_DIR", DEFAULT_LOG_DIR)
        try:
            os.makedirs(log_dir, exist_ok=True)
            # 10MB max, keep 5 files
            file_handler = RotatingFileHandler(
                os.path.join(log_dir, "clonelab.log"),
                maxBytes=10*1024*1024,
                backupCount=5,
                encoding='utf-8'
            )
            file_handler.setFormatter(file_formatter)
            self._logger.addHandler(file_handler)
        except OSError:
            # Read-only home directories still get console logging
            pass

        # stdout carries CSV/JSON output, so the console handler uses stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.WARNING)
        console_handler.setFormatter(console_formatter)
        self._logger.addHandler(console_handler)

        self._logger.debug("=== clonelab logger initialized ===")

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        """Get logger instance with optional module name"""
        if name:
            return logging.getLogger(f"clonelab.{name}")
        return self._logger

    def set_console_level(self, level: str):
        """Adjust console verbosity (used by the --log-level flag)"""
        for handler in self._logger.handlers:
            if not isinstance(handler, RotatingFileHandler):
                handler.setLevel(getattr(logging, level.upper(), logging.WARNING))

    def info(self, message: str, module: Optional[str] = None):
        self.get_logger(module).info(message)

    def warning(self, message: str, module: Optional[str] = None):
        self.get_logger(module).warning(message)

    def error(self, message: str, module: Optional[str] = None, exc_info: bool = False):
        self.get_logger(module).error(message, exc_info=exc_info)

    def debug(self, message: str, module: Optional[str] = None):
        self.get_logger(module).debug(message)


# Global logger instance
logger = CloneLabLogger()


def get_logger(module_name: str = None) -> logging.Logger:
    """Convenience function to get logger for a module"""
    return logger.get_logger(module_name)


def log_function_start(func_name: str, module: str = None, **kwargs):
    """Log an entry point with its resolved parameters"""
    params = ", ".join(f"{k}={v}" for k, v in kwargs.items()) if kwargs else "defaults"
    logger.info(f"Starting {func_name}({params})", module)


def log_function_end(func_name: str, module: str = None, result: str = "completed"):
    logger.info(f"Finished {func_name}: {result}", module)


def log_processing_step(step: str, module: str = None, details: str = ""):
    message = f"Step: {step}"
    if details:
        message += f" | {details}"
    logger.debug(message, module)


def log_error_with_context(error: Exception, context: str, module: str = None):
    """Log an unexpected exception with its traceback"""
    logger.error(f"Error in {context}: {type(error).__name__}: {error}", module, exc_info=True)


def log_validation_result(check: str, subject: str, passed: bool, details: str = "", module: str = None):
    """Log the outcome of a numerical cross-check; failures go out as warnings"""
    status = "PASSED" if passed else "FAILED"
    message = f"Check {status} | {check}: {subject}"
    if details:
        message += f" | {details}"

    if passed:
        logger.info(message, module)
    else:
        logger.warning(message, module)


def log_performance_metric(operation: str, duration: float, module: str = None, **details):
    """Log wall time of a sweep, protocol run or resampling pass"""
    detail_str = ", ".join(f"{k}={v}" for k, v in details.items())
    message = f"Timing | {operation}: {duration:.3f}s"
    if detail_str:
        message += f" | {detail_str}"
    logger.info(message, module)

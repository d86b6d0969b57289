#!/usr/bin/env python3
"""
Logger utility for the FOSI optimizer lab
Centralized logging configuration and utilities
"""

import logging
import logging.handlers
import time
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

import colorlog


DETAILED_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
SIMPLE_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# Specialized loggers and the size of their rotating files
SPECIALIZED_LOGGERS = {
    'spectral': 5 * 1024 * 1024,
    'optimizer': 5 * 1024 * 1024,
    'bench': 3 * 1024 * 1024,
}


def setup_logging(log_level=logging.INFO, log_dir: Optional[Union[str, Path]] = None):
    """
    Setup centralized logging for the application

    Args:
        log_level: Logging level (default: INFO)
        log_dir: Directory for log files. When None only the console handler is installed.
    """
    if isinstance(log_level, str):
        log_level = getattr(logging, log_level.upper(), logging.INFO)

    # Configure root logger
    logger = logging.getLogger()
    logger.setLevel(log_level)

    # Clear any existing handlers
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    detailed_formatter = logging.Formatter(DETAILED_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    console_formatter = colorlog.ColoredFormatter(
        '%(log_color)s' + SIMPLE_FORMAT,
        datefmt='%H:%M:%S',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        }
    )

    # Console handler - simple logging
    console_handler = colorlog.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_dir is not None:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now().strftime('%Y%m%d')

        # File handler - detailed logging
        file_handler = logging.handlers.RotatingFileHandler(
            log_path / f"fosi_lab_{stamp}.log",
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)

        for name, max_bytes in SPECIALIZED_LOGGERS.items():
            special = logging.getLogger(name)
            for handler in special.handlers[:]:
                special.removeHandler(handler)
            special_handler = logging.handlers.RotatingFileHandler(
                log_path / f"{name}_{stamp}.log",
                maxBytes=max_bytes,
                backupCount=3,
                encoding='utf-8'
            )
            special_handler.setFormatter(detailed_formatter)
            special.addHandler(special_handler)

        logger.info(f"Log files location: {log_path.absolute()}")

    logger.debug("Logging system initialized")
    return logger


def get_logger(name=None):
    """
    Get a logger instance

    Args:
        name: Logger name (default: None for root logger)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)


def log_performance(func):
    """
    Decorator to log function performance

    Usage:
        @log_performance
        def my_function():
            pass
    """
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)
        start_time = time.perf_counter()

        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logger.debug(f"Function {func.__name__} executed in {execution_time:.4f} seconds")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logger.error(f"Function {func.__name__} failed after {execution_time:.4f} seconds: {e}")
            raise

    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    wrapper.__wrapped__ = func
    return wrapper


class ContextLogger:
    """
    Context manager for logging with additional context

    Usage:
        with ContextLogger("Running experiment", "bench") as logger:
            logger.info("Run 1 finished")
    """

    def __init__(self, context_name, logger_name=None):
        self.context_name = context_name
        self.logger = get_logger(logger_name)
        self.start_time = None

    def __enter__(self):
        self.start_time = datetime.now()
        self.logger.info(f"Starting: {self.context_name}")
        return self.logger

    def __exit__(self, exc_type, exc_val, exc_tb):
        duration = datetime.now() - self.start_time

        if exc_type is None:
            self.logger.info(f"Completed: {self.context_name} (Duration: {duration})")
        else:
            self.logger.error(f"Failed: {self.context_name} (Duration: {duration}) - Error: {exc_val}")

        return False  # Don't suppress exceptions

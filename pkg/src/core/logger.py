"""Logging for experiments and sweep workers.

Sweep cells run in worker processes that share one log file, so every record
carries the process name. Warnings use reason tags (``UNDER_RESOLVED``,
``CONTAMINATED``, ``ALIASING``, ``SPECTRAL_UNDERFLOW``) after the component
prefix, e.g. ``integrate: CONTAMINATED t=12.5 ...``.
"""

import logging
import os
from pathlib import Path

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(processName)s | %(module)s.%(funcName)s | %(message)s"


def setup_logger(name: str = "qgdecay", log_file: str | None = None) -> logging.Logger:
    """
    Args:
        name (str): Logger name.
        log_file (str | None): Defaults to ``$QGDECAY_LOG_FILE`` or ``output/qgdecay.log``.

    Returns:
        logging.Logger: Logger with a file handler at ``$QGDECAY_LOG_LEVEL`` and a
        console handler at ``$QGDECAY_CONSOLE_LEVEL`` (default WARNING, so report
        lines printed by the CLI stay readable).
    """
    logger = logging.getLogger(name)
    if logger.hasHandlers():
        return logger

    log_path = Path(log_file or os.getenv("QGDECAY_LOG_FILE", "output/qgdecay.log"))
    log_path.parent.mkdir(parents=True, exist_ok=True)

    file_level = os.getenv("QGDECAY_LOG_LEVEL", "INFO").upper()
    console_level = os.getenv("QGDECAY_CONSOLE_LEVEL", "WARNING").upper()
    logger.setLevel(min(logging.getLevelName(file_level), logging.getLevelName(console_level)))
    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    for handler, level in (
        (logging.FileHandler(log_path, encoding="utf-8"), file_level),
        (logging.StreamHandler(), console_level),
    ):
        handler.setLevel(level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    return logger


logger = setup_logger()

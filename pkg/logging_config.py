import logging
import os
import sys
from typing import Optional

LOGGER_NAME = "cover_engine"

logger = logging.getLogger(LOGGER_NAME)


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    # stdout carries command output, so logs go to stderr
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        # Create log directory if it doesn't exist
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, (level or "WARNING").upper(), logging.WARNING),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )

    return logging.getLogger(LOGGER_NAME)

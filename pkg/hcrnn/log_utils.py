"""
Timestamped logging shared by every runner class.

Lines look like ``[2025-08-16 11:23:40] INFO: message`` on the console and in
``<log_dir>/<name>.log``.
"""

import logging
import sys
from pathlib import Path

LOG_FORMAT = "[%(asctime)s] %(levelname)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def get_logger(name, log_dir=None, level=logging.INFO):
    """Create (or fetch) a logger writing to stdout and optionally to a log file"""
    logger = logging.getLogger(f"hcrnn.{name}")
    logger.setLevel(level)
    logger.propagate = False

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if not any(getattr(h, "_hcrnn_console", False) for h in logger.handlers):
        console = logging.StreamHandler(sys.stdout)
        console.setFormatter(formatter)
        console._hcrnn_console = True
        logger.addHandler(console)

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = (log_dir / f"{name}.log").resolve()
        # one run directory per logger at a time
        for handler in [h for h in logger.handlers if isinstance(h, logging.FileHandler)]:
            if handler.baseFilename != str(log_file):
                logger.removeHandler(handler)
                handler.close()
        known = {getattr(h, "baseFilename", None) for h in logger.handlers}
        if str(log_file) not in known:
            file_handler = logging.FileHandler(log_file, encoding="utf-8")
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    return logger


class LogMixin:
    """Gives a runner class the ``self.log(message, level)`` helper"""

    logger = None

    def log(self, message, level="INFO"):
        """Log messages with timestamp"""
        if self.logger is None:
            self.logger = get_logger(type(self).__name__.lower())
        self.logger.log(logging.getLevelName(level.upper()), message)

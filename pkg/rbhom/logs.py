import logging

from rich.console import Console
from rich.logging import RichHandler

from rbhom.config import debug_enabled


def setup_logging(verbose: bool = False, console: Console = None) -> logging.Logger:
    """Attach a single rich handler to the package logger."""
    logger = logging.getLogger("rbhom")
    level = logging.DEBUG if verbose or debug_enabled() else logging.INFO
    logger.setLevel(level)
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(console=console or Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    return logger

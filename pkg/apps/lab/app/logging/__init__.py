from app.logging.config import setup_logging
from app.logging.context import experiment_context

__all__ = ["experiment_context", "setup_logging"]

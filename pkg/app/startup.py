"""Application startup configuration."""

import logging

from app.database import create_tables

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: int = logging.INFO) -> None:
    logging.basicConfig(format=LOG_FORMAT)
    # basicConfig is a no-op once handlers exist; the level is applied regardless.
    logging.getLogger().setLevel(level)
    # suppress sqlalchemy engine logs below warning level
    logging.getLogger("sqlalchemy.engine.Engine").setLevel(logging.WARNING)


def startup(level: int = logging.INFO) -> None:
    """Main startup function called once before any command runs."""
    configure_logging(level)
    create_tables()

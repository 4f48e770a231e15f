import os
from sqlalchemy.pool import StaticPool
from sqlmodel import SQLModel, create_engine, Session

# Table models must be imported before create_all.
from app.models import ExperimentRun, ResultRow  # noqa: F401

DATABASE_URL = os.environ.get("APP_DATABASE_URL", "sqlite:///wipt_results.db")


def _engine_options(url: str) -> dict:
    if url.startswith("sqlite"):
        options: dict = {"connect_args": {"check_same_thread": False}}
        if url in ("sqlite://", "sqlite:///:memory:"):
            options["poolclass"] = StaticPool
        return options
    return {"connect_args": {"connect_timeout": 15}}


ENGINE = create_engine(DATABASE_URL, **_engine_options(DATABASE_URL))


def create_tables():
    SQLModel.metadata.create_all(ENGINE)


def get_session():
    return Session(ENGINE)


def reset_db():
    """Wipe all tables in the database. Use with caution - for testing only!"""
    SQLModel.metadata.drop_all(ENGINE)
    SQLModel.metadata.create_all(ENGINE)

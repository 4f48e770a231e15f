import os
from typing import Generator

import numpy as np
import pytest

# Tests never touch the results database on disk.
os.environ.setdefault("APP_DATABASE_URL", "sqlite://")

from app.database import reset_db  # noqa: E402
from app.models import SimConfig  # noqa: E402


@pytest.fixture
def new_db() -> Generator[None, None, None]:
    reset_db()
    yield
    reset_db()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20150601)


@pytest.fixture
def small_cfg() -> SimConfig:
    """Four antennas, a handful of users, 20 dB effective SNR."""
    return SimConfig(m=4, k_id=8, k_eh=3, path_loss_db=60.0, mu=0.7, seed=2015)

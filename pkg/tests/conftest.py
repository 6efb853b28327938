import numpy as np
import pytest

from blocksketch.common.config import Config
from blocksketch.stable import RngStream


@pytest.fixture(autouse=True)
def isolated_data_dir(tmp_path, monkeypatch):
    """Keep the run cache out of the user's home directory."""
    data = tmp_path / "data"
    monkeypatch.setattr(Config, "data_dir", data)
    monkeypatch.setattr(Config, "cache_dir", data / "cache")
    return data


@pytest.fixture
def rng():
    return RngStream(1234, 0)


@pytest.fixture
def numpy_gen():
    return np.random.default_rng(2024)

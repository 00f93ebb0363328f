"""Pytest configuration and shared fixtures for test isolation."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))


@pytest.fixture(autouse=True)
def isolated_data_dir(tmp_path, monkeypatch):
    """Automatically isolate each test with its own data directory.

    Settings are cached, so the cache is cleared before and after each test
    to pick up the patched environment and to avoid leaking it.
    """
    monkeypatch.setenv("FLIPSCOUT_DATA_DIR", str(tmp_path))

    from flipscout.config import get_settings

    get_settings.cache_clear()
    yield tmp_path
    get_settings.cache_clear()


@pytest.fixture
def rng():
    """Seeded generator for test data."""
    return np.random.Generator(np.random.PCG64(12345))


@pytest.fixture
def random_couplings():
    """Factory for small random memoryless coupling sets."""
    from flipscout.model import CouplingSet

    def make(n, scale=0.3, field_scale=0.2, seed=0, lags=0, lag_scale=0.1):
        gen = np.random.Generator(np.random.PCG64(seed))
        upper = np.triu(gen.normal(0.0, scale, (n, n)), k=1)
        return CouplingSet(
            J=upper + upper.T,
            h=gen.normal(0.0, field_scale, n),
            lags=[gen.normal(0.0, lag_scale, (n, n)) for _ in range(lags)],
        )

    return make


@pytest.fixture
def sign_panel():
    """Factory wrapping a ±1 matrix into a SignPanel with synthetic labels."""
    from flipscout.ingest import SignPanel

    def make(signs):
        signs = np.asarray(signs)
        return SignPanel(
            entities=[f"e{i}" for i in range(signs.shape[0])],
            timestamps=[str(t) for t in range(signs.shape[1])],
            signs=signs,
        )

    return make


@pytest.fixture
def random_panel(rng, sign_panel):
    """Factory for independent fair ±1 panels."""

    def make(n, t):
        return sign_panel(np.where(rng.random((n, t)) < 0.5, -1, 1))

    return make


@pytest.fixture
def price_csv(tmp_path):
    """Factory writing a long-format price CSV and returning its path."""

    def make(text, name="prices.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return make

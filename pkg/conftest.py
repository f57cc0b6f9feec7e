"""Shared pytest fixtures: random instances, synthetic price tables and CSV files."""

import os
import tempfile

# keep test runs from writing into the project's cache and log directories
os.environ.setdefault("ENABLE_PRICE_CACHE", "false")
os.environ.setdefault("PORTFOLIO_LOG_DIR", os.path.join(tempfile.gettempdir(), "portfolio-test-logs"))

from datetime import date, timedelta

import numpy as np
import pytest

from app.expected_stats import ExpectedStats
from app.market_data import PriceTable, write_prices_csv
from app.utils import make_rng


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale acceptance runs, deselect with -m 'not slow'")


def random_stats(n: int, seed: int, scale: float = 0.01) -> ExpectedStats:
    """Random well-conditioned covariance and means of daily magnitude."""
    rng = make_rng(seed)
    factors = rng.normal(size=(n, n + 3)) * scale
    cov = factors @ factors.T / (n + 3) + np.eye(n) * scale ** 2 * 0.05
    mean = rng.normal(loc=0.0005, scale=0.001, size=n)
    return ExpectedStats(tuple(f"A{i}" for i in range(n)), mean, cov)


def price_table(returns: np.ndarray, tickers=None, start: date = date(2020, 1, 1)) -> PriceTable:
    """Prices starting at 100 that produce exactly ``returns`` as simple returns (up to rounding)."""
    returns = np.asarray(returns, dtype=float)
    if returns.ndim == 1:
        returns = returns[:, None]
    tickers = tuple(tickers or (f"T{i}" for i in range(returns.shape[1])))
    prices = 100.0 * np.vstack([np.ones(returns.shape[1]), np.cumprod(1.0 + returns, axis=0)])
    dates = tuple(start + timedelta(days=i) for i in range(prices.shape[0]))
    return PriceTable(tickers, dates, prices)


@pytest.fixture
def rng():
    return make_rng(20240101)


@pytest.fixture
def small_prices():
    """Three tickers, 60 days of seeded returns."""
    generator = make_rng(7)
    returns = generator.normal(loc=[0.001, 0.0005, 0.0002], scale=[0.01, 0.006, 0.002], size=(59, 3))
    return price_table(returns, ("AAA", "BBB", "CCC"))


@pytest.fixture
def prices_csv(tmp_path, small_prices):
    return write_prices_csv(small_prices, tmp_path / "prices.csv")

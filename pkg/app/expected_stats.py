"""Expected returns and covariance from historical returns.

Three estimators are supported:

* ``full``: mean and sample covariance of the whole sample.
* ``random``: ``sample_count`` contiguous windows drawn uniformly from the valid
  start offsets; per-window statistics are combined by elementwise median.
* ``weighted``: the same window draw, combined by a weighted average where a
  window ending ``age`` periods before the last sample gets weight
  ``2 ** (-age / half_life)``.

Windows are drawn with numpy's PCG64 generator seeded through ``SeedSequence``,
which gives the same stream on every platform.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .config import ESTIMATOR_DEFAULTS
from .errors import ConfigError, DimensionMismatchError, InsufficientHistoryError, NonFiniteStatsError
from .logger import logger
from .market_data import ReturnsTable
from .utils import make_rng

ESTIMATOR_MODES = ("full", "random", "weighted")
PSD_TOLERANCE = 1e-10
SINGULARITY_RATIO = 1e-12
RIDGE_RATIO = 1e-8


@dataclass(frozen=True, eq=False)
class ExpectedStats:
    """Per-period expected returns and covariance for a ticker list."""

    tickers: Tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size) or len(self.tickers) != mean.size:
            raise DimensionMismatchError(
                f"{len(self.tickers)} tickers, mean of size {mean.size}, covariance of shape {cov.shape}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "flags", tuple(self.flags))

    @property
    def size(self) -> int:
        return self.mean.size

    @property
    def volatilities(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.covariance))):
            raise NonFiniteStatsError("expected returns or covariance contain non-finite values")

    def is_singular(self) -> bool:
        """Smallest eigenvalue below 1e-12 * trace / N."""
        trace = float(np.trace(self.covariance))
        smallest = float(np.linalg.eigvalsh(self.covariance)[0])
        return smallest < SINGULARITY_RATIO * trace / self.size

    def permuted(self, order) -> "ExpectedStats":
        order = list(order)
        return ExpectedStats(tuple(self.tickers[i] for i in order), self.mean[order],
                             self.covariance[np.ix_(order, order)], self.flags)


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = ESTIMATOR_DEFAULTS["mode"]
    window_length: Optional[int] = ESTIMATOR_DEFAULTS["window_length"]
    sample_count: int = ESTIMATOR_DEFAULTS["sample_count"]
    half_life: Optional[float] = ESTIMATOR_DEFAULTS["half_life"]
    seed: int = ESTIMATOR_DEFAULTS["seed"]

    def __post_init__(self):
        if self.mode not in ESTIMATOR_MODES:
            raise ConfigError(f"unknown estimator mode '{self.mode}'", "estimator.mode")
        if self.sample_count < 1:
            raise ConfigError("must be >= 1", "estimator.sample_count")
        if self.window_length is not None and self.window_length < 2:
            raise ConfigError("must be >= 2", "estimator.window_length")
        if self.half_life is not None and not self.half_life > 0:
            raise ConfigError("must be positive", "estimator.half_life")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "estimator.seed")

    def resolved_window(self, sample_length: int) -> int:
        window = self.window_length if self.window_length is not None else max(2, sample_length // 2)
        if window > sample_length:
            raise InsufficientHistoryError(
                f"estimator window of {window} periods is longer than the {sample_length}-period sample")
        return window

    def resolved_half_life(self, sample_length: int, window: int) -> float:
        if self.half_life is not None:
            return float(self.half_life)
        # half of the span covered by the valid window start offsets
        return max((sample_length - window + 1) / 2.0, 0.5)

    def with_seed(self, seed: int) -> "EstimatorConfig":
        return replace(self, seed=seed)


def repair_psd(matrix: np.ndarray, tolerance: float = PSD_TOLERANCE) -> Tuple[np.ndarray, bool]:
    """Symmetrize, and clip negative eigenvalues when the smallest is below -tolerance."""
    symmetric = (matrix + matrix.T) / 2.0
    values, vectors = np.linalg.eigh(symmetric)
    if values[0] >= -tolerance:
        return symmetric, False
    clipped = (vectors * np.clip(values, 0.0, None)) @ vectors.T
    return (clipped + clipped.T) / 2.0, True


def ridge_repair(stats: ExpectedStats) -> ExpectedStats:
    """Covariance + eps*I with eps = 1e-8 * trace / N."""
    epsilon = RIDGE_RATIO * float(np.trace(stats.covariance)) / stats.size
    logger.warning(f"Covariance is singular, adding ridge {epsilon:.3e}")
    return ExpectedStats(stats.tickers, stats.mean, stats.covariance + epsilon * np.eye(stats.size),
                         (*stats.flags, "ridge-repaired"))


def _window_stats(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    k = values.shape[0]
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (k - 1)
    return mean, cov


def _finish(tickers, mean, cov, flags=()) -> ExpectedStats:
    cov, repaired = repair_psd(cov)
    if repaired:
        logger.warning("Aggregated covariance was not PSD; clipped negative eigenvalues")
        flags = (*flags, "psd-repaired")
    return ExpectedStats(tickers, mean, cov, tuple(flags))


def estimate_full(returns: ReturnsTable) -> ExpectedStats:
    if returns.length < 2:
        raise InsufficientHistoryError("need at least 2 return periods to estimate a covariance")
    mean, cov = _window_stats(np.asarray(returns.returns))
    return _finish(returns.tickers, mean, cov)


def _sampled_window_stats(returns: ReturnsTable, config: EstimatorConfig):
    length = returns.length
    window = config.resolved_window(length)
    if window < 2:
        raise InsufficientHistoryError("window_length must be at least 2")
    rng = make_rng(config.seed)
    starts = rng.integers(0, length - window + 1, size=config.sample_count)
    values = np.asarray(returns.returns)
    means = np.empty((config.sample_count, returns.returns.shape[1]))
    covs = np.empty((config.sample_count, means.shape[1], means.shape[1]))
    for i, start in enumerate(starts):
        means[i], covs[i] = _window_stats(values[start:start + window])
    return window, starts, means, covs


def estimate_random(returns: ReturnsTable, config: EstimatorConfig) -> ExpectedStats:
    _, _, means, covs = _sampled_window_stats(returns, config)
    return _finish(returns.tickers, np.median(means, axis=0), np.median(covs, axis=0))


def recency_weights(ages: np.ndarray, half_life: float) -> np.ndarray:
    """2 ** (-age / half_life); an infinite half-life weights every window equally."""
    if math.isinf(half_life):
        return np.ones(len(ages))
    return np.power(2.0, -np.asarray(ages, dtype=float) / half_life)


def estimate_weighted(returns: ReturnsTable, config: EstimatorConfig) -> ExpectedStats:
    window, starts, means, covs = _sampled_window_stats(returns, config)
    ages = (returns.length - 1) - (starts + window - 1)
    weights = recency_weights(ages, config.resolved_half_life(returns.length, window))
    mean = np.average(means, axis=0, weights=weights)
    cov = np.average(covs, axis=0, weights=weights)
    return _finish(returns.tickers, mean, cov)


def estimate(returns: ReturnsTable, config: Optional[EstimatorConfig] = None) -> ExpectedStats:
    """Dispatch on ``config.mode``."""
    config = config or EstimatorConfig()
    if config.mode == "full":
        return estimate_full(returns)
    if config.mode == "random":
        return estimate_random(returns, config)
    return estimate_weighted(returns, config)

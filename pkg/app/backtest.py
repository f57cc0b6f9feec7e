"""Rolling-window out-of-sample evaluation.

Each window estimates statistics on ``train_periods`` returns, builds every
objective's portfolio, then holds those weights fixed over the next
``test_periods`` returns. A held portfolio earns ``w'r_t`` each period, i.e.
weights are re-applied every period with no drift between rebalances.
Windows start every ``step_periods`` periods; with the default step equal to
``test_periods`` the test spans tile the post-training sample exactly.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import BACKTEST_DEFAULTS, TRADING_PERIODS_PER_YEAR, ZERO_VOLATILITY_TOL
from .errors import BacktestWindowError, ConfigError, InsufficientHistoryError
from .expected_stats import EstimatorConfig, estimate
from .logger import logger
from .market_data import PriceTable, ReturnsTable, restrict_dates, simple_returns
from .optimizers import AnnealSchedule, SolverSettings, WeightBounds, Weights
from .portfolio import PortfolioObjective, PortfolioResult, build_portfolio
from .utils import box_statistics, dedupe, derive_seed

SHORT_FINAL_WINDOW = "short-final-window"


@dataclass(frozen=True)
class BacktestConfig:
    objectives: Tuple[PortfolioObjective, ...]
    start_date: Optional[date] = None
    end_date: Optional[date] = None
    train_periods: int = BACKTEST_DEFAULTS["train_periods"]
    test_periods: int = BACKTEST_DEFAULTS["test_periods"]
    step_periods: Optional[int] = None
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    bounds: WeightBounds = field(default_factory=WeightBounds)
    settings: SolverSettings = field(default_factory=SolverSettings)
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    risk_free_rate: float = BACKTEST_DEFAULTS["risk_free_rate"]
    seed: int = 42
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if self.step_periods is None:
            object.__setattr__(self, "step_periods", self.test_periods)
        if not self.objectives:
            raise ConfigError("at least one objective is required", "objectives")
        labels = [o.label for o in self.objectives]
        if len(set(labels)) != len(labels):
            raise ConfigError("each objective kind may appear once", "objectives")
        if self.start_date is not None and self.end_date is not None and not self.start_date < self.end_date:
            raise ConfigError("must be after start_date", "backtest.end_date")
        if self.train_periods < 2:
            raise ConfigError("must be >= 2", "backtest.train_periods")
        if self.test_periods < 1:
            raise ConfigError("must be >= 1", "backtest.test_periods")
        if self.step_periods < 1:
            raise ConfigError("must be >= 1", "backtest.step_periods")
        if self.threads < 1:
            raise ConfigError("must be >= 1", "backtest.threads")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "backtest.seed")


@dataclass(frozen=True)
class WindowSpan:
    """Half-open return-row ranges of one window."""

    index: int
    train_start: int
    train_stop: int
    test_start: int
    test_stop: int

    @property
    def test_length(self) -> int:
        return self.test_stop - self.test_start


@dataclass(frozen=True)
class ObjectiveWindow:
    result: PortfolioResult
    returns: np.ndarray

    @property
    def weights(self) -> Weights:
        return self.result.weights


@dataclass(frozen=True)
class WindowResult:
    span: WindowSpan
    train_dates: Tuple[date, date]
    test_dates: Tuple[date, ...]
    objectives: Dict[str, ObjectiveWindow]

    @property
    def window_index(self) -> int:
        return self.span.index


@dataclass(frozen=True)
class ObjectiveSummary:
    objective: str
    dates: Tuple[date, ...]
    daily_returns: np.ndarray
    cumulative_returns: np.ndarray
    annualized_return: float
    annualized_volatility: float
    sharpe: Optional[float]
    windows: int
    flags: Tuple[str, ...]

    @property
    def distribution(self) -> Dict[str, float]:
        return box_statistics(self.daily_returns)


@dataclass(frozen=True)
class BacktestReport:
    tickers: Tuple[str, ...]
    windows: Tuple[WindowResult, ...]
    summaries: Dict[str, ObjectiveSummary]
    correlation: pd.DataFrame
    flags: Tuple[str, ...] = ()

    @property
    def objectives(self) -> List[str]:
        return list(self.summaries)

    def summary_rows(self) -> List[Dict]:
        return [{
            "objective": s.objective,
            "annualized_return": s.annualized_return,
            "annualized_volatility": s.annualized_volatility,
            "sharpe": s.sharpe,
            "windows": s.windows,
            "flags": dedupe([*s.flags, *self.flags]),
        } for s in self.summaries.values()]

    def series_frame(self, objective: str) -> pd.DataFrame:
        s = self.summaries[objective]
        return pd.DataFrame({"date": [d.isoformat() for d in s.dates],
                             "daily_return": s.daily_returns,
                             "cumulative_return": s.cumulative_returns})

    def weights_frame(self) -> pd.DataFrame:
        rows = []
        for window in self.windows:
            for label, held in window.objectives.items():
                rows.append({"window": window.window_index, "objective": label,
                             **{t: float(v) for t, v in zip(self.tickers, held.weights.values)}})
        return pd.DataFrame(rows, columns=["window", "objective", *self.tickers])


def plan_windows(dates: Sequence[date], config: BacktestConfig) -> List[WindowSpan]:
    """Window k trains on rows [k*step, k*step + train) and tests on up to ``test_periods`` rows after."""
    length = len(dates)
    if length < config.train_periods + 1:
        raise InsufficientHistoryError(
            f"{length} return periods cannot hold a {config.train_periods}-period training span and a test period")
    spans = []
    offset = 0
    while offset + config.train_periods < length:
        test_start = offset + config.train_periods
        spans.append(WindowSpan(len(spans), offset, test_start, test_start,
                                min(test_start + config.test_periods, length)))
        offset += config.step_periods
    return spans


def compound(daily: np.ndarray) -> np.ndarray:
    return np.cumprod(1.0 + np.asarray(daily, dtype=float)) - 1.0


def annualized_metrics(daily: np.ndarray, risk_free_rate: float = 0.0,
                       periods: int = TRADING_PERIODS_PER_YEAR) -> Tuple[float, float, Optional[float]]:
    """Mean x periods, sample std x sqrt(periods), and Sharpe on those (None at zero volatility).

    ``risk_free_rate`` is per period, like the returns.
    """
    daily = np.asarray(daily, dtype=float)
    annual_return = float(daily.mean()) * periods
    if daily.size < 2 or np.ptp(daily) == 0:
        annual_volatility = 0.0
    else:
        annual_volatility = float(daily.std(ddof=1)) * math.sqrt(periods)
    if annual_volatility <= ZERO_VOLATILITY_TOL:
        return annual_return, annual_volatility, None
    return annual_return, annual_volatility, (annual_return - risk_free_rate * periods) / annual_volatility


class Backtester:
    """Runs every window of a ``BacktestConfig`` over one price table."""

    def __init__(self, config: BacktestConfig):
        self.config = config

    def _window_config(self, index: int, objective_index: int) -> Tuple[EstimatorConfig, AnnealSchedule]:
        config = self.config
        estimator = config.estimator.with_seed(derive_seed(config.seed, index, objective_index, 0))
        schedule = replace(config.schedule, seed=derive_seed(config.seed, index, objective_index, 1))
        return estimator, schedule

    def _run_window(self, returns: ReturnsTable, span: WindowSpan) -> WindowResult:
        config = self.config
        try:
            train = returns.window(span.train_start, span.train_stop)
            test = np.asarray(returns.returns[span.test_start:span.test_stop])
            held = {}
            stats_cache = {}
            for k, objective in enumerate(config.objectives):
                estimator, schedule = self._window_config(span.index, k)
                # deterministic estimators give the same stats for every objective
                cache_key = "full" if estimator.mode == "full" else k
                if cache_key not in stats_cache:
                    stats_cache[cache_key] = estimate(train, estimator)
                result = build_portfolio(objective, stats_cache[cache_key], config.bounds, config.settings,
                                         schedule, config.risk_free_rate)
                held[objective.label] = ObjectiveWindow(result, test @ result.weights.values)
        except Exception as e:
            logger.error(f"Backtest window {span.index} failed: {e}", exc_info=True)
            raise BacktestWindowError(span.index, e) from e
        return WindowResult(span, (train.dates[0], train.dates[-1]),
                            returns.dates[span.test_start:span.test_stop], held)

    def run(self, prices: PriceTable) -> BacktestReport:
        config = self.config
        if config.start_date is not None or config.end_date is not None:
            prices = restrict_dates(prices, config.start_date, config.end_date)
        returns = simple_returns(prices)
        spans = plan_windows(returns.dates, config)
        logger.info(f"Planned {len(spans)} backtest window(s) over {returns.length} return periods")

        if config.threads > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as executor:
                windows = list(executor.map(lambda span: self._run_window(returns, span), spans))
        else:
            windows = [self._run_window(returns, span) for span in spans]

        report = summarize(windows, prices.tickers, config)
        logger.info(f"Backtest finished: {len(windows)} window(s), {len(report.summaries)} objective(s)")
        return report


def summarize(windows: Sequence[WindowResult], tickers: Sequence[str], config: BacktestConfig) -> BacktestReport:
    """Concatenate each objective's out-of-sample returns and compute the aggregate metrics."""
    if not windows:
        raise InsufficientHistoryError("no completed backtest windows to summarize")
    windows = sorted(windows, key=lambda w: w.window_index)
    summaries = {}
    for objective in config.objectives:
        label = objective.label
        dates = tuple(d for w in windows for d in w.test_dates)
        daily = np.concatenate([w.objectives[label].returns for w in windows])
        annual_return, annual_volatility, sharpe = annualized_metrics(daily, config.risk_free_rate)
        flags = tuple(sorted(set(f for w in windows for f in w.objectives[label].result.flags)))
        summaries[label] = ObjectiveSummary(label, dates, daily, compound(daily), annual_return,
                                            annual_volatility, sharpe, len(windows), flags)

    frame = pd.DataFrame({label: s.daily_returns for label, s in summaries.items()})
    correlation = frame.corr()
    for label in correlation.columns:
        correlation.loc[label, label] = 1.0

    flags = []
    if windows[-1].span.test_length < config.test_periods:
        flags.append(SHORT_FINAL_WINDOW)
    return BacktestReport(tuple(tickers), tuple(windows), summaries, correlation, tuple(dedupe(flags)))


def run_backtest(prices: PriceTable, config: BacktestConfig) -> BacktestReport:
    return Backtester(config).run(prices)

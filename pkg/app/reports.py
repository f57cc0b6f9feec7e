"""CSV artifacts of every command.

Files are named ``<command>_<artifact>.csv`` and hold only a header row plus
data, so they parse back to the in-memory values. Floats are written with
pandas' shortest round-trip representation and undefined values (a Sharpe
ratio at zero volatility) as empty cells.
"""

from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd

from .backtest import BacktestReport
from .config import TRADING_PERIODS_PER_YEAR
from .errors import ReportIOError
from .expected_stats import ExpectedStats
from .logger import logger
from .market_data import ReturnsTable
from .portfolio import FrontierPoint, PortfolioResult
from .utils import format_flags, period_to_annual_return, period_to_annual_volatility

CONVENTIONS = [
    f"periods_per_year: {TRADING_PERIODS_PER_YEAR}",
    "returns: simple per-period returns; annual return = per-period mean x periods_per_year",
    "volatility: per-period sample standard deviation x sqrt(periods_per_year)",
    "targets: annual target return / periods_per_year, annual target volatility / sqrt(periods_per_year)",
    "holding: weights fixed within each test window and applied to every period's returns (no drift)",
    "quartiles: nearest-rank",
    "BMOP solver: classical simulated annealing on the QUBO model (no quantum hardware)",
]


def artifact_path(out_dir: Path, command: str, artifact: str, suffix: str = "csv") -> Path:
    return Path(out_dir) / f"{command}_{artifact}.{suffix}"


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise ReportIOError(f"could not write {path}: {e}") from e
    return path


def write_conventions(out_dir: Path, command: str, extra: Iterable[str] = ()) -> Path:
    path = artifact_path(out_dir, command, "conventions", "txt")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join([f"command: {command}", *CONVENTIONS, *extra]) + "\n", encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"could not write {path}: {e}") from e
    return path


def portfolio_frame(results: Sequence[PortfolioResult]) -> pd.DataFrame:
    """One row per result: objective, statistics, flags, then one weight column per ticker."""
    tickers = list(results[0].weights.tickers) if results else []
    rows = []
    for result in results:
        rows.append({
            "objective": result.objective,
            "expected_return": result.expected_return,
            "volatility": result.volatility,
            "sharpe": result.sharpe if result.sharpe is not None else np.nan,
            "flags": format_flags(result.flags),
            **result.weights.as_dict(),
        })
    return pd.DataFrame(rows, columns=["objective", "expected_return", "volatility", "sharpe", "flags", *tickers])


def frontier_frame(points: Sequence[FrontierPoint]) -> pd.DataFrame:
    tickers = list(points[0].weights.tickers) if points else []
    rows = [{"target_return": p.target_return, "expected_return": p.expected_return, "volatility": p.volatility,
             **p.weights.as_dict()} for p in points]
    return pd.DataFrame(rows, columns=["target_return", "expected_return", "volatility", *tickers])


def expected_stats_frame(stats: ExpectedStats) -> pd.DataFrame:
    vols = stats.volatilities
    return pd.DataFrame({
        "ticker": list(stats.tickers),
        "expected_return": stats.mean,
        "volatility": vols,
        "annualized_return": [period_to_annual_return(m) for m in stats.mean],
        "annualized_volatility": [period_to_annual_volatility(v) for v in vols],
    })


def matrix_frame(matrix: np.ndarray, labels: Sequence[str]) -> pd.DataFrame:
    frame = pd.DataFrame(np.asarray(matrix, dtype=float), columns=list(labels))
    frame.insert(0, "series", list(labels))
    return frame


def cumulative_frame(returns: ReturnsTable) -> pd.DataFrame:
    growth = np.cumprod(1.0 + np.asarray(returns.returns), axis=0) - 1.0
    frame = pd.DataFrame(growth, columns=list(returns.tickers))
    frame.insert(0, "date", [d.isoformat() for d in returns.dates])
    return frame


def distribution_frame(distribution) -> pd.DataFrame:
    rows = [{"series": label, **stats} for label, stats in distribution.items()]
    return pd.DataFrame(rows, columns=["series", "min", "q1", "median", "q3", "max"])


def backtest_summary_frame(report: BacktestReport) -> pd.DataFrame:
    rows = []
    for row in report.summary_rows():
        rows.append({**row, "sharpe": row["sharpe"] if row["sharpe"] is not None else np.nan,
                     "flags": format_flags(row["flags"])})
    return pd.DataFrame(rows, columns=["objective", "annualized_return", "annualized_volatility", "sharpe",
                                       "windows", "flags"])


def backtest_cumulative_frame(report: BacktestReport) -> pd.DataFrame:
    first = next(iter(report.summaries.values()))
    frame = pd.DataFrame({label: s.cumulative_returns for label, s in report.summaries.items()})
    frame.insert(0, "date", [d.isoformat() for d in first.dates])
    return frame


def write_backtest(report: BacktestReport, out_dir: Path) -> List[Path]:
    """Summary, weight history and one daily series per objective."""
    out_dir = Path(out_dir)
    paths = [
        write_frame(backtest_summary_frame(report), artifact_path(out_dir, "backtest", "summary")),
        write_frame(report.weights_frame(), artifact_path(out_dir, "backtest", "weights")),
    ]
    for label in report.objectives:
        paths.append(write_frame(report.series_frame(label), artifact_path(out_dir, "backtest", label)))
    logger.info(f"Wrote {len(paths)} backtest table(s) to {out_dir}")
    return paths

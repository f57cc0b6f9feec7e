"""Command-line front end: ``python -m app <command> --config <path> [--out DIR] [--seed N] [--verbose]``.

Commands:

* ``stats``     asset statistics, cumulative returns, distribution and correlation figures
* ``optimize``  one portfolio per configured objective
* ``frontier``  efficient frontier table and scatter figure
* ``backtest``  rolling-window evaluation with its tables and figures
* ``fixture``   write the bundled synthetic price scenario (no config needed)
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from .backtest import run_backtest
from .config import EXIT_CODES, SUPPORTED_COMMANDS
from .errors import ConfigError, PortfolioError
from .expected_stats import ExpectedStats, estimate
from .figures import FigureSpec, companion_frame, emit_figure
from .fixtures import FIXTURE_PERIODS, FIXTURE_SEED, synthetic_prices
from .logger import logger, set_verbosity
from .market_data import MarketData, PriceTable, load_prices, restrict_dates, simple_returns, write_prices_csv
from .portfolio import FrontierPoint, PortfolioResult, asset_points, efficient_frontier
from .reports import (
    artifact_path,
    backtest_cumulative_frame,
    cumulative_frame,
    distribution_frame,
    expected_stats_frame,
    frontier_frame,
    matrix_frame,
    portfolio_frame,
    write_backtest,
    write_conventions,
    write_frame,
)
from .run_config import RunConfig
from .utils import validate_command


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app", description="Mean-variance portfolio construction, "
                                     "QUBO asset selection and rolling-window backtests")
    parser.add_argument("command", choices=SUPPORTED_COMMANDS)
    parser.add_argument("--config", help="JSON run configuration (required except for 'fixture')")
    parser.add_argument("--out", help="output directory (overrides the config's output_dir)")
    parser.add_argument("--seed", type=int, help="top-level seed (overrides the config's seed)")
    parser.add_argument("--verbose", action="store_true", help="debug logging on the console")
    return parser


def _figure(config: Optional[RunConfig], kind: str, title: str, frame: pd.DataFrame, out_dir: Path,
            command: str, artifact: str) -> List[Path]:
    """Figure plus companion CSV, or only the CSV when the figure kind is switched off."""
    spec = FigureSpec(kind, title, tuple(c for c in frame.columns if c not in ("date", "series")))
    csv_path = artifact_path(out_dir, command, artifact)
    if config is not None and kind not in config.figures:
        return [write_frame(companion_frame(spec, frame), csv_path)]
    return list(emit_figure(spec, frame, artifact_path(out_dir, command, artifact, "svg"), csv_path))


def _load(config: RunConfig) -> PriceTable:
    table = load_prices(config.prices_path, config.tickers)
    if config.start_date is not None or config.end_date is not None:
        table = restrict_dates(table, config.start_date, config.end_date)
    return table


def _scatter_frame(points: Sequence[FrontierPoint], stats: ExpectedStats,
                   results: Sequence[PortfolioResult]) -> pd.DataFrame:
    rows = [{"group": "frontier", "label": f"frontier-{i}", "volatility": p.volatility,
             "expected_return": p.expected_return} for i, p in enumerate(points)]
    rows += [{"group": "asset", "label": t, "volatility": v, "expected_return": m}
             for t, v, m in asset_points(stats)]
    rows += [{"group": "portfolio", "label": r.objective, "volatility": r.volatility,
              "expected_return": r.expected_return} for r in results]
    return pd.DataFrame(rows, columns=["group", "label", "volatility", "expected_return"])


def run_stats(config: RunConfig, out_dir: Path) -> List[Path]:
    market = MarketData(_load(config))
    stats = estimate(market.returns, config.estimator_config())
    paths = [
        write_frame(expected_stats_frame(stats), artifact_path(out_dir, "stats", "expected")),
        write_frame(matrix_frame(market.covariance, market.tickers), artifact_path(out_dir, "stats", "covariance")),
    ]
    paths += _figure(config, "cumulative-returns", "Cumulative returns of assets", cumulative_frame(market.returns),
                     out_dir, "stats", "cumulative")
    paths += _figure(config, "return-distribution", "Distribution of daily asset returns",
                     distribution_frame(market.distribution), out_dir, "stats", "distribution")
    correlation = pd.DataFrame(market.correlation, index=list(market.tickers), columns=list(market.tickers))
    paths += _figure(config, "correlation-heatmap", "Correlation of daily asset returns", correlation,
                     out_dir, "stats", "correlation")
    return paths


def run_optimize(config: RunConfig, out_dir: Path) -> List[Path]:
    market = MarketData(_load(config))
    stats = estimate(market.returns, config.estimator_config())
    results = config.build_portfolios(stats)
    return [write_frame(portfolio_frame(results), artifact_path(out_dir, "optimize", "portfolios"))]


def run_frontier(config: RunConfig, out_dir: Path) -> List[Path]:
    market = MarketData(_load(config))
    stats = estimate(market.returns, config.estimator_config())
    points = efficient_frontier(stats, config.weight_bounds(), config.solver_settings())
    paths = [write_frame(frontier_frame(points), artifact_path(out_dir, "frontier", "points"))]
    scatter = _scatter_frame(points, stats, config.build_portfolios(stats))
    paths += _figure(config, "frontier-scatter", "Expected return vs. volatility", scatter,
                     out_dir, "frontier", "scatter")
    return paths


def run_backtest_command(config: RunConfig, out_dir: Path) -> List[Path]:
    prices = load_prices(config.prices_path, config.tickers)
    report = run_backtest(prices, config.backtest_config())
    paths = write_backtest(report, out_dir)
    paths += _figure(config, "cumulative-returns", "Cumulative portfolio returns", backtest_cumulative_frame(report),
                     out_dir, "backtest", "cumulative")
    distribution = {label: s.distribution for label, s in report.summaries.items()}
    paths += _figure(config, "return-distribution", "Distribution of daily portfolio returns",
                     distribution_frame(distribution), out_dir, "backtest", "distribution")
    paths += _figure(config, "correlation-heatmap", "Correlation of daily portfolio returns", report.correlation,
                     out_dir, "backtest", "correlation")

    # in-sample frontier over the whole backtest range
    in_range = prices
    if config.start_date is not None or config.end_date is not None:
        in_range = restrict_dates(prices, config.start_date, config.end_date)
    stats = estimate(simple_returns(in_range), config.estimator_config())
    points = efficient_frontier(stats, config.weight_bounds(), config.solver_settings())
    scatter = _scatter_frame(points, stats, config.build_portfolios(stats))
    paths += _figure(config, "frontier-scatter", "Expected return vs. volatility (in-sample)", scatter,
                     out_dir, "backtest", "frontier")
    return paths


def run_fixture(out_dir: Path, seed: Optional[int]) -> List[Path]:
    table = synthetic_prices(FIXTURE_PERIODS, FIXTURE_SEED if seed is None else seed)
    return [write_prices_csv(table, artifact_path(out_dir, "fixture", "prices"))]


COMMANDS = {
    "stats": run_stats,
    "optimize": run_optimize,
    "frontier": run_frontier,
    "backtest": run_backtest_command,
}


def run(command: str, config: Optional[RunConfig], out_dir: Optional[Path] = None,
        seed: Optional[int] = None) -> List[Path]:
    """Execute one command and return the paths it wrote."""
    if not validate_command(command):
        raise ConfigError(f"unknown command '{command}'", "command")
    if command == "fixture":
        out_dir = Path(out_dir) if out_dir is not None else (config.output_path if config else Path("."))
        paths = run_fixture(out_dir, seed)
        extra = [f"seed: {seed if seed is not None else FIXTURE_SEED}"]
    else:
        if config is None:
            raise ConfigError("a run configuration is required", "--config")
        if seed is not None:
            config = config.with_seed(seed)
        out_dir = Path(out_dir) if out_dir is not None else config.output_path
        paths = COMMANDS[command](config, out_dir)
        extra = [f"seed: {config.seed}"]
    paths.append(write_conventions(out_dir, command, extra))
    logger.info(f"{command}: wrote {len(paths)} artifact(s) to {out_dir}")
    return paths


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        config = RunConfig.from_file(args.config) if args.config else None
        run(args.command, config, Path(args.out) if args.out else None, args.seed)
    except PortfolioError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES["io"]
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    return EXIT_CODES["success"]

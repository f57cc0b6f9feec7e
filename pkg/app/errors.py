"""Exception hierarchy shared by the library, the CLI and the HTTP routes.

Each family carries the CLI exit code and the HTTP status it maps to.
"""

from typing import Optional


class PortfolioError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code = 1
    status_code = 500


class ConfigError(PortfolioError):
    exit_code = 2
    status_code = 400

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class DataError(PortfolioError):
    exit_code = 3
    status_code = 422


class MissingFileError(DataError):
    pass


class MalformedRowError(DataError):
    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class UnknownTickerError(DataError):
    def __init__(self, tickers):
        self.tickers = list(tickers)
        super().__init__(f"unknown ticker(s): {', '.join(self.tickers)}")


class InsufficientHistoryError(DataError):
    pass


class DegenerateAssetError(DataError):
    def __init__(self, ticker: str):
        self.ticker = ticker
        super().__init__(f"asset {ticker} has zero return variance")


class SolverError(PortfolioError):
    exit_code = 4
    status_code = 422


class InfeasibleBoundsError(SolverError):
    pass


class NonFiniteStatsError(SolverError):
    pass


class DegeneratePortfolioError(SolverError):
    pass


class QuboSizeError(SolverError):
    pass


class DimensionMismatchError(SolverError):
    pass


class BacktestWindowError(SolverError):
    def __init__(self, window_index: int, cause: Exception):
        self.window_index = window_index
        self.cause = cause
        super().__init__(f"window {window_index} failed: {cause}")
        # keep the exit code of the underlying failure
        if isinstance(cause, PortfolioError):
            self.exit_code = cause.exit_code
            self.status_code = cause.status_code


class ReportIOError(PortfolioError):
    exit_code = 5
    status_code = 500

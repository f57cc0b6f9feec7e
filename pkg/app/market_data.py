"""Historical price ingestion and asset-level statistics.

Prices come from a CSV with a header ``date,<ticker1>,<ticker2>,...``; an empty
cell means the ticker has no observation on that date. Tickers are aligned by
inner join on dates, so every row of a ``PriceTable`` is fully observed.
"""

import hashlib
import io
import os
import pickle
import re
import tempfile
from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import CACHE_DIR, CACHE_SCHEMA_VERSION, ENABLE_PRICE_CACHE
from .errors import (
    DataError,
    DegenerateAssetError,
    InsufficientHistoryError,
    MalformedRowError,
    MissingFileError,
    ReportIOError,
    UnknownTickerError,
)
from .logger import logger
from .utils import box_statistics


def _frozen(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Observed prices of one ticker, dates strictly increasing."""

    ticker: str
    dates: Tuple[date, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen(self.prices))
        if len(self.dates) != len(self.prices):
            raise DataError(f"{self.ticker}: {len(self.dates)} dates for {len(self.prices)} prices")
        if len(self.dates) < 2:
            raise InsufficientHistoryError(f"{self.ticker}: at least 2 observations required")
        if any(later <= earlier for earlier, later in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.ticker}: dates must be strictly increasing")
        if not np.all(self.prices > 0):
            raise DataError(f"{self.ticker}: prices must be strictly positive")


@dataclass(frozen=True, eq=False)
class PriceTable:
    """T x N matrix of positive prices; column order follows ``tickers``."""

    tickers: Tuple[str, ...]
    dates: Tuple[date, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices", _frozen(np.atleast_2d(self.prices)))
        if self.prices.shape != (len(self.dates), len(self.tickers)):
            raise DataError(f"price matrix shape {self.prices.shape} does not match "
                            f"{len(self.dates)} dates x {len(self.tickers)} tickers")
        if len(self.tickers) < 1:
            raise DataError("a price table needs at least one ticker")
        if len(self.dates) < 2:
            raise InsufficientHistoryError(f"need at least 2 aligned dates, got {len(self.dates)}")
        if not np.all(self.prices > 0):
            raise DataError("prices must be strictly positive")

    def select(self, tickers: Sequence[str]) -> "PriceTable":
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise UnknownTickerError(missing)
        columns = [self.tickers.index(t) for t in tickers]
        return PriceTable(tuple(tickers), self.dates, self.prices[:, columns])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.array(self.prices), index=pd.Index(self.dates, name="date"),
                            columns=list(self.tickers))


@dataclass(frozen=True, eq=False)
class ReturnsTable:
    """(T-1) x N matrix of per-period returns stamped with the later date."""

    tickers: Tuple[str, ...]
    dates: Tuple[date, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "returns", _frozen(np.reshape(self.returns, (len(self.dates), len(self.tickers)))))

    @property
    def length(self) -> int:
        return len(self.dates)

    def window(self, start: int, stop: int) -> "ReturnsTable":
        """Rows ``start`` (inclusive) to ``stop`` (exclusive)."""
        return ReturnsTable(self.tickers, self.dates[start:stop], self.returns[start:stop])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(np.array(self.returns), index=pd.Index(self.dates, name="date"),
                            columns=list(self.tickers))


class PriceCache:
    """On-disk cache of parsed price tables.

    Entries are keyed by the SHA-256 of the CSV bytes, the requested ticker set
    and the schema version, so a changed file or layout never hits a stale
    entry. Writes go to a temporary file renamed into place, which keeps
    concurrent readers from seeing partial entries.
    """

    def __init__(self, directory: Union[str, Path] = CACHE_DIR, enabled: bool = ENABLE_PRICE_CACHE):
        self.directory = Path(directory)
        self.enabled = enabled

    @staticmethod
    def make_key(content: bytes, tickers: Iterable[str]) -> str:
        digest = hashlib.sha256()
        digest.update(CACHE_SCHEMA_VERSION.encode("utf-8"))
        digest.update(b"\0")
        digest.update(content)
        digest.update(b"\0")
        digest.update(",".join(sorted(set(tickers))).encode("utf-8"))
        return digest.hexdigest()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.pkl"

    def get(self, key: str) -> Optional[dict]:
        if not self.enabled:
            return None
        path = self._path(key)
        if not path.exists():
            return None
        try:
            with open(path, "rb") as handle:
                entry = pickle.load(handle)
        except Exception as e:
            logger.warning(f"Ignoring unreadable cache entry {path.name}: {e}")
            return None
        if not isinstance(entry, dict) or entry.get("version") != CACHE_SCHEMA_VERSION:
            return None
        return entry

    def put(self, key: str, entry: dict) -> None:
        if not self.enabled:
            return
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "wb") as handle:
                pickle.dump({**entry, "version": CACHE_SCHEMA_VERSION}, handle, protocol=pickle.HIGHEST_PROTOCOL)
            os.replace(tmp_name, self._path(key))
        except OSError as e:
            # a cache that cannot be written only costs a re-parse next time
            logger.warning(f"Could not write price cache entry: {e}")


_FIELD_COUNT = re.compile(r"line (\d+)")


def _read_cells(content: bytes) -> pd.DataFrame:
    """Tokenize the CSV into a frame of raw strings, one row per physical line."""
    try:
        text = content.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise DataError(f"price file is not valid UTF-8: {e}") from e
    try:
        return pd.read_csv(io.StringIO(text), header=None, dtype=str, keep_default_na=False,
                           skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise DataError("price file is empty") from e
    except pd.errors.ParserError as e:
        match = _FIELD_COUNT.search(str(e))
        raise MalformedRowError(str(e), int(match.group(1)) if match else 0) from e


def _cell(value) -> str:
    # short and blank rows come back as NaN for the missing cells
    return "" if value is None or isinstance(value, float) else str(value).strip()


def parse_price_csv(content: bytes) -> Dict[str, Tuple[Tuple[date, ...], np.ndarray]]:
    """Parse CSV bytes into (dates, prices) per ticker column, each sorted by date."""
    rows = _read_cells(content).itertuples(index=False, name=None)
    columns = [_cell(c) for c in next(rows, ())]
    if not columns or columns[0].lower() != "date":
        raise MalformedRowError("header must start with 'date'", 1)
    tickers = columns[1:]
    if any(not t for t in tickers):
        raise MalformedRowError("empty ticker name in header", 1)
    repeated = sorted({t for t in tickers if tickers.count(t) > 1})
    if repeated:
        raise MalformedRowError(f"duplicate ticker in header: {', '.join(repeated)}", 1)

    seen = {}
    observations: Dict[str, Tuple[List[date], List[float]]] = {t: ([], []) for t in tickers}
    for line, row in enumerate(rows, start=2):
        cells = [_cell(c) for c in row]
        if not any(cells):
            continue
        raw_date = cells[0]
        try:
            day = date.fromisoformat(raw_date)
        except ValueError:
            raise MalformedRowError(f"invalid date '{raw_date}', expected YYYY-MM-DD", line)
        if day in seen:
            raise MalformedRowError(f"duplicate date {raw_date} (first on line {seen[day]})", line)
        seen[day] = line
        for ticker, cell in zip(tickers, cells[1:]):
            if not cell:
                continue
            try:
                price = float(cell)
            except ValueError:
                raise MalformedRowError(f"invalid price '{cell}' for {ticker}", line)
            if not np.isfinite(price) or price <= 0:
                raise MalformedRowError(f"price for {ticker} must be positive, got '{cell}'", line)
            observations[ticker][0].append(day)
            observations[ticker][1].append(price)

    series = {}
    for ticker, (days, prices) in observations.items():
        order = np.argsort(np.array([d.toordinal() for d in days]), kind="stable")
        series[ticker] = (tuple(days[i] for i in order), np.array(prices, dtype=float)[order])
    return series


def align(series: Sequence[PriceSeries]) -> PriceTable:
    """Inner-join price series on their dates."""
    frames = [pd.Series(s.prices, index=pd.Index(s.dates, dtype=object), name=s.ticker) for s in series]
    joined = pd.concat(frames, axis=1, join="inner").sort_index()
    if len(joined) < 2:
        raise InsufficientHistoryError(f"only {len(joined)} date(s) where all requested tickers have a price")
    return PriceTable(tuple(joined.columns), tuple(joined.index), joined.to_numpy(dtype=float))


def load_prices(path: Union[str, Path], tickers: Sequence[str], cache: Optional[PriceCache] = None) -> PriceTable:
    """Load, align and cache the requested tickers from a price CSV."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"price file not found: {path}")
    if not tickers:
        raise DataError("no tickers requested")
    if len(set(tickers)) != len(tickers):
        raise DataError("ticker list contains duplicates")
    content = path.read_bytes()
    return load_prices_from_bytes(content, tickers, cache=cache, source=str(path))


def load_prices_from_bytes(content: bytes, tickers: Sequence[str], cache: Optional[PriceCache] = None,
                           source: str = "<upload>") -> PriceTable:
    cache = cache if cache is not None else PriceCache()
    key = PriceCache.make_key(content, tickers)
    entry = cache.get(key)
    if entry is not None:
        logger.debug(f"Price cache hit for {source}")
        table = PriceTable(entry["tickers"], entry["dates"], entry["prices"])
        return table.select(list(tickers))

    parsed = parse_price_csv(content)
    missing = [t for t in tickers if t not in parsed]
    if missing:
        raise UnknownTickerError(missing)
    table = align([PriceSeries(t, *parsed[t]) for t in tickers])
    # sorted ticker order in the cache so the key (a ticker set) maps to one layout
    ordered = sorted(set(tickers))
    cache.put(key, {"tickers": tuple(ordered), "dates": table.dates,
                    "prices": np.array(table.select(ordered).prices)})
    logger.info(f"Loaded {len(table.dates)} aligned dates for {len(table.tickers)} tickers from {source}")
    return table


def write_prices_csv(prices: PriceTable, path: Union[str, Path]) -> Path:
    """Write a PriceTable in the ingestion CSV schema (floats round-trip exactly)."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(",".join(["date", *prices.tickers]) + "\n")
            for day, row in zip(prices.dates, prices.prices):
                handle.write(",".join([day.isoformat(), *[repr(float(v)) for v in row]]) + "\n")
    except OSError as e:
        raise ReportIOError(f"could not write {path}: {e}") from e
    return path


def restrict_dates(prices: PriceTable, start: Optional[date] = None, end: Optional[date] = None) -> PriceTable:
    """Rows whose date lies in [start, end]."""
    keep = [i for i, d in enumerate(prices.dates)
            if (start is None or d >= start) and (end is None or d <= end)]
    if len(keep) < 2:
        raise InsufficientHistoryError(f"only {len(keep)} date(s) between {start} and {end}")
    return PriceTable(prices.tickers, tuple(prices.dates[i] for i in keep), prices.prices[keep])


def simple_returns(prices: PriceTable) -> ReturnsTable:
    p = prices.prices
    returns = (p[1:] - p[:-1]) / p[:-1]
    return ReturnsTable(prices.tickers, prices.dates[1:], returns)


def cumulative_returns(returns: ReturnsTable) -> ReturnsTable:
    growth = np.cumprod(1.0 + returns.returns, axis=0) - 1.0
    return ReturnsTable(returns.tickers, returns.dates, growth)


def reconstruct_prices(first_date: date, first_row: Sequence[float], returns: ReturnsTable) -> PriceTable:
    """Rebuild prices from the first price row and the simple returns."""
    base = np.asarray(first_row, dtype=float)
    path = base * np.cumprod(1.0 + returns.returns, axis=0)
    return PriceTable(returns.tickers, (first_date, *returns.dates), np.vstack([base, path]))


def _centered(returns: ReturnsTable) -> np.ndarray:
    values = np.asarray(returns.returns, dtype=float)
    return values - values.mean(axis=0)


def covariance_matrix(returns: ReturnsTable) -> np.ndarray:
    """Sample covariance with the k-1 denominator."""
    if returns.length < 2:
        raise InsufficientHistoryError("covariance needs at least 2 return periods")
    centered = _centered(returns)
    cov = centered.T @ centered / (returns.length - 1)
    return (cov + cov.T) / 2.0


def correlation_matrix(returns: ReturnsTable) -> np.ndarray:
    """Pearson correlation of the return columns."""
    if returns.length < 2:
        raise InsufficientHistoryError("correlation needs at least 2 return periods")
    for i, ticker in enumerate(returns.tickers):
        if np.ptp(returns.returns[:, i]) == 0:
            raise DegenerateAssetError(ticker)
    centered = _centered(returns)
    scatter = centered.T @ centered
    scale = np.sqrt(np.diag(scatter))
    corr = scatter / np.outer(scale, scale)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def return_distribution(returns: ReturnsTable) -> Dict[str, Dict[str, float]]:
    """Box statistics of each ticker's returns."""
    return {t: box_statistics(returns.returns[:, i]) for i, t in enumerate(returns.tickers)}


@dataclass(eq=False)
class MarketData:
    """Prices for a ticker list plus the statistics derived from them."""

    prices: PriceTable
    tickers: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        self.tickers = self.prices.tickers

    @classmethod
    def from_csv(cls, path: Union[str, Path], tickers: Sequence[str], start: Optional[date] = None,
                 end: Optional[date] = None, cache: Optional[PriceCache] = None) -> "MarketData":
        table = load_prices(path, tickers, cache=cache)
        if start is not None or end is not None:
            table = restrict_dates(table, start, end)
        return cls(table)

    @cached_property
    def returns(self) -> ReturnsTable:
        return simple_returns(self.prices)

    @cached_property
    def cumulative(self) -> ReturnsTable:
        return cumulative_returns(self.returns)

    @cached_property
    def correlation(self) -> np.ndarray:
        return correlation_matrix(self.returns)

    @cached_property
    def covariance(self) -> np.ndarray:
        return covariance_matrix(self.returns)

    @cached_property
    def distribution(self) -> Dict[str, Dict[str, float]]:
        return return_distribution(self.returns)

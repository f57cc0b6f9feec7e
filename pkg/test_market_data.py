#!/usr/bin/env python3
"""
Tests for price ingestion, alignment, returns and asset-level statistics.
"""

from datetime import date

import numpy as np
import pytest

from app import market_data
from app.errors import (
    DataError,
    DegenerateAssetError,
    InsufficientHistoryError,
    MalformedRowError,
    MissingFileError,
    UnknownTickerError,
)
from app.market_data import (
    MarketData,
    PriceCache,
    PriceSeries,
    PriceTable,
    ReturnsTable,
    correlation_matrix,
    covariance_matrix,
    cumulative_returns,
    load_prices,
    load_prices_from_bytes,
    reconstruct_prices,
    restrict_dates,
    return_distribution,
    simple_returns,
    write_prices_csv,
)

NO_CACHE = PriceCache(enabled=False)


def returns_table(columns, tickers=None):
    values = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    dates = tuple(date(2021, 1, 1 + i) for i in range(values.shape[0]))
    return ReturnsTable(tuple(tickers or (f"T{i}" for i in range(values.shape[1]))), dates, values)


class TestLoadPrices:
    def test_full_overlap(self):
        csv = b"date,IVV,AGG\n2020-01-01,300,110\n2020-01-02,301,110.5\n2020-01-03,302.5,110.2\n"
        table = load_prices_from_bytes(csv, ["IVV", "AGG"], cache=NO_CACHE)
        assert table.tickers == ("IVV", "AGG")
        assert table.prices.shape == (3, 2)
        assert table.prices[2, 0] == 302.5

    def test_inner_join_drops_incomplete_rows(self):
        csv = (b"date,A,B\n2020-01-01,1,\n2020-01-02,2,20\n"
               b"2020-01-03,3,30\n2020-01-04,,40\n")
        table = load_prices_from_bytes(csv, ["A", "B"], cache=NO_CACHE)
        assert table.dates == (date(2020, 1, 2), date(2020, 1, 3))
        np.testing.assert_array_equal(table.prices, [[2, 20], [3, 30]])

    def test_requested_order_and_subset(self):
        csv = b"date,A,B,C\n2020-01-01,1,2,3\n2020-01-02,2,3,4\n"
        table = load_prices_from_bytes(csv, ["C", "A"], cache=NO_CACHE)
        assert table.tickers == ("C", "A")
        np.testing.assert_array_equal(table.prices[:, 0], [3, 4])

    def test_crlf_and_unsorted_rows(self):
        csv = b"date,A\r\n2020-01-03,3\r\n2020-01-01,1\r\n2020-01-02,2\r\n"
        table = load_prices_from_bytes(csv, ["A"], cache=NO_CACHE)
        np.testing.assert_array_equal(table.prices[:, 0], [1, 2, 3])

    def test_unknown_ticker(self):
        csv = b"date,IVV\n2020-01-01,1\n2020-01-02,2\n"
        with pytest.raises(UnknownTickerError) as info:
            load_prices_from_bytes(csv, ["IVV", "XXX"], cache=NO_CACHE)
        assert info.value.tickers == ["XXX"]

    @pytest.mark.parametrize("csv, line", [
        (b"date,A\n2020-01-01,1\n2020-13-01,2\n", 3),
        (b"date,A\n2020-01-01,1\n2020-01-02,-2\n", 3),
        (b"date,A\n2020-01-01,abc\n2020-01-02,2\n", 2),
        (b"date,A\n2020-01-01,1\n2020-01-01,2\n", 3),
        (b"when,A\n2020-01-01,1\n", 1),
        (b"date,A\n2020-01-01,1\n\n2020-01-02,abc\n", 4),
        (b"date,A\n\n\n2020-01-01,1\n2020-13-02,2\n", 5),
        (b"date,A,A\n2020-01-01,1,2\n2020-01-02,1,3\n", 1),
        (b"date,A,\n2020-01-01,1,2\n", 1),
    ])
    def test_malformed_rows_report_line(self, csv, line):
        with pytest.raises(MalformedRowError) as info:
            load_prices_from_bytes(csv, ["A"], cache=NO_CACHE)
        assert info.value.line_number == line
        assert f"line {line}" in str(info.value)

    def test_duplicate_header_ticker_is_rejected(self):
        csv = b"date,A,B,A\n2020-01-01,1,2,3\n2020-01-02,1,3,4\n"
        with pytest.raises(MalformedRowError, match="duplicate ticker in header: A"):
            load_prices_from_bytes(csv, ["A"], cache=NO_CACHE)

    def test_blank_lines_are_skipped(self):
        csv = b"date,A\n\n2020-01-01,1\n\n2020-01-02,2\n\n"
        table = load_prices_from_bytes(csv, ["A"], cache=NO_CACHE)
        assert table.dates == (date(2020, 1, 1), date(2020, 1, 2))

    def test_single_observation_ticker(self):
        csv = b"date,A,B\n2020-01-01,1,2\n2020-01-02,1.5,\n"
        with pytest.raises(InsufficientHistoryError, match="B"):
            load_prices_from_bytes(csv, ["A", "B"], cache=NO_CACHE)

    def test_fewer_than_two_aligned_dates(self):
        csv = b"date,A,B\n2020-01-01,1,\n2020-01-02,2,3\n2020-01-03,,4\n"
        with pytest.raises(InsufficientHistoryError):
            load_prices_from_bytes(csv, ["A", "B"], cache=NO_CACHE)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_prices(tmp_path / "nope.csv", ["A"], cache=NO_CACHE)

    def test_written_csv_reloads_exactly(self, tmp_path, small_prices):
        path = write_prices_csv(small_prices, tmp_path / "p.csv")
        reloaded = load_prices(path, list(small_prices.tickers), cache=NO_CACHE)
        assert reloaded.dates == small_prices.dates
        np.testing.assert_array_equal(reloaded.prices, small_prices.prices)


class TestPriceSeries:
    DAYS = (date(2020, 1, 1), date(2020, 1, 2), date(2020, 1, 3))

    def test_prices_are_read_only(self):
        series = PriceSeries("A", self.DAYS, [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            series.prices[0] = 5.0

    @pytest.mark.parametrize("dates, prices, error", [
        ((date(2020, 1, 2), date(2020, 1, 1)), [1.0, 2.0], DataError),
        ((date(2020, 1, 1), date(2020, 1, 1)), [1.0, 2.0], DataError),
        ((date(2020, 1, 1), date(2020, 1, 2)), [1.0, 0.0], DataError),
        ((date(2020, 1, 1), date(2020, 1, 2)), [1.0], DataError),
        ((date(2020, 1, 1),), [1.0], InsufficientHistoryError),
    ])
    def test_invariants(self, dates, prices, error):
        with pytest.raises(error):
            PriceSeries("A", dates, prices)

    def test_ingestion_sorts_each_column(self):
        parsed = market_data.parse_price_csv(b"date,A\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n")
        series = PriceSeries("A", *parsed["A"])
        assert series.dates == self.DAYS
        np.testing.assert_array_equal(series.prices, [1, 2, 3])


class TestPriceCache:
    def test_cached_load_is_identical_and_skips_parsing(self, tmp_path, prices_csv, monkeypatch):
        cache = PriceCache(tmp_path / "cache", enabled=True)
        first = load_prices(prices_csv, ["CCC", "AAA"], cache=cache)
        assert len(list((tmp_path / "cache").glob("*.pkl"))) == 1

        def fail(_):
            raise AssertionError("cache miss")

        monkeypatch.setattr(market_data, "parse_price_csv", fail)
        second = load_prices(prices_csv, ["CCC", "AAA"], cache=cache)
        assert second.tickers == first.tickers
        assert second.dates == first.dates
        np.testing.assert_array_equal(second.prices, first.prices)

        # same ticker set in another order maps to the same entry
        third = load_prices(prices_csv, ["AAA", "CCC"], cache=cache)
        np.testing.assert_array_equal(third.prices, first.prices[:, ::-1])

    def test_key_depends_on_content_and_tickers(self):
        assert PriceCache.make_key(b"a", ["X"]) != PriceCache.make_key(b"b", ["X"])
        assert PriceCache.make_key(b"a", ["X"]) != PriceCache.make_key(b"a", ["X", "Y"])
        assert PriceCache.make_key(b"a", ["X", "Y"]) == PriceCache.make_key(b"a", ["Y", "X"])

    def test_corrupt_entry_is_ignored(self, tmp_path):
        cache = PriceCache(tmp_path, enabled=True)
        key = PriceCache.make_key(b"x", ["A"])
        (tmp_path / f"{key}.pkl").write_bytes(b"not a pickle")
        assert cache.get(key) is None


class TestReturns:
    @pytest.mark.parametrize("path, expected", [
        ([100, 110], 0.10),
        ([100, 100], 0.0),
        ([100, 50], -0.50),
    ])
    def test_simple_returns(self, path, expected):
        table = PriceTable(("A",), (date(2020, 1, 1), date(2020, 1, 2)), np.array(path, dtype=float)[:, None])
        returns = simple_returns(table)
        assert returns.dates == (table.dates[1],)
        assert returns.returns[0, 0] == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("daily, expected", [
        ([0.10, 0.10], [0.10, 0.21]),
        ([0.0, 0.0], [0.0, 0.0]),
        ([0.50, -0.50], [0.50, -0.25]),
        ([0.01, -0.01], [0.01, -0.0001]),
    ])
    def test_cumulative_returns(self, daily, expected):
        result = cumulative_returns(returns_table([daily]))
        np.testing.assert_allclose(result.returns[:, 0], expected, atol=1e-15)

    def test_reconstruction_round_trip(self, small_prices):
        returns = simple_returns(small_prices)
        rebuilt = reconstruct_prices(small_prices.dates[0], small_prices.prices[0], returns)
        assert rebuilt.dates == small_prices.dates
        np.testing.assert_allclose(rebuilt.prices, small_prices.prices, rtol=1e-12)

    def test_restrict_dates_is_inclusive(self, small_prices):
        start, end = small_prices.dates[5], small_prices.dates[9]
        restricted = restrict_dates(small_prices, start, end)
        assert restricted.dates == small_prices.dates[5:10]

    def test_removing_an_asset_keeps_shared_dates(self):
        csv = b"date,A,B,C\n2020-01-01,1,1,\n2020-01-02,2,2,2\n2020-01-03,3,3,3\n"
        both = load_prices_from_bytes(csv, ["A", "B"], cache=NO_CACHE)
        three = load_prices_from_bytes(csv, ["A", "B", "C"], cache=NO_CACHE)
        assert set(three.dates) <= set(both.dates)
        assert len(both.dates) == 3


class TestAssetStatistics:
    def test_duplicate_and_negated_columns(self):
        x = [0.01, -0.02, 0.03, 0.005]
        corr = correlation_matrix(returns_table([x, x, [-v for v in x]]))
        assert corr[0, 1] == pytest.approx(1.0)
        assert corr[0, 2] == pytest.approx(-1.0)
        np.testing.assert_array_equal(np.diag(corr), 1.0)
        np.testing.assert_allclose(corr, corr.T, atol=1e-14)

    def test_independent_coin_flips(self):
        corr = correlation_matrix(returns_table([[1, 1, -1, -1], [1, -1, 1, -1]]))
        assert corr[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_zero_variance_column_names_ticker(self):
        with pytest.raises(DegenerateAssetError) as info:
            correlation_matrix(returns_table([[0.01, 0.02, 0.03], [0.01, 0.01, 0.01]], ["X", "FLAT"]))
        assert info.value.ticker == "FLAT"

    def test_covariance_matches_numpy(self, small_prices):
        returns = simple_returns(small_prices)
        np.testing.assert_allclose(covariance_matrix(returns), np.cov(returns.returns, rowvar=False),
                                   rtol=1e-12, atol=1e-18)

    def test_distribution_uses_nearest_rank(self):
        stats = return_distribution(returns_table([[5, 3, 1, 4, 2]], ["A"]))
        assert stats["A"] == {"min": 1.0, "q1": 2.0, "median": 3.0, "q3": 4.0, "max": 5.0}

    def test_market_data_from_csv(self, prices_csv):
        market = MarketData.from_csv(prices_csv, ["AAA", "BBB"], cache=NO_CACHE)
        assert market.returns.length == 59
        assert market.correlation.shape == (2, 2)
        np.testing.assert_allclose(1.0 + market.cumulative.returns[-1],
                                   market.prices.prices[-1] / market.prices.prices[0], rtol=1e-12)


if __name__ == "__main__":
    pytest.main([__file__])

#!/usr/bin/env python3
"""
Tests for the run configuration, report tables, SVG figures and the command-line front end.
"""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from app.cli import main, run
from app.config import DEFAULT_TICKERS
from app.errors import ConfigError, DataError
from app.expected_stats import ExpectedStats
from app.figures import FigureSpec, emit_figure, render_svg
from app.fixtures import FIXTURE_PERIODS, FIXTURE_SEED, synthetic_prices
from app.market_data import PriceCache, load_prices, write_prices_csv
from app.optimizers import Weights
from app.portfolio import PortfolioResult
from app.reports import distribution_frame, portfolio_frame, write_frame
from app.run_config import RunConfig
from app.utils import box_statistics, make_rng
from conftest import price_table

SVG = "{http://www.w3.org/2000/svg}"
QUICK = {
    "figures": [],
    "solver": {"tolerance": 1e-7, "frontier_points": 5},
    "anneal": {"sweeps": 50, "restarts": 2},
    "backtest": {"train_periods": 20, "test_periods": 10},
}


def write_config(directory, **overrides):
    document = {"prices": "prices.csv", "tickers": ["AAA", "BBB", "CCC"], **QUICK,
                "objectives": [{"kind": "EWP"}, {"kind": "MVP"}]}
    document.update(overrides)
    path = directory / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def read_back(path):
    return pd.read_csv(path, float_precision="round_trip")


class TestRunConfig:
    @pytest.mark.parametrize("document, key", [
        ({"prices": "p.csv", "colour": "red"}, "colour"),
        ({"prices": "p.csv", "estimator": {"bogus": 1}}, "estimator.bogus"),
        ({"prices": "p.csv", "objectives": [{"kind": "XYZ"}]}, "objectives.0.kind"),
        ({"prices": "p.csv", "figures": ["pie-chart"]}, "figures"),
        ({"prices": "p.csv", "tickers": []}, "tickers"),
        ({"tickers": ["A"]}, "prices"),
    ])
    def test_invalid_documents_name_key(self, document, key):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(document)
        assert info.value.key_path == key

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"prices\": ", encoding="utf-8")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(tmp_path / "absent.json")

    def test_prices_resolved_at_load_time(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_file(write_config(tmp_path, prices="absent.csv"))
        assert info.value.key_path == "prices"
        assert "absent.csv" in str(info.value)

    def test_relative_paths_follow_config_file(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(tmp_path, output_dir="out"))
        assert config.prices_path == tmp_path / "prices.csv"
        assert config.output_path == tmp_path / "out"

    def test_annual_values_are_converted(self):
        config = RunConfig.from_dict({"prices": "p.csv", "objectives": [
            {"kind": "MVP", "target_return": 0.252},
            {"kind": "MRP", "target_volatility": 252 ** 0.5 * 0.01},
            {"kind": "msrp"},
        ], "risk_free_rate": 0.0252})
        mvp, mrp, msrp = config.portfolio_objectives()
        assert mvp.target_return == pytest.approx(0.001)
        assert mrp.target_volatility == pytest.approx(0.01)
        assert msrp.label == "MSRP"
        assert msrp.risk_free_rate == pytest.approx(0.0001)

    def test_duplicate_objectives(self):
        config = RunConfig.from_dict({"prices": "p.csv", "objectives": [{"kind": "EWP"}, {"kind": "ewp"}]})
        with pytest.raises(ConfigError) as info:
            config.portfolio_objectives()
        assert info.value.key_path == "objectives"

    def test_market_caps_must_match_tickers(self):
        config = RunConfig.from_dict({"prices": "p.csv", "tickers": ["A", "B"],
                                      "objectives": [{"kind": "MCP", "market_caps": [1.0]}]})
        with pytest.raises(ConfigError) as info:
            config.portfolio_objectives()
        assert info.value.key_path == "objectives.0.market_caps"

    def test_seed_override(self):
        config = RunConfig.from_dict({"prices": "p.csv"})
        assert config.with_seed(7).seed == 7
        assert config.with_seed(7).anneal_schedule().seed == 7
        with pytest.raises(ConfigError):
            config.with_seed(-1)


class TestReports:
    def test_box_statistics_nearest_rank(self):
        assert box_statistics([5, 3, 1, 4, 2]) == {"min": 1.0, "q1": 2.0, "median": 3.0, "q3": 4.0, "max": 5.0}

    def test_portfolio_table_parses_back(self, tmp_path):
        stats = ExpectedStats(("A", "B"), [0.001, 0.0004], np.eye(2) * 1e-4)
        weights = Weights(stats.tickers, [0.3, 0.7])
        results = [
            PortfolioResult("MVP", weights, 0.00058, 0.0076157731058639, 0.0761, ("psd-repaired", "bounds-relaxed")),
            PortfolioResult("EWP", Weights(stats.tickers, [0.5, 0.5]), 0.0007, 0.0, None, ()),
        ]
        frame = read_back(write_frame(portfolio_frame(results), tmp_path / "optimize_portfolios.csv"))
        assert list(frame.columns) == ["objective", "expected_return", "volatility", "sharpe", "flags", "A", "B"]
        assert frame.loc[0, "volatility"] == 0.0076157731058639
        assert frame.loc[0, "flags"] == "bounds-relaxed;psd-repaired"
        assert frame.loc[0, "A"] == 0.3
        assert np.isnan(frame.loc[1, "sharpe"])

    def test_distribution_table(self):
        frame = distribution_frame({"A": box_statistics([1, 2, 3, 4, 5])})
        assert list(frame.columns) == ["series", "min", "q1", "median", "q3", "max"]
        assert frame.iloc[0].tolist() == ["A", 1.0, 2.0, 3.0, 4.0, 5.0]


class TestFigures:
    def test_cumulative_series_and_legend(self):
        data = {"date": ["2020-01-01", "2020-01-02", "2020-01-03"], "EWP": [0.0, 0.01, 0.02],
                "MVP": [0.0, -0.01, 0.005]}
        root = render_svg(FigureSpec("cumulative-returns", "Cumulative"), data)
        series = [e for e in root.iter("polyline") if e.get("class") == "series"]
        legend = [e for e in root.iter("g") if e.get("class") == "legend-entry"]
        assert [e.get("data-label") for e in series] == ["EWP", "MVP"]
        assert len(series[0].get("points").split()) == 3
        assert len(legend) == 2

    def test_identity_heatmap_annotations(self):
        labels = ["A", "B", "C"]
        root = render_svg(FigureSpec("correlation-heatmap", "Correlation"),
                          pd.DataFrame(np.eye(3), index=labels, columns=labels))
        annotations = [e.text for e in root.iter("text") if e.get("class") == "annotation"]
        assert annotations == ["1.00", "0.00", "0.00", "0.00", "1.00", "0.00", "0.00", "0.00", "1.00"]

    def test_undefined_correlation_is_marked(self):
        frame = pd.DataFrame([[1.0, np.nan], [np.nan, 1.0]], index=["A", "B"], columns=["A", "B"])
        root = render_svg(FigureSpec("correlation-heatmap", "Correlation"), frame)
        assert "n/a" in [e.text for e in root.iter("text") if e.get("class") == "annotation"]

    def test_one_box_per_series(self):
        data = distribution_frame({"A": box_statistics([-0.02, 0.0, 0.01]), "B": box_statistics([0.001, 0.002])})
        root = render_svg(FigureSpec("return-distribution", "Distribution"), data)
        assert [e.get("data-label") for e in root.iter("g") if e.get("class") == "box"] == ["A", "B"]

    def test_scatter_groups(self):
        data = pd.DataFrame({"group": ["frontier", "frontier", "asset", "portfolio"],
                             "label": ["f0", "f1", "A", "MVP"], "volatility": [0.1, 0.2, 0.3, 0.15],
                             "expected_return": [0.01, 0.02, 0.015, 0.012]})
        root = render_svg(FigureSpec("frontier-scatter", "Frontier"), data)
        assert len([e for e in root.iter("circle") if e.get("class") == "asset"]) == 1
        assert len([e for e in root.iter("rect") if e.get("class") == "portfolio"]) == 1

    @pytest.mark.parametrize("kind, data", [
        ("cumulative-returns", {"date": ["d1", "d2"], "A": [0.0, 0.1], "B": [0.0]}),
        ("cumulative-returns", {"date": []}),
        ("frontier-scatter", {"group": ["cloud"], "label": ["x"], "volatility": [0.1], "expected_return": [0.0]}),
        ("correlation-heatmap", pd.DataFrame([[1.0, 0.5]])),
    ])
    def test_malformed_data(self, kind, data):
        with pytest.raises(DataError):
            render_svg(FigureSpec(kind, "Broken"), data)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            FigureSpec("pie-chart", "Pie")

    def test_emitted_files(self, tmp_path):
        data = pd.DataFrame({"date": ["2020-01-01", "2020-01-02"], "EWP": [0.0, 0.0123456789012345]})
        svg_path, csv_path = emit_figure(FigureSpec("cumulative-returns", "Cumulative"), data,
                                         tmp_path / "figure.svg", tmp_path / "figure.csv")
        root = ET.parse(svg_path).getroot()
        assert root.tag == f"{SVG}svg"
        assert len(list(root.iter(f"{SVG}polyline"))) == 1
        assert read_back(csv_path)["EWP"].tolist() == [0.0, 0.0123456789012345]


class TestCommands:
    def test_optimize_equal_weights(self, tmp_path):
        returns = make_rng(1).normal(0.0005, 0.01, size=(30, 4))
        write_prices_csv(price_table(returns, ("A", "B", "C", "D")), tmp_path / "prices.csv")
        config = RunConfig.from_file(write_config(tmp_path, tickers=["A", "B", "C", "D"],
                                                  objectives=[{"kind": "EWP"}]))
        run("optimize", config, tmp_path / "out")
        frame = read_back(tmp_path / "out" / "optimize_portfolios.csv")
        assert frame.loc[0, ["A", "B", "C", "D"]].tolist() == [0.25] * 4

    def test_stats_writes_tables_and_figures(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(tmp_path, figures=["cumulative-returns", "correlation-heatmap"]))
        names = {p.name for p in run("stats", config, tmp_path / "out")}
        assert {"stats_expected.csv", "stats_covariance.csv", "stats_cumulative.svg", "stats_cumulative.csv",
                "stats_distribution.csv", "stats_correlation.svg", "stats_correlation.csv",
                "stats_conventions.txt"} <= names
        assert "stats_distribution.svg" not in names
        for name in ("stats_cumulative.svg", "stats_correlation.svg"):
            ET.parse(tmp_path / "out" / name)
        expected = read_back(tmp_path / "out" / "stats_expected.csv")
        assert expected["ticker"].tolist() == ["AAA", "BBB", "CCC"]

    def test_frontier_command(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(tmp_path, figures=["frontier-scatter"]))
        run("frontier", config, tmp_path / "out")
        points = read_back(tmp_path / "out" / "frontier_points.csv")
        assert len(points) == 5
        assert (points["volatility"].diff().dropna() >= -1e-9).all()
        scatter = read_back(tmp_path / "out" / "frontier_scatter.csv")
        assert scatter[scatter["group"] == "portfolio"]["label"].tolist() == ["EWP", "MVP"]

    def test_frontier_single_asset(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(tmp_path, tickers=["AAA"]))
        run("frontier", config, tmp_path / "out")
        points = read_back(tmp_path / "out" / "frontier_points.csv")
        assert np.allclose(points["AAA"], 1.0)
        assert np.allclose(points["volatility"], points["volatility"].iloc[0])

    def test_backtest_reruns_are_byte_identical(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(
            tmp_path, figures=["cumulative-returns", "correlation-heatmap"],
            objectives=[{"kind": "EWP"}, {"kind": "MVP"}, {"kind": "BMOP"}]))
        first = {p.name: p.read_bytes() for p in run("backtest", config, tmp_path / "first")}
        second = {p.name: p.read_bytes() for p in run("backtest", config, tmp_path / "second")}
        assert first == second
        assert {"backtest_summary.csv", "backtest_weights.csv", "backtest_EWP.csv", "backtest_BMOP.csv",
                "backtest_cumulative.svg", "backtest_frontier.csv"} <= set(first)
        summary = read_back(tmp_path / "first" / "backtest_summary.csv")
        assert summary["objective"].tolist() == ["EWP", "MVP", "BMOP"]

    def test_fixture_command(self, tmp_path):
        paths = run("fixture", None, tmp_path)
        table = load_prices(paths[0], DEFAULT_TICKERS, PriceCache(enabled=False))
        assert len(table.dates) == FIXTURE_PERIODS
        np.testing.assert_array_equal(table.prices, synthetic_prices(FIXTURE_PERIODS, FIXTURE_SEED).prices)

    def test_seed_is_recorded(self, tmp_path, prices_csv):
        config = RunConfig.from_file(write_config(tmp_path))
        run("optimize", config, tmp_path / "out", seed=99)
        assert "seed: 99" in (tmp_path / "out" / "optimize_conventions.txt").read_text(encoding="utf-8")

    def test_commands_other_than_fixture_need_config(self):
        with pytest.raises(ConfigError):
            run("stats", None)


class TestExitCodes:
    def test_success(self, tmp_path, prices_csv):
        assert main(["optimize", "--config", str(write_config(tmp_path)), "--out", str(tmp_path / "out")]) == 0

    def test_config_error(self, tmp_path, capsys):
        assert main(["optimize", "--config", str(write_config(tmp_path, colour="red"))]) == 2
        assert "error:" in capsys.readouterr().err

    def test_data_error(self, tmp_path, prices_csv):
        path = write_config(tmp_path, tickers=["AAA", "ZZZ"])
        assert main(["optimize", "--config", str(path), "--out", str(tmp_path / "out")]) == 3

    def test_missing_prices_is_a_config_error(self, tmp_path):
        path = write_config(tmp_path, prices="absent.csv")
        assert main(["optimize", "--config", str(path), "--out", str(tmp_path / "out")]) == 2

    def test_solver_error(self, tmp_path, prices_csv):
        path = write_config(tmp_path, bounds={"lower": 0.5, "upper": 0.6}, objectives=[{"kind": "MVP"}])
        assert main(["optimize", "--config", str(path), "--out", str(tmp_path / "out")]) == 4

    def test_io_error(self, tmp_path, prices_csv):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory", encoding="utf-8")
        assert main(["optimize", "--config", str(write_config(tmp_path)), "--out", str(blocker)]) == 5


if __name__ == "__main__":
    pytest.main([__file__])

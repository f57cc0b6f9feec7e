from fastapi import APIRouter, UploadFile, File, HTTPException, Form
from typing import List, Dict, Any, Optional
from pydantic import BaseModel
import json
import math

from ..backtest import run_backtest
from ..errors import ConfigError, PortfolioError
from ..expected_stats import estimate
from ..market_data import MarketData, PriceTable, load_prices_from_bytes, restrict_dates
from ..portfolio import PortfolioResult, asset_points, efficient_frontier
from ..run_config import RunConfig
from ..logger import logger

router = APIRouter()


class PortfolioResultModel(BaseModel):
    """One solved objective."""
    objective: str
    weights: Dict[str, float]
    expected_return: float
    volatility: float
    sharpe: Optional[float]
    flags: List[str]


class OptimizeResponse(BaseModel):
    tickers: List[str]
    periods: int
    results: List[PortfolioResultModel]


class FrontierPointModel(BaseModel):
    target_return: float
    expected_return: float
    volatility: float
    weights: Dict[str, float]


class AssetPointModel(BaseModel):
    ticker: str
    volatility: float
    expected_return: float


class FrontierResponse(BaseModel):
    tickers: List[str]
    points: List[FrontierPointModel]
    assets: List[AssetPointModel]


class BacktestSummaryModel(BaseModel):
    objective: str
    annualized_return: float
    annualized_volatility: float
    sharpe: Optional[float]
    windows: int
    flags: List[str]


class SeriesModel(BaseModel):
    objective: str
    dates: List[str]
    daily_returns: List[float]
    cumulative_returns: List[float]


class BacktestResponse(BaseModel):
    tickers: List[str]
    windows: int
    summary: List[BacktestSummaryModel]
    series: List[SeriesModel]
    correlation: Dict[str, Dict[str, Optional[float]]]
    flags: List[str]


def _parse_request(request: str, filename: Optional[str]) -> RunConfig:
    """The ``request`` form field is a run configuration without the ``prices`` path."""
    try:
        data = json.loads(request) if request else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in request field: {e.msg}", "request")
    if not isinstance(data, dict):
        raise ConfigError("request must be a JSON object", "request")
    data.setdefault("prices", filename or "<upload>")
    return RunConfig.from_dict(data)


async def _load(file: UploadFile, config: RunConfig, restrict: bool = True) -> PriceTable:
    content = await file.read()
    table = load_prices_from_bytes(content, config.tickers, source=file.filename or "<upload>")
    if restrict and (config.start_date is not None or config.end_date is not None):
        table = restrict_dates(table, config.start_date, config.end_date)
    return table


def _result_model(result: PortfolioResult) -> PortfolioResultModel:
    return PortfolioResultModel(**result.to_dict())


def _http_error(e: PortfolioError) -> HTTPException:
    logger.warning(f"Request rejected: {e}")
    return HTTPException(status_code=e.status_code, detail=str(e))


def _finite(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


@router.post("/optimize", response_model=OptimizeResponse)
async def optimize(file: UploadFile = File(...), request: str = Form("{}")):
    """
    Build one portfolio per configured objective from an uploaded price CSV.

    Args:
        file: CSV with a ``date`` column and one price column per ticker
        request: JSON run configuration (tickers, objectives, bounds, estimator, ...)

    Returns:
        The solved portfolios with their per-period statistics
    """
    logger.info(f"Optimizing portfolios from: {file.filename}")
    try:
        config = _parse_request(request, file.filename)
        market = MarketData(await _load(file, config))
        stats = estimate(market.returns, config.estimator_config())
        results = config.build_portfolios(stats)
        logger.info(f"Solved {len(results)} objective(s) for {len(stats.tickers)} tickers")
        return OptimizeResponse(tickers=list(stats.tickers), periods=market.returns.length,
                                results=[_result_model(r) for r in results])
    except HTTPException:
        raise
    except PortfolioError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Unexpected error optimizing {file.filename}: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/frontier", response_model=FrontierResponse)
async def frontier(file: UploadFile = File(...), request: str = Form("{}")):
    """Trace the efficient frontier and report the single-asset points next to it."""
    logger.info(f"Tracing frontier from: {file.filename}")
    try:
        config = _parse_request(request, file.filename)
        market = MarketData(await _load(file, config))
        stats = estimate(market.returns, config.estimator_config())
        points = efficient_frontier(stats, config.weight_bounds(), config.solver_settings())
        return FrontierResponse(
            tickers=list(stats.tickers),
            points=[FrontierPointModel(target_return=p.target_return, expected_return=p.expected_return,
                                       volatility=p.volatility, weights=p.weights.as_dict()) for p in points],
            assets=[AssetPointModel(ticker=t, volatility=v, expected_return=m) for t, v, m in asset_points(stats)],
        )
    except HTTPException:
        raise
    except PortfolioError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Unexpected error tracing frontier for {file.filename}: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail="Internal server error")


@router.post("/backtest", response_model=BacktestResponse)
async def backtest(file: UploadFile = File(...), request: str = Form("{}")):
    """Run the rolling-window backtest; the date range and windows come from the request."""
    logger.info(f"Backtesting from: {file.filename}")
    try:
        config = _parse_request(request, file.filename)
        prices = await _load(file, config, restrict=False)
        report = run_backtest(prices, config.backtest_config())
        correlation: Dict[str, Dict[str, Any]] = {
            row: {col: _finite(report.correlation.loc[row, col]) for col in report.correlation.columns}
            for row in report.correlation.index
        }
        return BacktestResponse(
            tickers=list(report.tickers),
            windows=len(report.windows),
            summary=[BacktestSummaryModel(**row) for row in report.summary_rows()],
            series=[SeriesModel(objective=label, dates=[d.isoformat() for d in s.dates],
                                daily_returns=s.daily_returns.tolist(),
                                cumulative_returns=s.cumulative_returns.tolist())
                    for label, s in report.summaries.items()],
            correlation=correlation,
            flags=list(report.flags),
        )
    except HTTPException:
        raise
    except PortfolioError as e:
        raise _http_error(e)
    except Exception as e:
        logger.error(f"Unexpected error backtesting {file.filename}: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail="Internal server error")

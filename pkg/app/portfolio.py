"""Objective dispatch, portfolio statistics and the efficient frontier.

Every figure here is per period (daily). Annual targets from a run config are
converted before they reach a ``PortfolioObjective``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ZERO_VOLATILITY_TOL
from .errors import ConfigError, DimensionMismatchError
from .expected_stats import ExpectedStats
from .logger import logger
from .optimizers import (
    AnnealSchedule,
    SolverSettings,
    WeightBounds,
    Weights,
    anneal,
    build_bmop,
    frontier_weights,
    selection_to_weights,
    solve_mop,
    solve_mrp,
    solve_msrp,
    solve_mvp,
)
from .utils import dedupe, validate_objective_kind


class ObjectiveKind(str, Enum):
    EWP = "EWP"
    MCP = "MCP"
    MVP = "MVP"
    MRP = "MRP"
    MSRP = "MSRP"
    MOP = "MOP"
    BMOP = "BMOP"


REQUIRED_PARAMETERS = {
    ObjectiveKind.EWP: (),
    ObjectiveKind.MCP: ("market_caps",),
    ObjectiveKind.MVP: ("target_return",),
    ObjectiveKind.MRP: ("target_volatility",),
    ObjectiveKind.MSRP: ("risk_free_rate",),
    ObjectiveKind.MOP: ("risk_aversion",),
    ObjectiveKind.BMOP: ("risk_aversion",),
}


@dataclass(frozen=True)
class PortfolioObjective:
    """An objective kind plus the parameters that kind needs (per-period units)."""

    kind: ObjectiveKind
    market_caps: Optional[Tuple[float, ...]] = None
    target_return: Optional[float] = None
    target_volatility: Optional[float] = None
    risk_free_rate: Optional[float] = None
    risk_aversion: Optional[float] = None

    def __post_init__(self):
        try:
            kind = ObjectiveKind(validate_objective_kind(str(getattr(self.kind, "value", self.kind))))
        except ValueError as e:
            raise ConfigError(str(e), "objectives.kind")
        object.__setattr__(self, "kind", kind)
        if self.market_caps is not None:
            object.__setattr__(self, "market_caps", tuple(float(c) for c in self.market_caps))

        for name in REQUIRED_PARAMETERS[kind]:
            value = getattr(self, name)
            key = f"objectives.{kind.value}.{name}"
            if value is None:
                raise ConfigError("required for this objective", key)
            values = value if isinstance(value, tuple) else (value,)
            if not all(math.isfinite(v) for v in values):
                raise ConfigError("must be finite", key)
        if kind is ObjectiveKind.MCP and (not self.market_caps or min(self.market_caps) <= 0):
            raise ConfigError("market caps must be strictly positive", f"objectives.{kind.value}.market_caps")
        if kind is ObjectiveKind.MRP and self.target_volatility <= 0:
            raise ConfigError("must be positive", f"objectives.{kind.value}.target_volatility")
        if kind is ObjectiveKind.MOP and self.risk_aversion <= 0:
            raise ConfigError("must be positive", f"objectives.{kind.value}.risk_aversion")
        if kind is ObjectiveKind.BMOP and self.risk_aversion < 0:
            raise ConfigError("must be non-negative", f"objectives.{kind.value}.risk_aversion")

    @property
    def label(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class PortfolioResult:
    objective: str
    weights: Weights
    expected_return: float
    volatility: float
    sharpe: Optional[float]
    flags: Tuple[str, ...] = field(default=())

    def to_dict(self) -> Dict:
        return {
            "objective": self.objective,
            "weights": self.weights.as_dict(),
            "expected_return": self.expected_return,
            "volatility": self.volatility,
            "sharpe": self.sharpe,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    volatility: float
    expected_return: float
    weights: Weights


def portfolio_stats(weights: Weights, stats: ExpectedStats,
                    risk_free_rate: float = 0.0) -> Tuple[float, float, Optional[float]]:
    """Expected return w'r, volatility sqrt(w'Σw) and Sharpe (None when volatility is zero)."""
    w = np.asarray(weights.values if isinstance(weights, Weights) else weights, dtype=float)
    if w.size != stats.size:
        raise DimensionMismatchError(f"{w.size} weights for {stats.size} assets")
    expected_return = float(w @ stats.mean)
    volatility = math.sqrt(max(float(w @ stats.covariance @ w), 0.0))
    sharpe = None if volatility <= ZERO_VOLATILITY_TOL else (expected_return - risk_free_rate) / volatility
    return expected_return, volatility, sharpe


def _market_cap_weights(stats: ExpectedStats, caps: Sequence[float]) -> Weights:
    caps = np.asarray(caps, dtype=float)
    if caps.size != stats.size:
        raise DimensionMismatchError(f"{caps.size} market caps for {stats.size} assets")
    return Weights(stats.tickers, caps / caps.sum())


def build_portfolio(objective: PortfolioObjective, stats: ExpectedStats, bounds: Optional[WeightBounds] = None,
                    settings: Optional[SolverSettings] = None, schedule: Optional[AnnealSchedule] = None,
                    risk_free_rate: float = 0.0) -> PortfolioResult:
    """Solve one objective on one set of statistics.

    EWP, MCP and BMOP ignore the weight bounds; the other kinds honour them.
    The Sharpe ratio uses the objective's own risk-free rate for MSRP and
    ``risk_free_rate`` otherwise.
    """
    bounds = bounds or WeightBounds()
    settings = settings or SolverSettings()
    schedule = schedule or AnnealSchedule()
    kind = objective.kind

    if kind is ObjectiveKind.EWP:
        weights = Weights(stats.tickers, np.full(stats.size, 1.0 / stats.size))
    elif kind is ObjectiveKind.MCP:
        weights = _market_cap_weights(stats, objective.market_caps)
    elif kind is ObjectiveKind.MVP:
        weights = solve_mvp(stats, objective.target_return, bounds, settings)
    elif kind is ObjectiveKind.MRP:
        weights = solve_mrp(stats, objective.target_volatility, bounds, settings)
    elif kind is ObjectiveKind.MSRP:
        weights = solve_msrp(stats, objective.risk_free_rate, bounds, settings)
        risk_free_rate = objective.risk_free_rate
    elif kind is ObjectiveKind.MOP:
        weights = solve_mop(stats, objective.risk_aversion, bounds, settings)
    else:
        model = build_bmop(stats, objective.risk_aversion)
        weights = selection_to_weights(anneal(model, schedule), stats.tickers)

    expected_return, volatility, sharpe = portfolio_stats(weights, stats, risk_free_rate)
    flags = tuple(dedupe([*stats.flags, *weights.flags]))
    logger.debug(f"{objective.label}: return {expected_return:.6g}, volatility {volatility:.6g}")
    return PortfolioResult(objective.label, weights, expected_return, volatility, sharpe, flags)


def efficient_frontier(stats: ExpectedStats, bounds: Optional[WeightBounds] = None,
                       settings: Optional[SolverSettings] = None,
                       points: Optional[int] = None) -> List[FrontierPoint]:
    """MVP solutions for targets swept from the minimum-variance return to the bounded maximum return."""
    bounds = bounds or WeightBounds()
    settings = settings or SolverSettings()
    points = points if points is not None else settings.frontier_points
    if points < 2:
        raise ConfigError("must be at least 2", "solver.frontier_points")

    targets, solutions = frontier_weights(stats, bounds, settings, points)
    frontier = []
    for target, weights in zip(targets, solutions):
        expected_return, volatility, _ = portfolio_stats(weights, stats)
        frontier.append(FrontierPoint(float(target), volatility, expected_return, weights))
    logger.info(f"Traced efficient frontier with {len(frontier)} points")
    return frontier


def asset_points(stats: ExpectedStats) -> List[Tuple[str, float, float]]:
    """(ticker, volatility, expected return) of each single asset."""
    return [(t, float(v), float(m)) for t, v, m in zip(stats.tickers, stats.volatilities, stats.mean)]

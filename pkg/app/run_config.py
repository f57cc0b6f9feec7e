"""JSON run configuration shared by every CLI command.

Annual figures (``target_return``, ``target_volatility``, ``risk_free_rate``)
are written in annual units and converted to per-period values when the
library objects are built. Unknown keys anywhere in the document are rejected.
"""

import json
from dataclasses import replace
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .backtest import BacktestConfig
from .config import (
    ANNEAL_DEFAULTS,
    BACKTEST_DEFAULTS,
    DEFAULT_TICKERS,
    ESTIMATOR_DEFAULTS,
    FIGURE_KINDS,
    OUTPUT_DIR,
    SOLVER_DEFAULTS,
)
from .errors import ConfigError
from .expected_stats import EstimatorConfig, ExpectedStats
from .logger import logger
from .optimizers import AnnealSchedule, SolverSettings, WeightBounds
from .portfolio import PortfolioObjective, PortfolioResult, build_portfolio
from .utils import annual_to_period_return, annual_to_period_volatility, derive_seed, validate_objective_kind


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EstimatorSection(_Strict):
    mode: str = ESTIMATOR_DEFAULTS["mode"]
    window_length: Optional[int] = ESTIMATOR_DEFAULTS["window_length"]
    sample_count: int = ESTIMATOR_DEFAULTS["sample_count"]
    half_life: Optional[float] = ESTIMATOR_DEFAULTS["half_life"]


class BoundsSection(_Strict):
    lower: float = BACKTEST_DEFAULTS["lower_bound"]
    upper: float = BACKTEST_DEFAULTS["upper_bound"]


class SolverSection(_Strict):
    tolerance: float = SOLVER_DEFAULTS["tolerance"]
    max_iterations: int = SOLVER_DEFAULTS["max_iterations"]
    penalty_growth: float = SOLVER_DEFAULTS["penalty_growth"]
    frontier_points: int = SOLVER_DEFAULTS["frontier_points"]


class AnnealSection(_Strict):
    sweeps: int = ANNEAL_DEFAULTS["sweeps"]
    restarts: int = ANNEAL_DEFAULTS["restarts"]
    beta_initial: Optional[float] = ANNEAL_DEFAULTS["beta_initial"]
    beta_final: Optional[float] = ANNEAL_DEFAULTS["beta_final"]


class ObjectiveSection(_Strict):
    """One objective; omitted parameters take the scenario defaults."""

    kind: str
    market_caps: Optional[List[float]] = None
    target_return: Optional[float] = None
    target_volatility: Optional[float] = None
    risk_free_rate: Optional[float] = None
    risk_aversion: Optional[float] = None

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        return validate_objective_kind(value)


class BacktestSection(_Strict):
    train_periods: int = BACKTEST_DEFAULTS["train_periods"]
    test_periods: int = BACKTEST_DEFAULTS["test_periods"]
    step_periods: Optional[int] = None
    threads: int = 1


def _default_objectives() -> List[ObjectiveSection]:
    return [ObjectiveSection(kind=k) for k in ("EWP", "MVP", "MRP", "MSRP", "MOP", "BMOP")]


class RunConfig(_Strict):
    prices: str
    tickers: List[str] = Field(default_factory=lambda: list(DEFAULT_TICKERS))
    start_date: Optional[date] = None
    end_date: Optional[date] = None
    risk_free_rate: float = BACKTEST_DEFAULTS["risk_free_rate"]
    seed: int = Field(default=ESTIMATOR_DEFAULTS["seed"], ge=0, lt=2 ** 64)
    output_dir: Optional[str] = None
    figures: List[str] = Field(default_factory=lambda: list(FIGURE_KINDS))
    estimator: EstimatorSection = Field(default_factory=EstimatorSection)
    bounds: BoundsSection = Field(default_factory=BoundsSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    anneal: AnnealSection = Field(default_factory=AnnealSection)
    objectives: List[ObjectiveSection] = Field(default_factory=_default_objectives)
    backtest: BacktestSection = Field(default_factory=BacktestSection)

    base_dir: Path = Field(default=Path("."), exclude=True)

    @field_validator("tickers")
    @classmethod
    def _tickers(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one ticker is required")
        if len(set(value)) != len(value):
            raise ValueError("tickers must be unique")
        return value

    @field_validator("figures")
    @classmethod
    def _figures(cls, value: List[str]) -> List[str]:
        unknown = [f for f in value if f not in FIGURE_KINDS]
        if unknown:
            raise ValueError(f"unknown figure kind(s) {', '.join(unknown)}")
        return value

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Union[str, Path] = ".") -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        if "base_dir" in data:
            raise ConfigError("extra inputs are not permitted", "base_dir")
        try:
            return cls(**data, base_dir=Path(base_dir))
        except ValidationError as e:
            error = e.errors()[0]
            key_path = ".".join(str(part) for part in error["loc"])
            raise ConfigError(error["msg"], key_path) from e

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
        config = cls.from_dict(data, base_dir=path.resolve().parent)
        if not config.prices_path.is_file():
            raise ConfigError(f"price file not found: {config.prices_path}", "prices")
        return config

    def resolve(self, value: Union[str, Path]) -> Path:
        candidate = Path(value)
        return candidate if candidate.is_absolute() else self.base_dir / candidate

    @property
    def prices_path(self) -> Path:
        return self.resolve(self.prices)

    @property
    def output_path(self) -> Path:
        return self.resolve(self.output_dir) if self.output_dir else OUTPUT_DIR

    def with_seed(self, seed: int) -> "RunConfig":
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        return self.model_copy(update={"seed": seed})

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(mode=self.estimator.mode, window_length=self.estimator.window_length,
                               sample_count=self.estimator.sample_count, half_life=self.estimator.half_life,
                               seed=self.seed)

    def weight_bounds(self) -> WeightBounds:
        return WeightBounds(self.bounds.lower, self.bounds.upper)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(**self.solver.model_dump())

    def anneal_schedule(self) -> AnnealSchedule:
        return AnnealSchedule(**self.anneal.model_dump(), seed=self.seed)

    @property
    def period_risk_free_rate(self) -> float:
        return annual_to_period_return(self.risk_free_rate)

    def portfolio_objectives(self) -> Tuple[PortfolioObjective, ...]:
        """Objectives in per-period units."""
        objectives = []
        for k, section in enumerate(self.objectives):
            target_return = section.target_return if section.target_return is not None \
                else BACKTEST_DEFAULTS["target_return"]
            target_volatility = section.target_volatility if section.target_volatility is not None \
                else BACKTEST_DEFAULTS["target_volatility"]
            risk_free_rate = section.risk_free_rate if section.risk_free_rate is not None else self.risk_free_rate
            risk_aversion = section.risk_aversion if section.risk_aversion is not None \
                else BACKTEST_DEFAULTS["risk_aversion"]
            if section.kind == "MCP" and section.market_caps is not None \
                    and len(section.market_caps) != len(self.tickers):
                raise ConfigError(f"{len(section.market_caps)} market caps for {len(self.tickers)} tickers",
                                  f"objectives.{k}.market_caps")
            objectives.append(PortfolioObjective(
                kind=section.kind,
                market_caps=tuple(section.market_caps) if section.market_caps is not None else None,
                target_return=annual_to_period_return(target_return),
                target_volatility=annual_to_period_volatility(target_volatility),
                risk_free_rate=annual_to_period_return(risk_free_rate),
                risk_aversion=risk_aversion,
            ))
        labels = [o.label for o in objectives]
        if len(set(labels)) != len(labels):
            raise ConfigError("each objective kind may appear once", "objectives")
        return tuple(objectives)

    def backtest_config(self) -> BacktestConfig:
        return BacktestConfig(
            objectives=self.portfolio_objectives(),
            start_date=self.start_date,
            end_date=self.end_date,
            train_periods=self.backtest.train_periods,
            test_periods=self.backtest.test_periods,
            step_periods=self.backtest.step_periods,
            estimator=self.estimator_config(),
            bounds=self.weight_bounds(),
            settings=self.solver_settings(),
            schedule=self.anneal_schedule(),
            risk_free_rate=self.period_risk_free_rate,
            seed=self.seed,
            threads=self.backtest.threads,
        )

    def build_portfolios(self, stats: ExpectedStats) -> List[PortfolioResult]:
        """Every configured objective on one set of statistics; BMOP seeds fan out per objective."""
        bounds, settings, schedule = self.weight_bounds(), self.solver_settings(), self.anneal_schedule()
        results = []
        for k, objective in enumerate(self.portfolio_objectives()):
            seeded = replace(schedule, seed=derive_seed(self.seed, k))
            results.append(build_portfolio(objective, stats, bounds, settings, seeded, self.period_risk_free_rate))
            logger.info(f"Solved {objective.label}")
        return results

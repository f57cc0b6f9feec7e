from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from ..config import BACKTEST_DEFAULTS, SOLVER_DEFAULTS
from ..errors import ConfigError, InfeasibleBoundsError

SUM_TOLERANCE = 1e-8
BOUND_TOLERANCE = 1e-9


@dataclass(frozen=True)
class WeightBounds:
    """Per-asset box [lower, upper] applied to every weight."""

    lower: float = BACKTEST_DEFAULTS["lower_bound"]
    upper: float = BACKTEST_DEFAULTS["upper_bound"]

    def __post_init__(self):
        if not 0.0 <= self.lower < 1.0:
            raise InfeasibleBoundsError(f"lower bound {self.lower} must lie in [0, 1)")
        if not 0.0 < self.upper <= 1.0:
            raise InfeasibleBoundsError(f"upper bound {self.upper} must lie in (0, 1]")
        if not self.lower < self.upper:
            raise InfeasibleBoundsError(f"lower bound {self.lower} must be below upper bound {self.upper}")

    def is_feasible(self, n: int) -> bool:
        """Whether the simplex meets the box for n assets."""
        return n * self.lower <= 1.0 + 1e-12 and n * self.upper >= 1.0 - 1e-12

    def check(self, n: int) -> None:
        if not self.is_feasible(n):
            raise InfeasibleBoundsError(
                f"bounds [{self.lower}, {self.upper}] leave no fully invested portfolio for {n} assets")


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = SOLVER_DEFAULTS["tolerance"]
    max_iterations: int = SOLVER_DEFAULTS["max_iterations"]
    penalty_growth: float = SOLVER_DEFAULTS["penalty_growth"]
    frontier_points: int = SOLVER_DEFAULTS["frontier_points"]

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError("must be positive", "solver.tolerance")
        if self.max_iterations < 1:
            raise ConfigError("must be positive", "solver.max_iterations")
        if not self.penalty_growth > 1:
            raise ConfigError("must be greater than 1", "solver.penalty_growth")
        if self.frontier_points < 1:
            raise ConfigError("must be positive", "solver.frontier_points")


@dataclass(frozen=True, eq=False)
class Weights:
    """Long-only allocation over ``tickers`` plus the annotations of whoever built it."""

    tickers: Tuple[str, ...]
    values: np.ndarray
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != len(self.tickers):
            raise ValueError(f"{values.size} weights for {len(self.tickers)} tickers")
        values.setflags(write=False)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flags", tuple(self.flags))

    def with_flags(self, *flags: str) -> "Weights":
        merged = list(self.flags)
        merged.extend(f for f in flags if f not in merged)
        return Weights(self.tickers, self.values, tuple(merged))

    def violations(self, bounds: WeightBounds = None) -> Sequence[str]:
        """Human-readable list of broken invariants (empty when valid)."""
        problems = []
        total = float(self.values.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            problems.append(f"weights sum to {total!r}")
        if np.any(self.values < -BOUND_TOLERANCE):
            problems.append("negative weight")
        if bounds is not None:
            if np.any(self.values < bounds.lower - BOUND_TOLERANCE):
                problems.append(f"weight below lower bound {bounds.lower}")
            if np.any(self.values > bounds.upper + BOUND_TOLERANCE):
                problems.append(f"weight above upper bound {bounds.upper}")
        return problems

    def as_dict(self) -> Dict[str, float]:
        return {t: float(v) for t, v in zip(self.tickers, self.values)}

"""Real-weight mean-variance solvers over the simplex with box bounds.

All problems are solved with the same projected-gradient loop: fixed step 1/L,
momentum with gradient-based restart, and the exact projection onto
{sum(w) = 1, lower <= w <= upper}. The return floor of MVP and the variance
cap of MRP enter through an augmented quadratic penalty whose weight grows by
``penalty_growth`` each outer round (at most ``PENALTY_ROUNDS`` rounds). Any
violation left after the last round is removed by the smallest convex step
towards an anchor portfolio that satisfies the constraint, so returned weights
are always feasible.

Infeasible targets never raise: MVP falls back to the bounded max-return
portfolio and MRP to the global minimum-variance portfolio, both flagged.
"""

from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import PENALTY_ROUNDS, ZERO_VOLATILITY_TOL
from ..errors import DegeneratePortfolioError
from ..expected_stats import ExpectedStats, ridge_repair
from ..logger import logger
from .projection import project_to_feasible
from .weights import SolverSettings, WeightBounds, Weights

RETURN_INFEASIBLE = "return-infeasible"
VOLATILITY_INFEASIBLE = "volatility-infeasible"
RIDGE_REPAIRED = "ridge-repaired"
BOUNDS_RELAXED = "bounds-relaxed"
NO_EXCESS_RETURN = "no-excess-return"


def _largest_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[-1])


def _prepare(stats: ExpectedStats, bounds: WeightBounds) -> Tuple[ExpectedStats, Tuple[str, ...]]:
    """Validate inputs and swap in a ridge-repaired covariance when singular."""
    stats.check_finite()
    if stats.size > 1:
        bounds.check(stats.size)
    if stats.size > 1 and stats.is_singular():
        repaired = ridge_repair(stats)
        return repaired, (RIDGE_REPAIRED,)
    return stats, ()


def _single_asset(stats: ExpectedStats, bounds: WeightBounds) -> Weights:
    flags = (BOUNDS_RELAXED,) if bounds.upper < 1.0 else ()
    return Weights(stats.tickers, [1.0], flags)


def _projected_gradient(gradient: Callable[[np.ndarray], np.ndarray], lipschitz: np.ndarray,
                        start: np.ndarray, bounds: WeightBounds, settings: SolverSettings) -> np.ndarray:
    """Minimize K independent smooth problems, one per row of ``start``."""
    w = project_to_feasible(np.atleast_2d(start), bounds.lower, bounds.upper)
    step = 1.0 / np.maximum(np.asarray(lipschitz, dtype=float), 1e-12)[:, None]
    y = w.copy()
    momentum = np.ones(w.shape[0])
    done = np.zeros(w.shape[0], dtype=bool)
    for _ in range(settings.max_iterations):
        w_next = project_to_feasible(y - step * gradient(y), bounds.lower, bounds.upper)
        w_next[done] = w[done]
        residual = np.abs(w_next - y).max(axis=1)
        uphill = np.einsum("ij,ij->i", y - w_next, w_next - w) > 0
        momentum_next = (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2)) / 2.0
        beta = np.where(uphill, 0.0, (momentum - 1.0) / momentum_next)
        momentum = np.where(uphill, 1.0, momentum_next)
        y = w_next + beta[:, None] * (w_next - w)
        w = w_next
        done |= residual <= settings.tolerance
        y[done] = w[done]
        if done.all():
            break
    return w


def _variance(w: np.ndarray, cov: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", np.atleast_2d(w), cov, np.atleast_2d(w))


def max_return_portfolio(stats: ExpectedStats, bounds: WeightBounds) -> Weights:
    """Bounded maximum-return vertex: fill the highest-mean assets up to the upper bound."""
    n = stats.size
    if n == 1:
        return _single_asset(stats, bounds)
    bounds.check(n)
    w = np.full(n, bounds.lower)
    remaining = 1.0 - n * bounds.lower
    for i in np.argsort(-stats.mean, kind="stable"):
        add = min(bounds.upper - bounds.lower, remaining)
        w[i] += add
        remaining -= add
        if remaining <= 0:
            break
    return Weights(stats.tickers, w)


def _gmv_values(stats: ExpectedStats, bounds: WeightBounds, settings: SolverSettings) -> np.ndarray:
    cov = stats.covariance
    lipschitz = np.array([2.0 * _largest_eigenvalue(cov)])
    start = np.full((1, stats.size), 1.0 / stats.size)
    return _projected_gradient(lambda w: 2.0 * w @ cov, lipschitz, start, bounds, settings)[0]


def global_min_variance(stats: ExpectedStats, bounds: WeightBounds, settings: SolverSettings) -> Weights:
    """Minimum-variance portfolio with no return requirement."""
    if stats.size == 1:
        return _single_asset(stats, bounds)
    work, flags = _prepare(stats, bounds)
    return Weights(stats.tickers, _gmv_values(work, bounds, settings), flags)


def _return_floor_rows(cov: np.ndarray, mean: np.ndarray, targets: np.ndarray, start: np.ndarray,
                       anchor: np.ndarray, bounds: WeightBounds, settings: SolverSettings) -> np.ndarray:
    """min w'Cw subject to w'r >= target, one row per target."""
    span = max(float(mean.max() - mean.min()), 1e-300)
    scaled = mean / span
    curvature = max(2.0 * _largest_eigenvalue(cov), 1e-300)
    rho = np.full(targets.size, curvature)
    multiplier = np.zeros(targets.size)
    w = start
    for round_index in range(PENALTY_ROUNDS):
        def gradient(x, rho=rho, multiplier=multiplier):
            violation = (targets - x @ mean) / span
            pull = np.maximum(0.0, multiplier + rho * violation)
            return 2.0 * x @ cov - pull[:, None] * scaled[None, :]

        lipschitz = curvature + rho * float(scaled @ scaled)
        w = _projected_gradient(gradient, lipschitz, w, bounds, settings)
        violation = (targets - w @ mean) / span
        multiplier = np.maximum(0.0, multiplier + rho * violation)
        if np.all(violation <= settings.tolerance * 1e-3):
            break
        rho = rho * settings.penalty_growth
    logger.debug(f"Return-floor penalty finished after {round_index + 1} round(s)")

    # remove leftover violation by stepping towards the max-return anchor
    shortfall = targets - w @ mean
    gain = anchor @ mean - w @ mean
    mix = np.where((shortfall > 0) & (gain > 0), np.clip(shortfall / np.where(gain > 0, gain, 1.0), 0.0, 1.0), 0.0)
    return w + mix[:, None] * (anchor[None, :] - w)


def solve_mvp_batch(stats: ExpectedStats, targets: Sequence[float], bounds: WeightBounds,
                    settings: SolverSettings) -> List[Weights]:
    """MVP for several return floors at once (frontier sweeps)."""
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if stats.size == 1:
        single = _single_asset(stats, bounds)
        return [single.with_flags(RETURN_INFEASIBLE) if t > stats.mean[0] else single for t in targets]

    work, base_flags = _prepare(stats, bounds)
    cov, mean = work.covariance, work.mean
    gmv = _gmv_values(work, bounds, settings)
    top = max_return_portfolio(work, bounds).values
    gmv_return, top_return = float(gmv @ mean), float(top @ mean)
    slack = 1e-12 * max(float(np.abs(mean).max()), 1e-300)

    results: List[Optional[Weights]] = [None] * targets.size
    pending = []
    for k, target in enumerate(targets):
        if target <= gmv_return + slack:
            results[k] = Weights(stats.tickers, gmv, base_flags)
        elif target >= top_return - slack:
            flags = base_flags + ((RETURN_INFEASIBLE,) if target > top_return + slack else ())
            if RETURN_INFEASIBLE in flags:
                logger.warning(f"Target return {target:.6g} exceeds the bounded maximum {top_return:.6g}")
            results[k] = Weights(stats.tickers, top, flags)
        else:
            pending.append(k)

    if pending:
        rows = np.asarray(pending)
        goals = targets[rows]
        # feasible warm start on the segment between the two anchors
        mix = (goals - gmv_return) / (top_return - gmv_return)
        start = gmv[None, :] + mix[:, None] * (top - gmv)[None, :]
        solved = _return_floor_rows(cov, mean, goals, start, top, bounds, settings)
        for k, w in zip(pending, solved):
            results[k] = Weights(stats.tickers, w, base_flags)
    return results


def solve_mvp(stats: ExpectedStats, target_return: float, bounds: WeightBounds,
              settings: SolverSettings) -> Weights:
    """Minimize w'Σw subject to w'r >= R on the bounded simplex."""
    return solve_mvp_batch(stats, [target_return], bounds, settings)[0]


def solve_mrp(stats: ExpectedStats, target_volatility: float, bounds: WeightBounds,
              settings: SolverSettings) -> Weights:
    """Maximize w'r subject to w'Σw <= V² on the bounded simplex."""
    if not target_volatility > 0:
        raise ValueError("target volatility must be positive")
    if stats.size == 1:
        return _single_asset(stats, bounds)

    work, flags = _prepare(stats, bounds)
    cov, mean = work.covariance, work.mean
    cap = target_volatility ** 2
    top = max_return_portfolio(work, bounds).values
    if _variance(top, cov)[0] <= cap:
        return Weights(stats.tickers, top, flags)
    gmv = _gmv_values(work, bounds, settings)
    if _variance(gmv, cov)[0] > cap:
        logger.warning(f"Target volatility {target_volatility:.6g} is below the minimum attainable volatility")
        return Weights(stats.tickers, gmv, flags + (VOLATILITY_INFEASIBLE,))

    scale = max(float(np.abs(mean).max()), 1e-300)
    linear = -mean / scale
    ratio = _largest_eigenvalue(cov) / cap
    rho, multiplier = 1.0, 0.0
    w = gmv[None, :]
    for round_index in range(PENALTY_ROUNDS):
        def gradient(x, rho=rho, multiplier=multiplier):
            excess = (_variance(x, cov) - cap) / cap
            pull = np.maximum(0.0, multiplier + rho * excess)
            return linear[None, :] + pull[:, None] * (2.0 * x @ cov) / cap

        lipschitz = np.array([6.0 * rho * ratio ** 2 + 2.0 * ratio * multiplier])
        w = _projected_gradient(gradient, lipschitz, w, bounds, settings)
        excess = float((_variance(w, cov)[0] - cap) / cap)
        multiplier = max(0.0, multiplier + rho * excess)
        if excess <= settings.tolerance * 1e-3:
            break
        rho *= settings.penalty_growth
    logger.debug(f"Variance-cap penalty finished after {round_index + 1} round(s)")

    w = w[0]
    if _variance(w, cov)[0] > cap:
        # largest s in [0, 1] with var(gmv + s (w - gmv)) <= cap
        d = w - gmv
        a = float(d @ cov @ d)
        b = float(d @ cov @ gmv)
        c = float(gmv @ cov @ gmv) - cap
        s = (-b + np.sqrt(max(b * b - a * c, 0.0))) / a if a > 0 else 1.0
        w = gmv + min(max(s, 0.0), 1.0) * d
    return Weights(stats.tickers, w, flags)


def solve_mop(stats: ExpectedStats, risk_aversion: float, bounds: WeightBounds,
              settings: SolverSettings) -> Weights:
    """Minimize w'Σw - λ w'r on the bounded simplex."""
    if not risk_aversion > 0:
        raise ValueError("risk aversion must be positive")
    if stats.size == 1:
        return _single_asset(stats, bounds)
    work, flags = _prepare(stats, bounds)
    cov, mean = work.covariance, work.mean
    lipschitz = np.array([2.0 * _largest_eigenvalue(cov)])
    start = np.full((1, stats.size), 1.0 / stats.size)
    w = _projected_gradient(lambda x: 2.0 * x @ cov - risk_aversion * mean[None, :], lipschitz, start,
                            bounds, settings)[0]
    return Weights(stats.tickers, w, flags)


def frontier_weights(stats: ExpectedStats, bounds: WeightBounds, settings: SolverSettings,
                     points: int) -> Tuple[np.ndarray, List[Weights]]:
    """Targets swept uniformly from the GMV return to the bounded maximum return, with MVP weights."""
    if stats.size == 1:
        single = _single_asset(stats, bounds)
        return np.full(points, stats.mean[0]), [single] * points
    work, _ = _prepare(stats, bounds)
    low = float(_gmv_values(work, bounds, settings) @ work.mean)
    high = float(max_return_portfolio(work, bounds).values @ work.mean)
    targets = np.linspace(low, high, points)
    return targets, solve_mvp_batch(stats, targets, bounds, settings)


def _sharpe_candidates(stats: ExpectedStats, candidates: List[Weights], risk_free_rate: float):
    rows = np.vstack([c.values for c in candidates])
    returns = rows @ stats.mean
    vols = np.sqrt(np.clip(_variance(rows, stats.covariance), 0.0, None))
    if np.any((vols <= ZERO_VOLATILITY_TOL) & (returns > risk_free_rate)):
        raise DegeneratePortfolioError("a zero-variance portfolio makes the Sharpe ratio undefined")
    sharpe = np.where(vols > ZERO_VOLATILITY_TOL, (returns - risk_free_rate) / np.where(vols > 0, vols, 1.0),
                      -np.inf)
    return sharpe, vols


def _best_sharpe(candidates: List[Weights], sharpe: np.ndarray, vols: np.ndarray) -> int:
    """Argmax of Sharpe; ties go to lower volatility, then the lexicographically smallest weights."""
    best = sharpe.max()
    tied = [i for i in range(len(candidates)) if sharpe[i] == best]
    return min(tied, key=lambda i: (vols[i], tuple(candidates[i].values)))


def solve_msrp(stats: ExpectedStats, risk_free_rate: float, bounds: WeightBounds,
               settings: SolverSettings) -> Weights:
    """Maximum Sharpe ratio over the MVP frontier."""
    if stats.size == 1:
        stats.check_finite()
        vol = float(np.sqrt(max(stats.covariance[0, 0], 0.0)))
        if vol <= ZERO_VOLATILITY_TOL:
            raise DegeneratePortfolioError("single asset with zero variance has no Sharpe ratio")
        return _single_asset(stats, bounds)
    if not np.any(stats.mean > risk_free_rate):
        logger.warning("No asset beats the risk-free rate; returning the minimum-variance portfolio")
        return global_min_variance(stats, bounds, settings).with_flags(NO_EXCESS_RETURN)

    points = max(settings.frontier_points, 2)
    targets, candidates = frontier_weights(stats, bounds, settings, points)
    sharpe, vols = _sharpe_candidates(stats, candidates, risk_free_rate)
    k = _best_sharpe(candidates, sharpe, vols)

    # second, finer sweep between the neighbours of the coarse maximum
    low, high = targets[max(k - 1, 0)], targets[min(k + 1, points - 1)]
    if high > low:
        refined = solve_mvp_batch(stats, np.linspace(low, high, points), bounds, settings)
        candidates = candidates + refined
        sharpe, vols = _sharpe_candidates(stats, candidates, risk_free_rate)
        k = _best_sharpe(candidates, sharpe, vols)
    return candidates[k]

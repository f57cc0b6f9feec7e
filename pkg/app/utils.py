import math
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .config import OBJECTIVE_KINDS, SUPPORTED_COMMANDS, TRADING_PERIODS_PER_YEAR


def validate_command(command: str) -> bool:
    """Validate if the CLI command is supported."""
    return command in SUPPORTED_COMMANDS


def validate_objective_kind(kind: str) -> str:
    """Normalize an objective name; raises ValueError for unknown kinds."""
    normalized = kind.strip().upper()
    if normalized not in OBJECTIVE_KINDS:
        raise ValueError(f"unknown objective '{kind}', expected one of {', '.join(OBJECTIVE_KINDS)}")
    return normalized


def annual_to_period_return(annual: float, periods: int = TRADING_PERIODS_PER_YEAR) -> float:
    """Arithmetic conversion of an annual return to a per-period return."""
    return annual / periods


def annual_to_period_volatility(annual: float, periods: int = TRADING_PERIODS_PER_YEAR) -> float:
    """Square-root-of-time conversion of an annual volatility."""
    return annual / math.sqrt(periods)


def period_to_annual_return(per_period: float, periods: int = TRADING_PERIODS_PER_YEAR) -> float:
    return per_period * periods


def period_to_annual_volatility(per_period: float, periods: int = TRADING_PERIODS_PER_YEAR) -> float:
    return per_period * math.sqrt(periods)


def derive_seed(seed: int, *indices: int) -> int:
    """Derive an independent 64-bit seed for a (seed, index...) stream."""
    sequence = np.random.SeedSequence([int(seed), *[int(i) for i in indices]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *indices: int) -> np.random.Generator:
    """PCG64 generator for the (seed, index...) stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *[int(i) for i in indices]])))


def nearest_rank(sorted_values: Sequence[float], fraction: float) -> float:
    """Nearest-rank percentile of already sorted values."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("nearest_rank of empty sequence")
    # guard against 0.25 * 4 evaluating to 1.0000000000000002
    rank = math.ceil(round(fraction * n, 9))
    return float(sorted_values[min(max(rank, 1), n) - 1])


def box_statistics(values: Iterable[float]) -> Dict[str, float]:
    """Min, quartiles, median and max under the nearest-rank convention."""
    ordered = np.sort(np.asarray(list(values), dtype=float))
    if ordered.size == 0:
        raise ValueError("box statistics of an empty series")
    return {
        "min": float(ordered[0]),
        "q1": nearest_rank(ordered, 0.25),
        "median": nearest_rank(ordered, 0.5),
        "q3": nearest_rank(ordered, 0.75),
        "max": float(ordered[-1]),
    }


def symlog(value: float, linear_threshold: float) -> float:
    """Symmetric log transform: linear inside the threshold, logarithmic outside."""
    magnitude = abs(value)
    if magnitude <= linear_threshold:
        return value / linear_threshold
    return math.copysign(1.0 + math.log10(magnitude / linear_threshold), value)


def format_flags(flags: Iterable[str]) -> str:
    """Stable, CSV-safe rendering of solver annotations."""
    return ";".join(sorted(set(flags)))


def dedupe(items: Iterable[str]) -> List[str]:
    """Order-preserving de-duplication."""
    seen = set()
    result = []
    for item in items:
        if item not in seen:
            seen.add(item)
            result.append(item)
    return result

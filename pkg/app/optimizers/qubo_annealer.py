"""Binary mean-variance selection as a QUBO, solved by simulated annealing.

The energy of a bit vector x under an upper-triangular model U is

    E(x) = sum_i U_ii x_i + sum_{i<j} U_ij x_i x_j = x' U x

since x_i * x_i = x_i for binary x. The mean-variance selection objective
``x' Σ x - λ r'x`` sums the covariance over ordered pairs, so the quadratic
coefficient of an unordered pair is 2σ_ij and the diagonal absorbs σ_ii.

Annealing is single-flip Metropolis, all restarts advanced together with
numpy. Each restart draws its own random numbers from the ``(seed, restart)``
stream, so the result does not depend on how many restarts run side by side.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ..config import ANNEAL_DEFAULTS, EXHAUSTIVE_MAX_SIZE
from ..errors import ConfigError, DimensionMismatchError, MalformedRowError, NonFiniteStatsError, QuboSizeError
from ..expected_stats import ExpectedStats
from ..logger import logger
from ..utils import make_rng
from .weights import Weights

ZERO_SELECTION_FALLBACK = "zero-selection-fallback"
ENUMERATION_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class QuboModel:
    """Upper-triangular QUBO coefficients; any lower-triangular input is folded onto the upper half."""

    coefficients: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.array(self.coefficients, dtype=float))
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionMismatchError(f"QUBO matrix must be square, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise NonFiniteStatsError("QUBO coefficients must be finite")
        upper = np.triu(q) + np.triu(np.tril(q, -1).T, 1)
        upper.setflags(write=False)
        object.__setattr__(self, "coefficients", upper)

    @property
    def size(self) -> int:
        return self.coefficients.shape[0]

    @property
    def linear(self) -> np.ndarray:
        return np.diag(self.coefficients)

    @property
    def coupling(self) -> np.ndarray:
        """Symmetric off-diagonal couplings with a zero diagonal."""
        off = np.triu(self.coefficients, 1)
        return off + off.T

    def to_text(self) -> str:
        lines = [str(self.size)]
        rows, cols = np.nonzero(self.coefficients)
        for i, j in zip(rows, cols):
            lines.append(f"{i} {j} {self.coefficients[i, j]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QuboModel":
        lines = text.splitlines()
        if not lines or not lines[0].strip().isdigit():
            raise MalformedRowError("first line must be the model size", 1)
        size = int(lines[0])
        q = np.zeros((size, size))
        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            try:
                i, j, value = int(parts[0]), int(parts[1]), float(parts[2])
            except (IndexError, ValueError):
                raise MalformedRowError(f"expected 'i j value', got '{line}'", number)
            if len(parts) != 3 or not (0 <= i <= j < size):
                raise MalformedRowError(f"invalid coefficient entry '{line}'", number)
            q[i, j] = value
        return cls(q)


@dataclass(frozen=True, eq=False)
class BinarySelection:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits).reshape(-1)
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("selection bits must be 0 or 1")
        bits = bits.astype(np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def selected_count(self) -> int:
        return int(self.bits.sum())

    def as_tuple(self) -> Tuple[int, ...]:
        return tuple(int(b) for b in self.bits)


@dataclass(frozen=True)
class AnnealSchedule:
    sweeps: int = ANNEAL_DEFAULTS["sweeps"]
    restarts: int = ANNEAL_DEFAULTS["restarts"]
    beta_initial: Optional[float] = ANNEAL_DEFAULTS["beta_initial"]
    beta_final: Optional[float] = ANNEAL_DEFAULTS["beta_final"]
    seed: int = ANNEAL_DEFAULTS["seed"]

    def __post_init__(self):
        if self.sweeps < 1:
            raise ConfigError("must be >= 1", "anneal.sweeps")
        if self.restarts < 1:
            raise ConfigError("must be >= 1", "anneal.restarts")
        for key in ("beta_initial", "beta_final"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ConfigError("must be positive", f"anneal.{key}")
        if self.beta_initial is not None and self.beta_final is not None and not self.beta_final > self.beta_initial:
            raise ConfigError("must be greater than beta_initial", "anneal.beta_final")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "anneal.seed")

    def betas(self, model: QuboModel) -> np.ndarray:
        """Geometric inverse-temperature ladder, one value per sweep."""
        auto_initial, auto_final = default_beta_range(model)
        initial = self.beta_initial if self.beta_initial is not None else auto_initial
        final = self.beta_final if self.beta_final is not None else auto_final
        if final <= initial:
            final = 100.0 * initial
        return np.geomspace(initial, final, self.sweeps)


def default_beta_range(model: QuboModel) -> Tuple[float, float]:
    """(1 / largest single-flip |ΔE|, 100 / smallest nonzero coefficient magnitude)."""
    largest = float(np.max(np.abs(model.linear) + np.abs(model.coupling).sum(axis=1)))
    if largest == 0.0:
        return 1.0, 100.0
    magnitudes = np.abs(model.coefficients[model.coefficients != 0])
    smallest = max(float(magnitudes.min()), 1e-9 * largest)
    return 1.0 / largest, 100.0 / smallest


def build_bmop(stats: ExpectedStats, risk_aversion: float = 1.0) -> QuboModel:
    """QUBO of min x'Σx - λ r'x over binary selections."""
    if risk_aversion < 0:
        raise ValueError("risk aversion must be non-negative")
    stats.check_finite()
    cov = np.asarray(stats.covariance)
    q = np.triu(2.0 * cov, 1)
    q[np.diag_indices(stats.size)] = -risk_aversion * stats.mean + np.diag(cov)
    return QuboModel(q)


def _as_bits(model: QuboModel, x) -> np.ndarray:
    bits = x.bits if isinstance(x, BinarySelection) else np.asarray(x)
    if bits.shape[-1] != model.size:
        raise DimensionMismatchError(f"selection of size {bits.shape[-1]} for a model of size {model.size}")
    return bits.astype(float)


def energy(model: QuboModel, x) -> float:
    bits = _as_bits(model, x).reshape(-1)
    return float(bits @ model.coefficients @ bits)


def energies(model: QuboModel, states: np.ndarray) -> np.ndarray:
    """Energies of the rows of a K x N bit matrix."""
    bits = np.atleast_2d(_as_bits(model, states))
    return np.einsum("ki,ij,kj->k", bits, model.coefficients, bits)


def _greedy_descent(model: QuboModel, bits: np.ndarray) -> np.ndarray:
    """Flip the most improving bit until no single flip lowers the energy.

    Once no flip improves, selected bits whose removal leaves the energy
    unchanged are cleared, so equal-energy states resolve to fewer assets.
    """
    x = bits.astype(float).copy()
    coupling, linear = model.coupling, model.linear
    field = linear + coupling @ x
    tolerance = 1e-15 * max(float(np.abs(model.coefficients).max()), 1e-300)
    for _ in range(4 * model.size * model.size + 1):
        delta = (1.0 - 2.0 * x) * field
        i = int(np.argmin(delta))
        if delta[i] >= -tolerance:
            free = np.flatnonzero((x == 1.0) & (delta <= tolerance))
            if free.size == 0:
                break
            i = int(free[0])
        step = 1.0 - 2.0 * x[i]
        x[i] += step
        field += step * coupling[:, i]
    return x


def anneal(model: QuboModel, schedule: Optional[AnnealSchedule] = None) -> BinarySelection:
    """Lowest-energy state seen across all restarts, after greedy clean-up."""
    schedule = schedule or AnnealSchedule()
    n, restarts, sweeps = model.size, schedule.restarts, schedule.sweeps
    betas = schedule.betas(model)
    coupling, linear = model.coupling, model.linear

    # per-restart streams: initial bits, then visiting orders, then acceptance draws
    states = np.empty((restarts, n))
    orders = np.empty((restarts, sweeps, n), dtype=np.intp)
    thresholds = np.empty((restarts, sweeps, n))
    for r in range(restarts):
        rng = make_rng(schedule.seed, r)
        states[r] = rng.integers(0, 2, size=n)
        orders[r] = np.argsort(rng.random((sweeps, n)), axis=1)
        # accepting when ΔE <= -log(1 - u) / β is Metropolis acceptance with probability min(1, exp(-βΔE))
        thresholds[r] = -np.log1p(-rng.random((sweeps, n))) / betas[:, None]

    rows = np.arange(restarts)
    fields = linear[None, :] + states @ coupling
    current = energies(model, states)
    best_states = states.copy()
    best = current.copy()
    for s in range(sweeps):
        for t in range(n):
            idx = orders[:, s, t]
            step = 1.0 - 2.0 * states[rows, idx]
            delta = step * fields[rows, idx]
            accept = delta <= thresholds[:, s, t]
            if not accept.any():
                continue
            step = np.where(accept, step, 0.0)
            states[rows, idx] += step
            fields += step[:, None] * coupling[idx]
            current += np.where(accept, delta, 0.0)
            improved = current < best
            if improved.any():
                best[improved] = current[improved]
                best_states[improved] = states[improved]

    # the empty selection is always a candidate, and wins ties
    winner = np.zeros(n)
    winner_energy = 0.0
    for r in range(restarts):
        candidate = _greedy_descent(model, best_states[r])
        candidate_energy = energy(model, candidate)
        if candidate_energy < winner_energy:
            winner, winner_energy = candidate, candidate_energy
    logger.debug(f"Annealed {n}-variable QUBO: {restarts} restart(s) x {sweeps} sweep(s), energy {winner_energy:.6g}")
    return BinarySelection(np.rint(winner))


def exhaustive_min(model: QuboModel) -> BinarySelection:
    """Global minimizer by enumeration; ties go to the smallest big-endian bit pattern."""
    n = model.size
    if n > EXHAUSTIVE_MAX_SIZE:
        raise QuboSizeError(f"exhaustive search supports at most {EXHAUSTIVE_MAX_SIZE} variables, got {n}")
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    best_index, best_energy = 0, np.inf
    total = 1 << n
    for start in range(0, total, ENUMERATION_CHUNK):
        index = np.arange(start, min(start + ENUMERATION_CHUNK, total), dtype=np.int64)
        bits = ((index[:, None] >> shifts[None, :]) & 1).astype(float)
        chunk = energies(model, bits)
        k = int(np.argmin(chunk))
        if chunk[k] < best_energy:
            best_index, best_energy = int(index[k]), float(chunk[k])
    return BinarySelection([(best_index >> int(shift)) & 1 for shift in shifts])


def selection_to_weights(selection, tickers: Sequence[str]) -> Weights:
    """Equal weight 1/k over the k selected assets; all-zero falls back to 1/N, flagged."""
    bits = selection.bits if isinstance(selection, BinarySelection) else np.asarray(selection)
    tickers = tuple(tickers)
    if bits.size != len(tickers):
        raise DimensionMismatchError(f"{bits.size} bits for {len(tickers)} tickers")
    k = int(bits.sum())
    if k == 0:
        logger.warning("Annealer selected no assets; falling back to equal weights")
        return Weights(tickers, np.full(len(tickers), 1.0 / len(tickers)), (ZERO_SELECTION_FALLBACK,))
    return Weights(tickers, bits.astype(float) / k)


def permute_model(model: QuboModel, order: Iterable[int]) -> QuboModel:
    """Relabel variables: new variable a is old variable order[a]."""
    order = list(order)
    return QuboModel(model.coefficients[np.ix_(order, order)])

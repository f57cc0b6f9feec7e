"""Bundled synthetic price scenario.

Nine tickers with hand-picked daily return parameters, drawn as a seeded
multivariate normal on a business-day calendar. The scenario has one very
low-volatility asset, a ladder of assets trading volatility for return, and a
group of zero-drift noisy assets, so the different objectives separate clearly
out of sample.
"""

from datetime import date
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .config import DEFAULT_TICKERS
from .logger import logger
from .market_data import PriceTable
from .utils import make_rng

FIXTURE_SEED = 20151231
FIXTURE_PERIODS = 2000
FIXTURE_START = date(2015, 1, 2)

# daily (mean, volatility) per ticker
FIXTURE_PARAMETERS = {
    "IVV": (0.0030, 0.0060),
    "IJR": (0.0000, 0.0100),
    "ACWX": (0.0000, 0.0100),
    "IEMG": (0.0000, 0.0120),
    "REET": (0.0000, 0.0100),
    "IYR": (0.0000, 0.0100),
    "HYG": (0.0012, 0.0025),
    "AGG": (0.0001, 0.0010),
    "IAU": (0.0016, 0.0040),
}
FIXTURE_CORRELATIONS = {
    ("REET", "IYR"): 0.8,
    ("IJR", "ACWX"): 0.5,
}


def fixture_covariance(tickers: Sequence[str]) -> np.ndarray:
    vols = np.array([FIXTURE_PARAMETERS[t][1] for t in tickers])
    corr = np.eye(len(tickers))
    for (a, b), rho in FIXTURE_CORRELATIONS.items():
        if a in tickers and b in tickers:
            i, j = tickers.index(a), tickers.index(b)
            corr[i, j] = corr[j, i] = rho
    return corr * np.outer(vols, vols)


def synthetic_prices(periods: int = FIXTURE_PERIODS, seed: int = FIXTURE_SEED,
                     tickers: Optional[Sequence[str]] = None, start: date = FIXTURE_START) -> PriceTable:
    """``periods`` business days of prices starting at 100 for every ticker."""
    tickers = list(tickers or DEFAULT_TICKERS)
    unknown = [t for t in tickers if t not in FIXTURE_PARAMETERS]
    if unknown:
        raise ValueError(f"no fixture parameters for {', '.join(unknown)}")
    if periods < 2:
        raise ValueError("a fixture needs at least 2 dates")

    mean = np.array([FIXTURE_PARAMETERS[t][0] for t in tickers])
    rng = make_rng(seed)
    returns = rng.multivariate_normal(mean, fixture_covariance(tickers), size=periods - 1, method="cholesky")
    prices = 100.0 * np.vstack([np.ones(len(tickers)), np.cumprod(1.0 + returns, axis=0)])
    dates = tuple(d.date() for d in pd.bdate_range(start=start, periods=periods))
    logger.info(f"Generated synthetic fixture: {periods} dates x {len(tickers)} tickers (seed {seed})")
    return PriceTable(tuple(tickers), dates, prices)

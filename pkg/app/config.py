import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env if present
load_dotenv()

# Project root and directories
PROJECT_ROOT = Path(__file__).parent.parent
LOG_DIR = Path(os.getenv("PORTFOLIO_LOG_DIR", PROJECT_ROOT / "logs"))
LOG_LEVEL = os.getenv("PORTFOLIO_LOG_LEVEL", "INFO").upper()
CACHE_DIR = Path(os.getenv("PORTFOLIO_CACHE_DIR", PROJECT_ROOT / "price_cache"))
OUTPUT_DIR = Path(os.getenv("PORTFOLIO_OUTPUT_DIR", PROJECT_ROOT / "output"))

# Create necessary directories
LOG_DIR.mkdir(parents=True, exist_ok=True)

# Bumped whenever the pickled table layout changes; older cache entries are ignored
CACHE_SCHEMA_VERSION = "price-table-v1"
ENABLE_PRICE_CACHE = os.getenv("ENABLE_PRICE_CACHE", "true").lower() == "true"

# Daily returns; every annual <-> per-period conversion uses this
TRADING_PERIODS_PER_YEAR = 252

# Volatilities at or below this are treated as zero (Sharpe undefined)
ZERO_VOLATILITY_TOL = 1e-14

# Estimator defaults; None means "derive from the sample length"
ESTIMATOR_DEFAULTS = {
    "mode": "full",
    "window_length": None,
    "sample_count": 32,
    "half_life": None,
    "seed": 42,
}

# Projected-gradient solver defaults
SOLVER_DEFAULTS = {
    "tolerance": 1e-9,
    "max_iterations": 50_000,
    "penalty_growth": 10.0,
    "frontier_points": 50,
}
PENALTY_ROUNDS = 8

# Simulated annealing defaults; beta range None means auto-scaled from the model
ANNEAL_DEFAULTS = {
    "sweeps": 2000,
    "restarts": 10,
    "beta_initial": None,
    "beta_final": None,
    "seed": 42,
}
EXHAUSTIVE_MAX_SIZE = 24

# Backtesting scenario
BACKTEST_DEFAULTS = {
    "train_periods": 40,
    "test_periods": 5,
    "risk_free_rate": 0.0,
    "target_return": 0.20,
    "target_volatility": 0.05,
    "lower_bound": 0.02,
    "upper_bound": 0.98,
    "risk_aversion": 1.0,
}

# Asset universe of the bundled synthetic scenario
DEFAULT_TICKERS = ["IVV", "IJR", "ACWX", "IEMG", "REET", "IYR", "HYG", "AGG", "IAU"]

SUPPORTED_COMMANDS = ["stats", "optimize", "frontier", "backtest", "fixture"]
OBJECTIVE_KINDS = ["EWP", "MCP", "MVP", "MRP", "MSRP", "MOP", "BMOP"]
FIGURE_KINDS = ["cumulative-returns", "return-distribution", "correlation-heatmap", "frontier-scatter"]

# Symmetric-log threshold for the return-distribution figure
SYMLOG_LINEAR_THRESHOLD = 1e-4

EXIT_CODES = {
    "success": 0,
    "config": 2,
    "data": 3,
    "solver": 4,
    "io": 5,
}

# HTTP service
API_HOST = os.getenv("PORTFOLIO_API_HOST", "0.0.0.0")
API_PORT = int(os.getenv("PORTFOLIO_API_PORT", "8001"))
CORS_ORIGINS = [o.strip() for o in os.getenv("PORTFOLIO_CORS_ORIGINS", "*").split(",") if o.strip()]

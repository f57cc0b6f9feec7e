"""
Portfolio optimization service and command-line tool.

This package estimates expected returns and covariances from historical
prices, builds mean-variance portfolios (classical solvers and a QUBO
annealer for binary selection), runs rolling-window backtests and writes the
results as CSV tables and SVG figures. It is usable as a library, from the
command line (``python -m app``) and over HTTP (``app.main``).
"""

__version__ = "1.0.0"

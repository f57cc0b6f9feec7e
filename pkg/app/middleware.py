import time

from fastapi import Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import CORS_ORIGINS
from .errors import PortfolioError
from .logger import logger


def setup_cors(app):
    """Allow the origins listed in PORTFOLIO_CORS_ORIGINS (all by default)."""
    app.add_middleware(
        CORSMiddleware,
        allow_origins=CORS_ORIGINS,
        allow_credentials=CORS_ORIGINS != ["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )


async def log_requests_middleware(request: Request, call_next):
    """Log each request with its status and latency; solver-heavy routes can take seconds."""
    started = time.perf_counter()
    logger.info(f"Request: {request.method} {request.url.path}")
    try:
        response = await call_next(request)
    except Exception as e:
        logger.error(f"Request {request.method} {request.url.path} failed: {str(e)}", exc_info=True)
        raise
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    logger.info(f"Response: {response.status_code} {request.url.path} in {elapsed_ms:.0f} ms")
    return response


async def portfolio_error_handler(request: Request, exc: PortfolioError):
    """Map domain errors that escape a route to their HTTP status."""
    logger.warning(f"{type(exc).__name__} on {request.url.path}: {exc}")
    return JSONResponse(status_code=exc.status_code, content={"detail": str(exc)})


def register_error_handlers(app):
    app.add_exception_handler(PortfolioError, portfolio_error_handler)

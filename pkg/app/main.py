from fastapi import FastAPI
from . import __version__
from .config import API_HOST, API_PORT
from .routes import portfolio_router, health_router
from .middleware import setup_cors, log_requests_middleware, register_error_handlers
from .logger import logger

def create_app() -> FastAPI:
    """Create and configure the FastAPI application."""
    app = FastAPI(
        title="Portfolio Optimizer",
        description="Mean-variance portfolio construction, QUBO asset selection and rolling-window backtests",
        version=__version__
    )
    
    # Setup middleware
    setup_cors(app)
    app.middleware("http")(log_requests_middleware)
    register_error_handlers(app)
    
    # Include routers
    app.include_router(portfolio_router, prefix="/api/v1", tags=["portfolio"])
    app.include_router(health_router, tags=["health"])
    
    logger.info("FastAPI application created successfully")
    return app

# Create the application instance
app = create_app()

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=API_HOST, port=API_PORT)

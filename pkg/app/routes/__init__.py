from .portfolio import router as portfolio_router
from .health import router as health_router

__all__ = ['portfolio_router', 'health_router']

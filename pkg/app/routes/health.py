from fastapi import APIRouter
from datetime import datetime
from .. import __version__
from ..config import CACHE_DIR, ENABLE_PRICE_CACHE, OBJECTIVE_KINDS, TRADING_PERIODS_PER_YEAR

router = APIRouter()


@router.get("/health")
async def health_check():
    """Service status plus the conventions every response is computed under."""
    return {
        "status": "healthy",
        "version": __version__,
        "objectives": OBJECTIVE_KINDS,
        "periods_per_year": TRADING_PERIODS_PER_YEAR,
        "price_cache": str(CACHE_DIR) if ENABLE_PRICE_CACHE else None,
        "timestamp": datetime.now().isoformat()
    }

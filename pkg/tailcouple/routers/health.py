from fastapi import APIRouter

from tailcouple import __version__
from tailcouple.config import get_settings

router = APIRouter()


@router.get("/health")
async def health():
    """Liveness check; echoes the version and the seed fallback."""
    return {"status": "ok", "version": __version__, "seed": get_settings().seed}

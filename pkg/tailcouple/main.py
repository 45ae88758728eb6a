import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from tailcouple import __version__
from tailcouple.config import configure_logging, get_settings
from tailcouple.errors import TailCoupleError
from tailcouple.routers import diagnostics, estimate, health, simulate

logger = logging.getLogger("startup")


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Startup: install logging and report the effective settings so a
    misconfigured environment shows up before the first request.
    """
    configure_logging()
    settings = get_settings()
    logger.info(
        "Quadrature rel tol %.0e, bridge grid %d x %d reps, default alpha %.3g",
        settings.quad_rel_tol, settings.bridge_grid_size, settings.bridge_reps, settings.default_alpha,
    )
    logger.info("Ready.")
    yield


app = FastAPI(
    title="tailcouple",
    version=__version__,
    description="Coupled risk measures for heavy-tailed losses: estimates, intervals and simulation studies.",
    lifespan=lifespan,
)


@app.exception_handler(TailCoupleError)
async def tailcouple_error_handler(request: Request, exc: TailCoupleError):
    return JSONResponse(
        status_code=422,
        content={"error": type(exc).__name__, "detail": str(exc), "exit_code": exc.exit_code},
    )


app.include_router(health.router)
app.include_router(estimate.router)
app.include_router(simulate.router)
app.include_router(diagnostics.router)

import logging
from datetime import datetime

import uvicorn
from fastapi import FastAPI, HTTPException, Query
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from qkd_backend import __version__
from qkd_backend.config import get_settings, setup_logging
from qkd_backend.errors import InvariantViolation, UsageError
from qkd_backend.models.schemas import (
    CircuitReport,
    CircuitRequest,
    DeferredReport,
    ExactReport,
    HealthResponse,
    PassName,
    RunConfig,
    SimulationReport,
    StrategyName,
    SurveyReport,
    TableReport,
)
from qkd_backend.services.analysis import AnalysisService
from qkd_backend.services.circuit_check import CircuitService
from qkd_backend.services.simulation import SimulationService

settings = get_settings()
setup_logging(settings.log_level)
logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="QKD Report Service",
    description="Exact analyses and seeded simulations of a pre/post-selection key distribution protocol",
    version=__version__,
)

# Initialize services
analysis_service = AnalysisService()
simulation_service = SimulationService(settings, analysis_service)
circuit_service = CircuitService()


# Middleware for request logging
@app.middleware("http")
async def log_requests(request, call_next):
    start_time = datetime.now()
    logger.info(f"{request.method} {request.url.path} - Started")

    response = await call_next(request)

    process_time = (datetime.now() - start_time).total_seconds()
    logger.info(f"{request.method} {request.url.path} - Completed in {process_time:.2f}s")

    return response


@app.get("/")
async def root():
    return {
        "success": True,
        "message": "QKD Report Service",
        "version": __version__,
        "endpoints": {
            "health": "/api/health",
            "table": "/api/table",
            "exact": "/api/exact?strategy=&passes=",
            "survey": "/api/survey",
            "deferred": "/api/deferred",
            "simulate": "POST /api/simulate",
            "circuit": "POST /api/circuit",
        },
        "documentation": "/docs",
    }


@app.get("/api/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint to verify API status"""
    return HealthResponse(
        success=True,
        message="QKD Report Service is running",
        timestamp=datetime.now().isoformat(),
        version=__version__,
        features={
            "simulation": settings.max_api_pairs > 0,
            "exact_analysis": True,
            "deferred_mode": True,
            "circuit_check": True,
        },
    )


@app.get("/api/table", response_model=TableReport)
def retrodiction_table():
    return analysis_service.table()


@app.get("/api/exact", response_model=ExactReport)
def exact(strategy: StrategyName = Query("none"), passes: PassName = Query("both")):
    return analysis_service.exact(strategy, passes)


@app.get("/api/survey", response_model=SurveyReport)
def survey():
    return analysis_service.survey()


@app.get("/api/deferred", response_model=DeferredReport)
def deferred():
    return analysis_service.deferred()


@app.post("/api/simulate", response_model=SimulationReport)
def simulate(config: RunConfig):
    """Seeded Monte Carlo run; the response is identical for identical requests"""
    if config.pairs > settings.max_api_pairs:
        raise HTTPException(status_code=400,
                            detail=f"pairs must not exceed {settings.max_api_pairs} on this service")
    logger.info(f"Simulating {config.pairs} pairs ({config.strategy}/{config.passes}, {config.mode})")
    return simulation_service.simulate(config)


@app.post("/api/circuit", response_model=CircuitReport)
def check_circuit(request: CircuitRequest):
    return circuit_service.check_text(request.text, request.source or "<request>")


def _error(status_code: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status_code,
        content={"success": False, "message": message, "status_code": status_code},
    )


# Error handlers
@app.exception_handler(HTTPException)
async def http_exception_handler(request, exc):
    return _error(exc.status_code, str(exc.detail))


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request, exc):
    first = exc.errors()[0] if exc.errors() else {}
    location = ".".join(str(part) for part in first.get("loc", ()))
    return _error(422, f"{location}: {first.get('msg', 'invalid request')}")


@app.exception_handler(UsageError)
async def usage_error_handler(request, exc):
    logger.warning(f"Rejected {request.url.path}: {exc}")
    return _error(400, str(exc))


@app.exception_handler(InvariantViolation)
async def invariant_handler(request, exc):
    logger.error(f"Invariant violation on {request.url.path}: {exc}")
    return _error(500, str(exc))


@app.exception_handler(Exception)
async def general_exception_handler(request, exc):
    logger.error(f"Unhandled exception: {str(exc)}")
    return _error(500, "Internal server error")


if __name__ == "__main__":
    uvicorn.run(
        "qkd_backend.main:app",
        host=settings.host,
        port=settings.port,
        log_level=settings.log_level.lower(),
    )

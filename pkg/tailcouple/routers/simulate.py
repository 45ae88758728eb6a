from fastapi import APIRouter

from tailcouple.config import get_settings
from tailcouple.models.report_models import ExperimentReport
from tailcouple.models.request_models import SimulateRequest
from tailcouple.services.reporting import run_simulation

router = APIRouter()


@router.post("/simulate", response_model=ExperimentReport, response_model_by_alias=True)
def simulate(req: SimulateRequest):
    """
    Run a seeded Monte Carlo study. Runs synchronously; large n x reps
    requests block a worker for their whole duration.
    """
    seed = req.seed if req.seed is not None else get_settings().seed
    return run_simulation(req, seed)

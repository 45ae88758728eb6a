from fastapi import APIRouter

from tailcouple.config import get_settings
from tailcouple.models.report_models import EstimateReport
from tailcouple.models.request_models import EstimateRequest
from tailcouple.services.reporting import run_estimate
from tailcouple.services.sample_core import build_sample

router = APIRouter()


@router.post("/estimate", response_model=EstimateReport, response_model_by_alias=True)
def estimate(req: EstimateRequest):
    """Estimate a (coupled) risk measure with its confidence interval from raw losses."""
    sample = build_sample(req.values, source=req.source)
    seed = req.seed if req.seed is not None else get_settings().seed
    return run_estimate(sample, req, seed=seed)

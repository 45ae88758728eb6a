from fastapi import APIRouter

from tailcouple.config import get_settings
from tailcouple.models.report_models import BridgeCheckReport, ScanReport
from tailcouple.models.request_models import BridgeCheckRequest, ScanRequest
from tailcouple.services.reporting import run_bridge_check, run_scan
from tailcouple.services.sample_core import build_sample

router = APIRouter()


@router.post("/scan-k", response_model=ScanReport, response_model_by_alias=True)
def scan_k(req: ScanRequest):
    """Hill estimates for every k in [k_from, k_to]."""
    return run_scan(build_sample(req.values), req.transform, req.k_from, req.k_to)


@router.post("/bridge-check", response_model=BridgeCheckReport, response_model_by_alias=True)
def bridge_check(req: BridgeCheckRequest):
    seed = req.seed if req.seed is not None else get_settings().seed
    return run_bridge_check(req, seed)

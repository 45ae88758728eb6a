from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from tailcouple.services.bridge_engine import VarianceMode


class Command(str, Enum):
    estimate = "estimate"
    simulate = "simulate"
    scan_k = "scan-k"
    bridge_check = "bridge-check"


class EstimatorOptions(BaseModel):
    """Spec strings shared by `estimate` and `simulate`."""

    measure1: str = "mean"
    transform1: str = "identity"
    measure2: Optional[str] = None
    transform2: str = "identity"
    coupling: str = "first"
    # overrides measure1/measure2/coupling when set
    preset: Optional[str] = None
    k: str = "auto"
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    b1: float = 0.0
    b2: float = 0.0
    omega1: float = Field(default=0.0, le=0.0)
    omega2: float = Field(default=0.0, le=0.0)
    variance_mode: Optional[VarianceMode] = None

    @property
    def has_bias(self) -> bool:
        return self.b1 != 0.0 or self.b2 != 0.0


class EstimateRequest(EstimatorOptions):
    values: List[float]
    source: str = "request"
    seed: Optional[int] = Field(default=None, ge=0)


class SimulateRequest(EstimatorOptions):
    model: str
    n: int = Field(default=10_000, ge=4)
    reps: int = Field(default=500, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)


class ScanRequest(BaseModel):
    values: List[float]
    transform: str = "identity"
    k_from: int = Field(default=10, ge=1)
    k_to: int = Field(default=200, ge=1)


class BridgeCheckRequest(BaseModel):
    gamma: float = Field(gt=0.0, lt=1.0)
    rho: float = Field(default=1.0, ge=1.0)
    k_over_n: Optional[float] = Field(default=None, gt=0.0, le=0.01)
    grid_size: Optional[int] = None
    reps: Optional[int] = None
    seed: Optional[int] = Field(default=None, ge=0)


class RunConfig(BaseModel):
    """One CLI invocation after argument parsing."""

    command: Command
    input: Optional[str] = None
    output: Optional[str] = None
    seed: int = Field(default=0, ge=0)

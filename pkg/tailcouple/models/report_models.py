"""
JSON reports shared by the CLI and the HTTP surface. Field names are frozen;
`schema` versions the layout. Dump with ``by_alias=True``.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class Report(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2) + "\n"


class MeasureReport(BaseModel):
    label: str
    gamma_hat: float
    in_theory_range: bool
    k: int
    threshold: float
    tied_top: int
    trunc: float
    tail: float
    total: float
    d_hat: float
    sqrt_nk_D: float
    classical: float


class CoupledReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    coupling: str
    point: float
    delta_hat: float
    partial_x: float
    partial_y: float
    sigma2: Optional[float] = None
    lam: float = Field(default=0.0, alias="lambda")
    alpha: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    variance_mode: Optional[str] = None
    warnings: List[str] = []
    notes: List[str] = []


class EstimateReport(Report):
    source: str
    n: int
    k: int
    measure1: MeasureReport
    measure2: Optional[MeasureReport] = None
    coupled: CoupledReport


class GammaSummaryReport(BaseModel):
    mean: float
    std: float
    min: float
    max: float


class ExperimentReport(Report):
    model: str
    gamma_true: float
    omega_true: float
    measure1: str
    measure2: Optional[str] = None
    coupling: str
    k_policy: str
    alpha: float
    n: int
    replicates: int
    seed: int
    true_value: float
    succeeded: int
    failures: int
    failure_fraction: float
    failure_reasons: List[str] = []
    bias: Optional[float] = None
    rmse: Optional[float] = None
    median_abs_rel_error: Optional[float] = None
    ci_count: int
    ci_coverage: Optional[float] = None
    mean_ci_width: Optional[float] = None
    gamma_hat: Optional[GammaSummaryReport] = None
    gamma_hat2: Optional[GammaSummaryReport] = None


class ScanRow(BaseModel):
    k: int
    gamma_hat: float
    in_theory_range: bool


class ScanReport(Report):
    n: int
    transform: str
    rows: List[ScanRow]

    def to_csv(self) -> str:
        lines = ["k,gamma_hat,in_theory_range"]
        lines += [f"{r.k},{r.gamma_hat!r},{str(r.in_theory_range).lower()}" for r in self.rows]
        return "\n".join(lines) + "\n"


class MomentRow(BaseModel):
    name: str
    limit: float
    alternate: float
    finite_h: float
    empirical: float
    se: float


class BridgeCheckReport(Report):
    gamma: float
    rho: float
    k_over_n: float
    grid_size: int
    reps: int
    seed: int
    rows: List[MomentRow]
    closed_form_variance: Optional[float] = None
    quadratic_form_variance: Optional[float] = None
    notes: List[str] = []

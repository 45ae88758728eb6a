"""Report builders shared by the command line and the HTTP routers."""

import logging
from typing import Optional

from tailcouple.config import get_settings
from tailcouple.errors import TailCoupleError
from tailcouple.models.report_models import (
    BridgeCheckReport,
    CoupledReport,
    EstimateReport,
    ExperimentReport,
    GammaSummaryReport,
    MeasureReport,
    MomentRow,
    ScanReport,
    ScanRow,
)
from tailcouple.models.request_models import (
    BridgeCheckRequest,
    EstimatorOptions,
    SimulateRequest,
)
from tailcouple.services import bridge_engine
from tailcouple.services.coupled import (
    BiasInputs,
    CoupledEstimate,
    Coupling,
    estimate_coupled,
    parse_preset,
)
from tailcouple.services.l_estimator import LEstimate, estimate_classical
from tailcouple.services.measure_spec import Distortion, MeasureSpec, parse_transform
from tailcouple.services.sample_core import Sample
from tailcouple.services.sim_lab import (
    DistributionModel,
    EstimatorConfig,
    GammaSummary,
    run_experiment,
)
from tailcouple.services.tail_fit import KPolicy, hill_trajectory, select_k

logger = logging.getLogger(__name__)


def build_estimator_config(opts: EstimatorOptions) -> EstimatorConfig:
    if opts.preset:
        spec1, spec2, coupling = parse_preset(opts.preset)
    else:
        spec1 = MeasureSpec.parse(opts.measure1, opts.transform1)
        spec2 = MeasureSpec.parse(opts.measure2, opts.transform2) if opts.measure2 else None
        coupling = Coupling.parse(opts.coupling)
    bias = None
    if opts.has_bias:
        bias = BiasInputs(b1=opts.b1, b2=opts.b2, omega1=opts.omega1, omega2=opts.omega2)
    return EstimatorConfig(
        spec1=spec1,
        spec2=spec2,
        coupling=coupling,
        k_policy=KPolicy.parse(opts.k),
        alpha=opts.alpha,
        bias=bias,
    )


def _measure_report(sample: Sample, est: LEstimate) -> MeasureReport:
    return MeasureReport(
        label=est.spec.label,
        gamma_hat=est.fit.gamma_hat,
        in_theory_range=est.fit.in_theory_range,
        k=est.k,
        threshold=est.fit.threshold_value,
        tied_top=est.fit.tied_top,
        trunc=est.trunc_part,
        tail=est.tail_part,
        total=est.total,
        d_hat=est.d_hat,
        sqrt_nk_D=est.sqrt_nk_d,
        classical=estimate_classical(sample, est.spec),
    )


def coupled_report(est: CoupledEstimate) -> CoupledReport:
    return CoupledReport(
        coupling=est.coupling.describe(),
        point=est.point,
        delta_hat=est.delta_hat,
        partial_x=est.partials[0],
        partial_y=est.partials[1],
        sigma2=est.sigma2,
        lam=est.lam,
        alpha=est.alpha,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        variance_mode=est.variance_mode.value if est.variance_mode else None,
        warnings=list(est.warnings),
        notes=list(est.notes),
    )


def run_estimate(sample: Sample, opts: EstimatorOptions, seed: int = 0) -> EstimateReport:
    config = build_estimator_config(opts)
    k = select_k(sample, config.k_policy)
    est = estimate_coupled(
        sample,
        config.spec1,
        config.spec2,
        config.coupling,
        k,
        alpha=config.alpha,
        bias=config.bias,
        variance_mode=opts.variance_mode,
        seed=seed,
    )
    return EstimateReport(
        source=sample.source,
        n=sample.n,
        k=k,
        measure1=_measure_report(sample, est.l1),
        measure2=_measure_report(sample, est.l2) if est.l2 else None,
        coupled=coupled_report(est),
    )


def _gamma_report(summary: Optional[GammaSummary]) -> Optional[GammaSummaryReport]:
    if summary is None:
        return None
    return GammaSummaryReport(mean=summary.mean, std=summary.std, min=summary.minimum, max=summary.maximum)


def run_simulation(req: SimulateRequest, seed: int) -> ExperimentReport:
    model = DistributionModel.parse(req.model)
    config = build_estimator_config(req)
    result = run_experiment(model, config, req.n, req.reps, seed)
    return ExperimentReport(
        model=model.describe(),
        gamma_true=model.gamma,
        omega_true=model.omega,
        measure1=config.spec1.label,
        measure2=config.spec2.label if config.spec2 else None,
        coupling=config.coupling.describe(),
        k_policy=config.k_policy.describe(),
        alpha=config.alpha,
        n=result.n,
        replicates=result.replicates,
        seed=result.seed,
        true_value=result.true_value,
        succeeded=result.succeeded,
        failures=result.failures,
        failure_fraction=result.failure_fraction,
        failure_reasons=result.failure_reasons,
        bias=result.bias,
        rmse=result.rmse,
        median_abs_rel_error=result.median_abs_rel_error,
        ci_count=result.ci_count,
        ci_coverage=result.ci_coverage,
        mean_ci_width=result.mean_ci_width,
        gamma_hat=_gamma_report(result.gamma1),
        gamma_hat2=_gamma_report(result.gamma2),
    )


def run_scan(sample: Sample, transform: str, k_from: int, k_to: int) -> ScanReport:
    h = parse_transform(transform)
    fits = hill_trajectory(sample, h, range(k_from, k_to + 1))
    return ScanReport(
        n=sample.n,
        transform=h.describe(),
        rows=[ScanRow(k=f.k, gamma_hat=f.gamma_hat, in_theory_range=f.in_theory_range) for f in fits],
    )


def run_bridge_check(req: BridgeCheckRequest, seed: int) -> BridgeCheckReport:
    settings = get_settings()
    k_over_n = req.k_over_n or settings.bridge_k_over_n
    grid_size = req.grid_size or settings.bridge_grid_size
    reps = req.reps or settings.bridge_reps
    rows = bridge_engine.moment_check(req.gamma, req.rho, k_over_n, grid_size, reps, seed)

    measure = Distortion.pht(req.rho) if req.rho != 1.0 else Distortion.identity()
    closed = quadratic = None
    notes = []
    try:
        closed = bridge_engine.asymptotic_variance(measure, req.gamma)
        quadratic = bridge_engine.quadratic_form_variance(measure, req.gamma)
    except TailCoupleError as exc:
        notes.append(f"variance: {exc}")
    else:
        gap = abs(closed - quadratic) / quadratic
        if gap > 1e-6:
            notes.append(f"closed-form and kernel variances differ by {100 * gap:.2f}%")
    e12 = next(r for r in rows if r.name == "E[W1W2]")
    if e12.alternate != e12.limit:
        notes.append(f"E[W1W2]: alternate limit {e12.alternate:.6g}, kernel limit {e12.limit:.6g}")

    return BridgeCheckReport(
        gamma=req.gamma,
        rho=req.rho,
        k_over_n=k_over_n,
        grid_size=grid_size,
        reps=reps,
        seed=seed,
        rows=[
            MomentRow(
                name=r.name, limit=r.limit, alternate=r.alternate,
                finite_h=r.finite_h, empirical=r.empirical, se=r.se,
            )
            for r in rows
        ],
        closed_form_variance=closed,
        quadratic_form_variance=quadratic,
        notes=notes,
    )

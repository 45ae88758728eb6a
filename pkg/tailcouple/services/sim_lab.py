"""
Simulation lab: heavy-tailed laws with known (γ, ω), exact values of the
built-in measures under them, and a seeded Monte Carlo experiment runner.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from tailcouple.config import get_settings
from tailcouple.errors import ArgumentOutOfRange, SpecStringError, TailCoupleError, TailDivergence
from tailcouple.services.coupled import BiasInputs, Coupling, CouplingKind, couple_eval, estimate_coupled
from tailcouple.services.measure_spec import (
    DistortionKind,
    MeasureSpec,
    TransformKind,
    adaptive_quad,
)
from tailcouple.services.parsing import float_param, parse_spec_string, reject_unknown
from tailcouple.services.sample_core import Sample, build_sample
from tailcouple.services.tail_fit import KPolicy, select_k

logger = logging.getLogger(__name__)

U_EPS = 2.0 ** -53
SeedLike = Union[int, Sequence[int]]


class ModelKind(str, Enum):
    PARETO = "pareto"
    BURR = "burr"
    FRECHET = "frechet"


class DistributionModel(BaseModel):
    """
    Pareto: Q(s) = (1-s)^{-γ}, an exact power tail (A ≡ 0).
    Burr: Q(s) = ((1-s)^{-1/λ} - 1)^{1/τ}, γ = 1/(λτ), ω = -1/λ.
    Frechet: Q(s) = (-log s)^{-γ}, ω = -1.
    """

    model_config = ConfigDict(frozen=True)

    kind: ModelKind = ModelKind.PARETO
    gamma: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    lam: Optional[float] = Field(default=None, gt=0.0)
    tau: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_parameters(self) -> "DistributionModel":
        if self.kind is ModelKind.BURR:
            if self.lam is None or self.tau is None:
                raise ValueError("burr needs lam and tau")
            gamma = 1.0 / (self.lam * self.tau)
            if not gamma < 1.0:
                raise ValueError("burr tail index 1/(lam*tau) must lie in (0, 1)")
            object.__setattr__(self, "gamma", gamma)
        elif self.gamma is None:
            raise ValueError(f"{self.kind.value} needs gamma")
        return self

    @classmethod
    def pareto(cls, gamma: float) -> "DistributionModel":
        return cls(kind=ModelKind.PARETO, gamma=gamma)

    @classmethod
    def burr(cls, lam: float, tau: float) -> "DistributionModel":
        return cls(kind=ModelKind.BURR, lam=lam, tau=tau)

    @classmethod
    def frechet(cls, gamma: float) -> "DistributionModel":
        return cls(kind=ModelKind.FRECHET, gamma=gamma)

    @classmethod
    def parse(cls, text: str) -> "DistributionModel":
        """`pareto:gamma=0.6`, `burr:lam=2,tau=1` or `frechet:gamma=0.75`."""
        name, params = parse_spec_string(text)
        try:
            if name in ("pareto", "frechet"):
                reject_unknown(params, ("gamma",), text)
                return cls(kind=ModelKind(name), gamma=float_param(params, "gamma", text))
            if name == "burr":
                reject_unknown(params, ("lam", "tau"), text)
                return cls.burr(float_param(params, "lam", text), float_param(params, "tau", text))
        except ValueError as exc:
            if isinstance(exc, SpecStringError):
                raise
            raise SpecStringError(f"invalid model {text!r}: {exc}") from None
        raise SpecStringError(f"unknown model {name!r} in {text!r}")

    @property
    def omega(self) -> float:
        if self.kind is ModelKind.PARETO:
            return 0.0
        if self.kind is ModelKind.BURR:
            return -1.0 / self.lam
        return -1.0

    @property
    def in_theory_range(self) -> bool:
        return 0.5 < self.gamma < 1.0

    def describe(self) -> str:
        if self.kind is ModelKind.BURR:
            return f"burr:lam={self.lam:g},tau={self.tau:g}"
        return f"{self.kind.value}:gamma={self.gamma:g}"

    def distribution(self):
        """The matching frozen scipy.stats distribution."""
        if self.kind is ModelKind.PARETO:
            return stats.pareto(b=1.0 / self.gamma)
        if self.kind is ModelKind.BURR:
            return stats.burr12(c=self.tau, d=self.lam)
        return stats.invweibull(c=1.0 / self.gamma)

    def tail_quantile(self, v):
        """Q(1 - v), evaluated without forming 1 - v."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind is ModelKind.PARETO:
            out = np.power(v, -self.gamma)
        elif self.kind is ModelKind.BURR:
            out = np.power(np.expm1(-np.log(v) / self.lam), 1.0 / self.tau)
        else:
            out = np.power(-np.log1p(-v), -self.gamma)
        return float(out) if out.ndim == 0 else out

    def quantile(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.kind is ModelKind.PARETO:
            out = np.power(1.0 - s, -self.gamma)
        elif self.kind is ModelKind.BURR:
            out = np.power(np.expm1(-np.log1p(-s) / self.lam), 1.0 / self.tau)
        else:
            out = np.power(-np.log(s), -self.gamma)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return self.distribution().cdf(x)


def sample_from(model: DistributionModel, n: int, seed: SeedLike) -> Sample:
    """Inverse-transform draw Q(U) with U on [2⁻⁵³, 1 - 2⁻⁵³]."""
    if n < 4:
        raise ArgumentOutOfRange(f"need n >= 4, got {n}")
    rng = np.random.default_rng(seed)
    u = np.clip(rng.random(n), U_EPS, 1.0 - U_EPS)
    return build_sample(model.quantile(u), source=f"{model.describe()} n={n} seed={seed}")


class CoupledTarget(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec1: MeasureSpec
    spec2: Optional[MeasureSpec] = None
    coupling: Coupling = Field(default_factory=Coupling.first)


def _effective_gamma(model: DistributionModel, spec: MeasureSpec) -> Optional[float]:
    """Tail index of H∘Q, when H is a power."""
    if spec.h.kind is TransformKind.IDENTITY:
        return model.gamma
    if spec.h.kind is TransformKind.POWER:
        return spec.h.beta * model.gamma
    return None


def _check_finite(spec: MeasureSpec, g: Optional[float]) -> None:
    if g is None:
        return
    psi = spec.psi
    if psi.kind is DistortionKind.PHT and psi.rho * g >= 1.0:
        raise TailDivergence(f"{spec.label} is infinite: rho*gamma = {psi.rho * g:.6g} >= 1")
    if psi.kind is not DistortionKind.CUSTOM and g >= 1.0:
        raise TailDivergence(f"{spec.label} is infinite: gamma = {g:.6g} >= 1")


def _tail_weight(spec: MeasureSpec) -> Callable[[float], float]:
    """φ(v) = Ψ'(1 - v)."""
    psi = spec.psi
    if psi.is_identity:
        return lambda v: 1.0
    if psi.kind is DistortionKind.PHT:
        return lambda v: v ** (1.0 / psi.rho - 1.0) / psi.rho
    if psi.kind is DistortionKind.CTE:
        return lambda v: 1.0 / (1.0 - psi.t) if v < 1.0 - psi.t else 0.0
    if psi.density is None:
        raise ArgumentOutOfRange("true value of a custom distortion needs its density")
    return lambda v: float(psi.density(1.0 - v))


def _measure_value(model: DistributionModel, spec: MeasureSpec) -> float:
    g = _effective_gamma(model, spec)
    _check_finite(spec, g)
    psi = spec.psi

    if model.kind is ModelKind.PARETO and g is not None and psi.kind is not DistortionKind.CUSTOM:
        if psi.is_identity:
            return 1.0 / (1.0 - g)
        if psi.kind is DistortionKind.PHT:
            return 1.0 / (1.0 - psi.rho * g)
        return (1.0 - psi.t) ** (-g) / (1.0 - g)

    weight = _tail_weight(spec)
    upper = 1.0 - psi.t if psi.kind is DistortionKind.CTE else 1.0
    v0 = min(0.5, upper)

    def integrand(v: float) -> float:
        return float(spec.h.apply(model.tail_quantile(v))) * weight(v)

    def mapped(x: float) -> float:
        # v = v0·e^{-x} maps the tail singularity at v = 0 to +∞; past
        # x ~ 745 the exponential underflows and the integrand is taken as 0
        v = v0 * math.exp(-x)
        if v == 0.0:
            return 0.0
        return integrand(v) * v

    tail = adaptive_quad(mapped, 0.0, math.inf, what=spec.label)
    body = adaptive_quad(integrand, v0, upper, what=spec.label) if upper > v0 else 0.0
    return tail + body


def true_value(model: DistributionModel, target: Union[MeasureSpec, CoupledTarget]) -> float:
    if isinstance(target, MeasureSpec):
        return _measure_value(model, target)
    first = _measure_value(model, target.spec1)
    if target.coupling.kind is CouplingKind.FIRST:
        return first
    if target.spec2 is None:
        raise ArgumentOutOfRange(f"coupling {target.coupling.describe()} needs a second measure")
    return couple_eval(target.coupling, first, _measure_value(model, target.spec2)).value


class EstimatorConfig(BaseModel):
    """Everything estimate_coupled needs except the sample."""

    model_config = ConfigDict(frozen=True)

    spec1: MeasureSpec = Field(default_factory=MeasureSpec)
    spec2: Optional[MeasureSpec] = None
    coupling: Coupling = Field(default_factory=Coupling.first)
    k_policy: KPolicy = Field(default_factory=KPolicy.auto)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    bias: Optional[BiasInputs] = None

    @property
    def target(self) -> CoupledTarget:
        return CoupledTarget(spec1=self.spec1, spec2=self.spec2, coupling=self.coupling)


@dataclass(frozen=True)
class GammaSummary:
    mean: float
    std: float
    minimum: float
    maximum: float

    @classmethod
    def of(cls, values: Sequence[float]) -> Optional["GammaSummary"]:
        if not values:
            return None
        arr = np.asarray(values)
        return cls(float(arr.mean()), float(arr.std()), float(arr.min()), float(arr.max()))


@dataclass(frozen=True)
class ExperimentResult:
    model: DistributionModel
    config: EstimatorConfig
    n: int
    replicates: int
    seed: int
    true_value: float
    succeeded: int
    failures: int
    bias: Optional[float]
    rmse: Optional[float]
    median_abs_rel_error: Optional[float]
    ci_count: int
    ci_coverage: Optional[float]
    mean_ci_width: Optional[float]
    gamma1: Optional[GammaSummary]
    gamma2: Optional[GammaSummary]
    failure_reasons: List[str] = field(default_factory=list)

    @property
    def failure_fraction(self) -> float:
        return self.failures / self.replicates


def run_experiment(
    model: DistributionModel,
    config: EstimatorConfig,
    n: int,
    replicates: int,
    seed: int,
) -> ExperimentResult:
    """
    Replicate r estimates on sample_from(model, n, [seed, r]). Replicates
    that raise are excluded and counted.
    """
    settings = get_settings()
    if replicates < settings.min_replicates:
        raise ArgumentOutOfRange(f"need at least {settings.min_replicates} replicates, got {replicates}")
    truth = true_value(model, config.target)

    points, gammas1, gammas2, widths = [], [], [], []
    covered = 0
    reasons = []
    for r in range(replicates):
        sample = sample_from(model, n, [seed, r])
        try:
            k = select_k(sample, config.k_policy)
            est = estimate_coupled(
                sample, config.spec1, config.spec2, config.coupling, k,
                alpha=config.alpha, bias=config.bias, seed=seed,
            )
        except TailCoupleError as exc:
            logger.info("Replicate %d failed: %s", r, exc)
            reasons.append(type(exc).__name__)
            continue
        points.append(est.point)
        gammas1.append(est.l1.fit.gamma_hat)
        if est.l2 is not None:
            gammas2.append(est.l2.fit.gamma_hat)
        if est.ci is not None:
            widths.append(est.ci[1] - est.ci[0])
            covered += int(est.ci[0] <= truth <= est.ci[1])

    failures = replicates - len(points)
    if failures:
        logger.warning("%d of %d replicates failed", failures, replicates)

    bias = rmse = mare = None
    if points:
        errs = np.asarray(points) - truth
        bias = math.fsum(errs) / len(points)
        rmse = math.sqrt(math.fsum(errs * errs) / len(points))
        mare = float(np.median(np.abs(errs) / abs(truth))) if truth != 0.0 else None

    return ExperimentResult(
        model=model,
        config=config,
        n=n,
        replicates=replicates,
        seed=seed,
        true_value=truth,
        succeeded=len(points),
        failures=failures,
        bias=bias,
        rmse=rmse,
        median_abs_rel_error=mare,
        ci_count=len(widths),
        ci_coverage=covered / len(widths) if widths else None,
        mean_ci_width=math.fsum(widths) / len(widths) if widths else None,
        gamma1=GammaSummary.of(gammas1),
        gamma2=GammaSummary.of(gammas2),
        failure_reasons=sorted(set(reasons)),
    )


@dataclass(frozen=True)
class SecondOrderRow:
    eps: float
    max_excess: float
    max_rel_deviation: Optional[float]


DEFAULT_S_GRID = (0.1, 0.25, 0.5, 2.0, 4.0)


def second_order_diagnostic(
    model: DistributionModel,
    eps_grid: Sequence[float] = (1e-2, 1e-3, 1e-4),
    s_grid: Sequence[float] = DEFAULT_S_GRID,
) -> List[SecondOrderRow]:
    """
    Compare Q(1-εs)/Q(1-ε) - s^{-γ} with A(1/ε)·s^{-γ}(s^{-ω}-1)/ω, taking
    A(1/ε) = C·ε^{-ω} with C fitted at the smallest ε. For an exact power
    tail only the excess (identically zero) is reported.
    """
    s = np.asarray(s_grid, dtype=np.float64)
    eps = sorted(float(e) for e in eps_grid)
    if any(e * s.max() >= 1.0 for e in eps):
        raise ArgumentOutOfRange("every eps*s must stay below 1")
    g, w = model.gamma, model.omega

    excess = {e: model.tail_quantile(e * s) / model.tail_quantile(e) - s ** (-g) for e in eps}
    if w == 0.0:
        return [SecondOrderRow(e, float(np.max(np.abs(excess[e]))), None) for e in reversed(eps)]

    limit = s ** (-g) * (s ** (-w) - 1.0) / w
    c = float(np.median(excess[eps[0]] / (eps[0] ** (-w) * limit)))
    rows = []
    for e in reversed(eps):
        fitted = excess[e] / (c * e ** (-w))
        rows.append(
            SecondOrderRow(
                eps=e,
                max_excess=float(np.max(np.abs(excess[e]))),
                max_rel_deviation=float(np.max(np.abs(fitted - limit) / np.abs(limit))),
            )
        )
    return rows

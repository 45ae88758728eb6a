import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from tailcouple.errors import (
    ArgumentOutOfRange,
    BothZero,
    DivisionByZero,
    SpecStringError,
    TailCoupleError,
    UndefinedBias,
    VarianceUnavailable,
    VarianceUndefined,
)
from tailcouple.services.bridge_engine import (
    VarianceMode,
    asymptotic_variance,
    quadratic_form_variance,
    variance_coupled,
)
from tailcouple.services.l_estimator import LEstimate, estimate_l
from tailcouple.services.measure_spec import Distortion, MeasureSpec, Transform, parse_distortion
from tailcouple.services.parsing import float_param, parse_spec_string, reject_unknown
from tailcouple.services.sample_core import Sample

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
VARIANCE_GAP_NOTE = 1e-6


class CouplingKind(str, Enum):
    FIRST = "first"
    RATIO = "ratio"
    ZENGA = "zenga"
    CUSTOM = "custom"


class Coupling(BaseModel):
    """
    The map 𝓗(x, y) joining two L-functionals. Zenga(p) is
    1 - 1/p + (1/p)(y/x), the lower-to-upper conditional mean ratio when
    x = CTE(p) and y is the mean.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: CouplingKind = CouplingKind.FIRST
    p: float = Field(default=1.0, gt=0.0, le=1.0)
    func: Optional[Callable[[float, float], float]] = None
    partials: Optional[Callable[[float, float], Tuple[float, float]]] = None

    @classmethod
    def first(cls) -> "Coupling":
        return cls(kind=CouplingKind.FIRST)

    @classmethod
    def ratio(cls) -> "Coupling":
        return cls(kind=CouplingKind.RATIO)

    @classmethod
    def zenga(cls, p: float) -> "Coupling":
        return cls(kind=CouplingKind.ZENGA, p=p)

    @classmethod
    def custom(cls, func, partials=None) -> "Coupling":
        return cls(kind=CouplingKind.CUSTOM, func=func, partials=partials)

    @classmethod
    def parse(cls, text: str) -> "Coupling":
        name, params = parse_spec_string(text)
        if name == "first":
            reject_unknown(params, (), text)
            return cls.first()
        if name == "ratio":
            reject_unknown(params, (), text)
            return cls.ratio()
        if name == "zenga":
            reject_unknown(params, ("", "p"), text)
            p = float_param(params, "p" if "p" in params else "", text)
            if not 0.0 < p <= 1.0:
                raise SpecStringError(f"zenga needs 0 < p <= 1, got {p:g}")
            return cls.zenga(p)
        raise SpecStringError(f"unknown coupling {name!r} in {text!r}")

    def describe(self) -> str:
        if self.kind is CouplingKind.ZENGA:
            return f"zenga:p={self.p:g}"
        return self.kind.value


class CouplingValue(NamedTuple):
    value: float
    dx: float
    dy: float


def _central_difference(f: Callable[[float, float], float], x: float, y: float) -> Tuple[float, float]:
    hx = FD_STEP * max(1.0, abs(x))
    hy = FD_STEP * max(1.0, abs(y))
    dx = (f(x + hx, y) - f(x - hx, y)) / (2.0 * hx)
    dy = (f(x, y + hy) - f(x, y - hy)) / (2.0 * hy)
    return dx, dy


def couple_eval(c: Coupling, x: float, y: float) -> CouplingValue:
    if c.kind is CouplingKind.FIRST:
        return CouplingValue(x, 1.0, 0.0)
    if c.kind is CouplingKind.RATIO:
        if y == 0.0:
            raise DivisionByZero("ratio coupling with a zero denominator")
        r = x / y
        return CouplingValue(r, 1.0 / y, -r / y)
    if c.kind is CouplingKind.ZENGA:
        if x == 0.0:
            raise DivisionByZero("zenga coupling with a zero upper-tail measure")
        p = c.p
        return CouplingValue(1.0 - 1.0 / p + (y / x) / p, -(y / (x * x)) / p, (1.0 / x) / p)

    try:
        value = float(c.func(x, y))
        if c.partials is not None:
            dx, dy = c.partials(x, y)
        else:
            dx, dy = _central_difference(c.func, x, y)
    except ZeroDivisionError as exc:
        raise DivisionByZero(f"custom coupling: {exc}") from None
    return CouplingValue(value, float(dx), float(dy))


def delta_weight(d1: float, d2: float) -> float:
    if d1 < 0.0 or d2 < 0.0:
        raise ArgumentOutOfRange(f"normalizations must be non-negative, got ({d1}, {d2})")
    if d1 + d2 == 0.0:
        raise BothZero("both normalizations are zero")
    return d1 / (d1 + d2)


class BiasInputs(BaseModel):
    """Second-order inputs: b_i = lim √k·A_i(n/k) and ω_i ≤ 0."""

    model_config = ConfigDict(frozen=True)

    b1: float = 0.0
    b2: float = 0.0
    omega1: float = Field(default=0.0, le=0.0)
    omega2: float = Field(default=0.0, le=0.0)


def _bias_term(b: float, omega: float, gamma: float, rho: float) -> float:
    """-b·d/ω with d = ω/(1/ρ - γ - ω)."""
    if b == 0.0:
        return 0.0
    if omega > 0.0:
        raise ArgumentOutOfRange(f"second-order parameter must be <= 0, got {omega}")
    if omega == 0.0:
        raise UndefinedBias("a non-zero bias needs a strictly negative second-order parameter")
    denom = 1.0 / rho - gamma - omega
    if denom <= 0.0:
        raise UndefinedBias(f"bias limit needs 1/rho - gamma - omega > 0, got {denom:.6g}")
    return -b / denom


def bias_lambda(
    b1: float,
    b2: float,
    omega1: float,
    omega2: float,
    gamma1: float,
    gamma2: float,
    delta: float,
    partials: Tuple[float, float],
    rho1: float = 1.0,
    rho2: float = 1.0,
) -> float:
    first = delta * partials[0] * _bias_term(b1, omega1, gamma1, rho1) if delta != 0.0 else 0.0
    second = (1.0 - delta) * partials[1] * _bias_term(b2, omega2, gamma2, rho2) if delta != 1.0 else 0.0
    return first + second


@dataclass(frozen=True)
class CoupledEstimate:
    point: float
    l1: LEstimate
    l2: Optional[LEstimate]
    delta_hat: float
    partials: Tuple[float, float]
    sigma2: Optional[float]
    lam: float
    ci: Optional[Tuple[float, float]]
    alpha: float
    scale: float
    coupling: Coupling
    variance_mode: Optional[VarianceMode] = None
    warnings: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def ci_low(self) -> Optional[float]:
        return self.ci[0] if self.ci else None

    @property
    def ci_high(self) -> Optional[float]:
        return self.ci[1] if self.ci else None

    @property
    def half_width(self) -> Optional[float]:
        return 0.5 * (self.ci[1] - self.ci[0]) if self.ci else None


def z_quantile(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ArgumentOutOfRange(f"alpha {alpha} outside (0, 1)")
    return float(stats.norm.ppf(1.0 - alpha / 2.0))


def _fit_warnings(est: LEstimate) -> List[str]:
    out = []
    label = est.spec.label
    if est.fit.degenerate:
        out.append(f"degenerate_tail:{label}")
    if not est.fit.in_theory_range:
        out.append(f"gamma_out_of_range:{label}:{est.fit.gamma_hat:.6g}")
    if est.fit.tied_top:
        out.append(f"tied_top:{label}:{est.fit.tied_top}")
    return out


def _variance_notes(estimates: Sequence[LEstimate]) -> List[str]:
    notes = []
    for est in estimates:
        psi = est.spec.psi
        try:
            closed = asymptotic_variance(psi, est.fit.gamma_hat)
            kernel = quadratic_form_variance(psi, est.fit.gamma_hat)
        except TailCoupleError:
            continue
        gap = abs(closed - kernel) / abs(kernel)
        if gap > VARIANCE_GAP_NOTE:
            notes.append(
                f"{est.spec.label}: closed-form variance {closed:.6g} differs from the "
                f"kernel quadratic form {kernel:.6g} by {100 * gap:.2f}%"
            )
    return notes


def estimate_coupled(
    s: Sample,
    spec1: MeasureSpec,
    spec2: Optional[MeasureSpec],
    c: Coupling,
    k: int,
    alpha: float = 0.05,
    bias: Optional[BiasInputs] = None,
    variance_mode: Optional[VarianceMode] = None,
    seed: int = 0,
) -> CoupledEstimate:
    """
    Π̂ = 𝓗(L̂₁, L̂₂) with the interval Π̂ - λw ∓ z·σ·w, w = (D̂₁ + D̂₂)/√k.

    Under the First coupling the second measure is never estimated and
    δ̂ = 1. The interval is withheld, with a warning, when a fitted γ̂
    leaves (1/2, 1) or no variance is available for the measures.
    """
    z = z_quantile(alpha)
    l1 = estimate_l(s, spec1, k)
    warnings = _fit_warnings(l1)

    if c.kind is CouplingKind.FIRST:
        l2 = None
        cv = couple_eval(c, l1.total, 0.0)
        delta = 1.0
        d_sum = l1.d_hat
    else:
        if spec2 is None:
            raise ArgumentOutOfRange(f"coupling {c.describe()} needs a second measure")
        l2 = estimate_l(s, spec2, k)
        warnings += _fit_warnings(l2)
        cv = couple_eval(c, l1.total, l2.total)
        delta = delta_weight(l1.d_hat, l2.d_hat)
        d_sum = l1.d_hat + l2.d_hat

    partials = (cv.dx, cv.dy)
    if partials == (0.0, 0.0):
        warnings.append("degenerate_partials")

    gamma1 = l1.fit.gamma_hat
    gamma2 = l2.fit.gamma_hat if l2 else 0.0
    rho1 = spec1.psi.rho_eff
    rho2 = spec2.psi.rho_eff if l2 else 1.0

    lam = 0.0
    if bias is not None:
        if rho1 is None or (l2 is not None and rho2 is None):
            raise UndefinedBias("bias term needs built-in distortions")
        lam = bias_lambda(
            bias.b1, bias.b2, bias.omega1, bias.omega2,
            gamma1, gamma2, delta, partials, rho1, rho2 if rho2 is not None else 1.0,
        )

    scale = d_sum / math.sqrt(k)
    used = [l1] + ([l2] if l2 else [])
    sigma2 = None
    ci = None
    mode = None
    if any(not est.fit.in_theory_range for est in used):
        warnings.append("ci_suppressed:gamma_out_of_range")
    else:
        mode = variance_mode or VarianceMode.KERNEL
        # kernel moments are taken at the fitted tail mass, not at its k/n → 0 limit
        k_over_n = k / s.n if mode is VarianceMode.KERNEL else None
        try:
            sigma2 = variance_coupled(
                gamma1, gamma2, rho1, rho2, delta, partials, mode=mode, seed=seed, k_over_n=k_over_n
            )
        except (VarianceUnavailable, VarianceUndefined) as exc:
            logger.warning("No confidence interval: %s", exc)
            warnings.append(f"variance_unavailable:{exc}")
            mode = None
        else:
            center = cv.value - lam * scale
            half = z * math.sqrt(sigma2) * scale
            ci = (center - half, center + half)
            if sigma2 == 0.0:
                warnings.append("zero_variance")

    return CoupledEstimate(
        point=cv.value,
        l1=l1,
        l2=l2,
        delta_hat=delta,
        partials=partials,
        sigma2=sigma2,
        lam=lam,
        ci=ci,
        alpha=alpha,
        scale=scale,
        coupling=c,
        variance_mode=mode,
        warnings=warnings,
        notes=_variance_notes(used),
    )


def estimate_measure(
    s: Sample,
    spec: MeasureSpec,
    k: int,
    alpha: float = 0.05,
    bias: Optional[BiasInputs] = None,
) -> CoupledEstimate:
    """Single risk measure with its interval, i.e. the First coupling."""
    return estimate_coupled(s, spec, None, Coupling.first(), k, alpha, bias)


def relative(spec: MeasureSpec) -> Tuple[MeasureSpec, MeasureSpec, Coupling]:
    """spec[F] / mean[F]."""
    return spec, MeasureSpec(), Coupling.ratio()


def zenga(p: float) -> Tuple[MeasureSpec, MeasureSpec, Coupling]:
    if not 0.0 < p < 1.0:
        raise ArgumentOutOfRange(f"zenga preset needs 0 < p < 1, got {p}")
    return MeasureSpec(psi=Distortion.cte(p)), MeasureSpec(), Coupling.zenga(p)


def weighted_premium(beta: float) -> Tuple[MeasureSpec, MeasureSpec, Coupling]:
    """E[X^{β+1}] / E[X^β], the premium with weight function x^β."""
    if not beta > 0.0:
        raise ArgumentOutOfRange(f"weighted premium needs beta > 0, got {beta}")
    return (
        MeasureSpec(h=Transform.power(beta + 1.0), label=f"mean|power:beta={beta + 1.0:g}"),
        MeasureSpec(h=Transform.power(beta), label=f"mean|power:beta={beta:g}"),
        Coupling.ratio(),
    )


def parse_preset(text: str) -> Tuple[MeasureSpec, MeasureSpec, Coupling]:
    """`zenga:p=0.5`, `weighted:beta=1` or `relative:measure=cte:t=0.9`."""
    name, params = parse_spec_string(text)
    if name == "zenga":
        reject_unknown(params, ("", "p"), text)
        return zenga(float_param(params, "p" if "p" in params else "", text))
    if name == "weighted":
        reject_unknown(params, ("", "beta"), text)
        return weighted_premium(float_param(params, "beta" if "beta" in params else "", text))
    if name == "relative":
        reject_unknown(params, ("measure",), text)
        if "measure" not in params:
            raise SpecStringError(f"missing parameter 'measure' in {text!r}")
        return relative(MeasureSpec(psi=parse_distortion(params["measure"])))
    raise SpecStringError(f"unknown preset {name!r} in {text!r}")


@dataclass(frozen=True)
class ZengaPoint:
    p: float
    z: float
    ci: Optional[Tuple[float, float]]
    estimate: CoupledEstimate


def zenga_curve(s: Sample, ps: Sequence[float], k: int, alpha: float = 0.05) -> List[ZengaPoint]:
    """Z(p) = 1 - R(p) with R the Zenga ratio, one point per p."""
    out = []
    for p in ps:
        spec1, spec2, c = zenga(p)
        est = estimate_coupled(s, spec1, spec2, c, k, alpha)
        ci = (1.0 - est.ci[1], 1.0 - est.ci[0]) if est.ci else None
        out.append(ZengaPoint(p=p, z=1.0 - est.point, ci=ci, estimate=est))
    return out

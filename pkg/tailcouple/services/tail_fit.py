import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field

from tailcouple.config import get_settings
from tailcouple.errors import (
    ProbabilityOutOfRange,
    RankOutOfRange,
    SpecStringError,
    TooFewObservations,
    ZeroThreshold,
)
from tailcouple.services.measure_spec import Transform
from tailcouple.services.parsing import float_param, parse_spec_string, reject_unknown
from tailcouple.services.sample_core import MIN_OBSERVATIONS, Sample

logger = logging.getLogger(__name__)

SCAN_WINDOW = 10
# guards floor() against n**a landing one ulp under an integer
_FLOOR_NUDGE = 1e-9


@dataclass(frozen=True)
class TailFit:
    gamma_hat: float
    k: int
    n: int
    threshold_value: float
    tied_top: int = 0
    degenerate: bool = False

    @property
    def in_theory_range(self) -> bool:
        return 0.5 < self.gamma_hat < 1.0

    @property
    def tail_mass(self) -> float:
        return self.k / self.n


def _hill_from_logs(log_top: np.ndarray, log_threshold: float) -> float:
    return float(np.mean(log_top - log_threshold))


def _transformed(s: Sample, h: Optional[Transform]) -> np.ndarray:
    if h is None or h.is_identity:
        return s.values
    return np.asarray(h.apply(s.values))


def _fit_from_transformed(hv: np.ndarray, k: int) -> TailFit:
    n = hv.shape[0]
    if not 1 <= k <= n - 1:
        raise RankOutOfRange(f"threshold rank k={k} outside [1, {n - 1}]")
    threshold = float(hv[n - k - 1])
    if not threshold > 0.0:
        raise ZeroThreshold(f"threshold H(X_(n-k)) = {threshold!r} is not positive at k={k}")

    top = hv[n - k - 1:]
    logs = np.log(top)
    gamma_hat = _hill_from_logs(logs[1:], float(logs[0]))
    tied = (k + 1) - int(np.unique(top).size)
    degenerate = threshold == float(hv[-1])
    return TailFit(
        gamma_hat=gamma_hat,
        k=k,
        n=n,
        threshold_value=threshold,
        tied_top=tied,
        degenerate=degenerate,
    )


def hill(s: Sample, h: Optional[Transform], k: int) -> TailFit:
    """
    Hill estimate γ̂ = (1/k) Σ log(H(X_{n-j+1:n}) / H(X_{n-k:n})) on the
    H-transformed sample. Ties among the top k+1 values are counted; a
    threshold equal to the maximum yields γ̂ = 0 with `degenerate` set.
    """
    fit = _fit_from_transformed(_transformed(s, h), k)
    if fit.degenerate:
        logger.warning("Degenerate tail at k=%d: the threshold equals the sample maximum", k)
    elif fit.tied_top:
        logger.info("%d tied values among the top %d order statistics", fit.tied_top, k + 1)
    return fit


def hill_trajectory(s: Sample, h: Optional[Transform], k_range: Iterable[int]) -> List[TailFit]:
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        return []
    if ks[0] < 1 or ks[-1] > s.n - 1:
        raise RankOutOfRange(f"k range [{ks[0]}, {ks[-1]}] outside [1, {s.n - 1}]")
    hv = _transformed(s, h)
    return [_fit_from_transformed(hv, k) for k in ks]


def weissman_quantile(fit: TailFit, s: float) -> float:
    """Extrapolated quantile (k/n)^γ̂ · H(X_{n-k:n}) · (1-s)^{-γ̂} on [1-k/n, 1)."""
    left = 1.0 - fit.k / fit.n
    if not left <= s < 1.0:
        raise ProbabilityOutOfRange(f"probability {s} outside the extrapolation window [{left:.6g}, 1)")
    if s == left:
        return fit.threshold_value
    return fit.threshold_value * ((fit.k / fit.n) / (1.0 - s)) ** fit.gamma_hat


class KPolicyKind(str, Enum):
    FIXED = "fixed"
    FRACTION = "fraction"
    POWER = "power"
    SCAN = "scan"


class KPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: KPolicyKind = KPolicyKind.POWER
    value: float = Field(default=0.45, gt=0.0)

    @classmethod
    def fixed(cls, k: int) -> "KPolicy":
        return cls(kind=KPolicyKind.FIXED, value=k)

    @classmethod
    def fraction(cls, c: float) -> "KPolicy":
        return cls(kind=KPolicyKind.FRACTION, value=c)

    @classmethod
    def power_law(cls, a: float) -> "KPolicy":
        return cls(kind=KPolicyKind.POWER, value=a)

    @classmethod
    def scan(cls) -> "KPolicy":
        return cls(kind=KPolicyKind.SCAN, value=1.0)

    @classmethod
    def auto(cls) -> "KPolicy":
        return cls.power_law(get_settings().default_k_exponent)

    @classmethod
    def parse(cls, text: str) -> "KPolicy":
        """`auto`, an integer k, `fraction:0.1`, `power:a=0.45` or `scan`."""
        stripped = str(text).strip()
        if stripped.isdigit():
            return cls.fixed(int(stripped))
        name, params = parse_spec_string(stripped)
        if name == "auto":
            reject_unknown(params, (), text)
            return cls.auto()
        if name == "scan":
            reject_unknown(params, (), text)
            return cls.scan()
        if name == "fraction":
            reject_unknown(params, ("", "c"), text)
            c = float_param(params, "c" if "c" in params else "", text)
            if not 0.0 < c < 1.0:
                raise SpecStringError(f"fraction needs 0 < c < 1, got {c:g}")
            return cls.fraction(c)
        if name == "power":
            reject_unknown(params, ("", "a"), text)
            a = float_param(params, "a" if "a" in params else "", text)
            if not 0.0 < a < 1.0:
                raise SpecStringError(f"power needs 0 < a < 1, got {a:g}")
            return cls.power_law(a)
        raise SpecStringError(f"unknown k policy {text!r}")

    def describe(self) -> str:
        if self.kind is KPolicyKind.FIXED:
            return str(int(self.value))
        if self.kind is KPolicyKind.SCAN:
            return "scan"
        return f"{self.kind.value}:{self.value:g}"


def _clamp(k: int, n: int) -> int:
    return min(max(k, 2), n - 2)


def _stability_scan(s: Sample) -> int:
    n = s.n
    lo = _clamp(math.floor(n ** 0.3 + _FLOOR_NUDGE), n)
    hi = _clamp(math.floor(n ** 0.6 + _FLOOR_NUDGE), n)
    if hi - lo + 1 < SCAN_WINDOW:
        logger.info("Stability scan range [%d, %d] shorter than %d; using the power-law default", lo, hi, SCAN_WINDOW)
        return select_k(s, KPolicy.auto())
    gammas = np.array([f.gamma_hat for f in hill_trajectory(s, None, range(lo, hi + 1))])
    spread = sliding_window_view(gammas, SCAN_WINDOW).std(axis=1)
    start = int(np.argmin(spread))
    return lo + start + SCAN_WINDOW // 2


def select_k(s: Sample, policy: KPolicy) -> int:
    n = s.n
    if n < MIN_OBSERVATIONS:
        raise TooFewObservations(f"need at least {MIN_OBSERVATIONS} observations, got {n}")
    if policy.kind is KPolicyKind.FIXED:
        k = int(policy.value)
        if not 1 <= k <= n - 2:
            raise RankOutOfRange(f"k={k} outside [1, {n - 2}]")
        return k
    if policy.kind is KPolicyKind.FRACTION:
        k = _clamp(math.floor(policy.value * n + _FLOOR_NUDGE), n)
    elif policy.kind is KPolicyKind.POWER:
        k = _clamp(math.floor(n ** policy.value + _FLOOR_NUDGE), n)
    else:
        k = _stability_scan(s)
    logger.info("Selected k=%d for n=%d with policy %s", k, n, policy.describe())
    return k

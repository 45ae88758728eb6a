import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tailcouple.errors import ArgumentOutOfRange, RankOutOfRange
from tailcouple.services.measure_spec import MeasureSpec, coefficient_vector, tail_constant
from tailcouple.services.sample_core import Sample
from tailcouple.services.tail_fit import TailFit, hill

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LEstimate:
    """
    Two-piece estimate L̂ = L̂(1) + L̂(2).

    `trunc_part` is the L-statistic over the bottom n-k order statistics,
    `tail_part` the Weissman extrapolation of the top k. The plug-in
    normalization D̂ equals the tail part.
    """

    trunc_part: float
    tail_part: float
    total: float
    d_hat: float
    fit: TailFit
    k: int
    n: int
    spec: MeasureSpec

    @property
    def sqrt_nk_d(self) -> float:
        """√(n/k)·D̂, which should grow without bound along k→∞, k/n→0."""
        return math.sqrt(self.n / self.k) * self.d_hat


def _check_k(s: Sample, k: int) -> None:
    if not 1 <= k <= s.n - 2:
        raise RankOutOfRange(f"k={k} outside [1, {s.n - 2}]")


def estimate_trunc(s: Sample, spec: MeasureSpec, k: int) -> float:
    """Σ_{j=1}^{n-k} c_{j,n} H(X_{j:n}) with compensated summation."""
    _check_k(s, k)
    m = s.n - k
    weights = coefficient_vector(spec.psi, s.n)[:m]
    losses = np.asarray(spec.h.apply(s.values[:m]))
    return math.fsum(weights * losses)


def estimate_tail(s: Sample, spec: MeasureSpec, fit: TailFit) -> float:
    """c_△ · H(X_{n-k:n}) with c_△ = (k/n)^γ̂ ∫_{1-k/n}^1 (1-s)^{-γ̂} dΨ(s)."""
    if fit.n != s.n:
        raise ArgumentOutOfRange(f"tail fit was computed for n={fit.n}, sample has n={s.n}")
    _check_k(s, fit.k)
    return tail_constant(spec.psi, fit.gamma_hat, fit.k / fit.n) * fit.threshold_value


def estimate_l(s: Sample, spec: MeasureSpec, k: int, fit: Optional[TailFit] = None) -> LEstimate:
    _check_k(s, k)
    if fit is None:
        fit = hill(s, spec.h, k)
    elif fit.k != k:
        raise ArgumentOutOfRange(f"supplied tail fit uses k={fit.k}, estimate asked for k={k}")

    trunc = estimate_trunc(s, spec, k)
    tail = estimate_tail(s, spec, fit)
    if not fit.in_theory_range:
        logger.warning(
            "gamma_hat=%.4f for %s at k=%d lies outside (1/2, 1)", fit.gamma_hat, spec.label, k
        )
    return LEstimate(
        trunc_part=trunc,
        tail_part=tail,
        total=trunc + tail,
        d_hat=tail,
        fit=fit,
        k=k,
        n=s.n,
        spec=spec,
    )


def estimate_classical(s: Sample, spec: MeasureSpec) -> float:
    """Untrimmed plug-in L-statistic Σ_{j=1}^{n} c_{j,n} H(X_{j:n}), for comparison."""
    weights = coefficient_vector(spec.psi, s.n)
    return math.fsum(weights * np.asarray(spec.h.apply(s.values)))

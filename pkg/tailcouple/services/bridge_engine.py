"""
Asymptotic-variance machinery for the coupled estimator.

The leading fluctuation of each built-in L-estimate is a linear combination
a1·W1 + a2·W2 + a3·W3 of three Brownian-bridge functionals. Written with
u = 1 - s and the Pareto reference quantile (1-s)^{-γ}, at tail mass h = k/n:

    W1 = γ h^{-(β+3/2)} ∫_h^1 u^β B(u) du,     β = 1/ρ - γ - 2
    W2 = B(h) / √h
    W3 = (1/√h) ∫_0^h B(v)/v dv

This module holds the coefficients (a1, a2, a3), the limiting and the exact
finite-h second moments of these functionals, the closed-form variances and a
Monte Carlo oracle that simulates the bridge directly.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tailcouple.config import get_settings
from tailcouple.errors import (
    ArgumentOutOfRange,
    GridTooCoarse,
    TailDivergence,
    VarianceUnavailable,
    VarianceUndefined,
)
from tailcouple.services.measure_spec import Distortion, DistortionKind

logger = logging.getLogger(__name__)

# W3 integrates down to h·LOG_FLOOR; the omitted piece is O(√LOG_FLOOR)
LOG_FLOOR = 1e-10


class VarianceMode(str, Enum):
    CLOSED_FORM = "closed_form"
    KERNEL = "kernel"
    BRIDGE_SIM = "bridge_sim"


@dataclass(frozen=True)
class EllCoefficients:
    a1: float
    a2: float
    a3: float
    rho_eff: float
    gamma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3])


@dataclass(frozen=True)
class WMomentTable:
    """Limits of the second moments of (W1, W2, W3) for one (γ, ρ)."""

    gamma: float
    rho: float
    e11: float
    e22: float
    e33: float
    e12: float
    e13: float
    e23: float
    e12_alt: float
    e12_closed_form: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.e11, self.e12, self.e13],
                [self.e12, self.e22, self.e23],
                [self.e13, self.e23, self.e33],
            ]
        )


@dataclass(frozen=True)
class JointMomentTable:
    """Second moments of (W1 for each (γ, ρ) pair, W2, W3)."""

    pairs: Tuple[Tuple[float, float], ...]
    matrix: np.ndarray
    k_over_n: Optional[float] = None
    se: Optional[np.ndarray] = None
    reps: Optional[int] = None
    grid_size: Optional[int] = None
    seed: Optional[int] = None
    labels: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            names = [f"W1[gamma={g:g},rho={r:g}]" for g, r in self.pairs] + ["W2", "W3"]
            object.__setattr__(self, "labels", names)

    def entry(self, a: str, b: str) -> float:
        return float(self.matrix[self.labels.index(a), self.labels.index(b)])


def _exponent(gamma: float, rho: float) -> float:
    """1/ρ - γ, which must be positive for the PHT tail to be integrable."""
    e = 1.0 / rho - gamma
    if e <= 0.0:
        raise TailDivergence(f"1/rho - gamma = {e:.6g} <= 0 (rho={rho:g}, gamma={gamma:.6g})")
    return e


def _finite_second_moment(gamma: float, rho: float) -> float:
    e = _exponent(gamma, rho)
    if e >= 0.5:
        raise VarianceUndefined(
            f"W1 has no finite limiting variance for 1/rho - gamma = {e:.6g} >= 1/2"
        )
    return e


def ell_coefficients(measure: Distortion, gamma: float) -> EllCoefficients:
    """
    Weights of (W1, W2, W3) in the leading fluctuation of a built-in estimate.
    CTE uses the mean's coefficients whatever t is.
    """
    rho = measure.rho_eff
    if rho is None:
        raise VarianceUnavailable("no bridge coefficients for a custom distortion")
    return _ell(gamma, rho)


def _ell(gamma: float, rho: float) -> EllCoefficients:
    e = _exponent(gamma, rho)
    return EllCoefficients(
        a1=-e,
        a2=-gamma * (1.0 - 1.0 / e),
        a3=-gamma / e,
        rho_eff=rho,
        gamma=gamma,
    )


def w_moment_table(gamma: float, rho: float) -> WMomentTable:
    """
    Limiting moment table for one (γ, ρ). E[W1W2] carries the value obtained
    by integrating the bridge covariance kernel, -γ/(1/ρ-γ-1); the alternate
    closed form γρ/(1/ρ-γ-1) and the value the PHT closed-form variance needs,
    γρ/(1+γ-1/ρ), are kept alongside.
    """
    e = _finite_second_moment(gamma, rho)
    x = e - 1.0
    return WMomentTable(
        gamma=gamma,
        rho=rho,
        e11=gamma * gamma / (x * (e - 0.5)),
        e22=1.0,
        e33=2.0,
        e12=-gamma / x,
        e13=-gamma / x,
        e23=1.0,
        e12_alt=gamma * rho / x,
        e12_closed_form=-gamma * rho / x,
    )


def joint_moment_table(pairs: Sequence[Tuple[float, float]]) -> JointMomentTable:
    """k/n → 0 limit of the kernel moments for several W1 functionals at once."""
    pairs = tuple((float(g), float(r)) for g, r in pairs)
    xs = [_finite_second_moment(g, r) - 1.0 for g, r in pairs]
    p = len(pairs)
    m = np.zeros((p + 2, p + 2))
    for i, ((gi, _), xi) in enumerate(zip(pairs, xs)):
        for j, ((gj, _), xj) in enumerate(zip(pairs, xs)):
            m[i, j] = gi * gj * (xi + xj) / (xi * xj * (xi + xj + 1.0))
        m[i, p] = m[p, i] = -gi / xi
        m[i, p + 1] = m[p + 1, i] = -gi / xi
    m[p, p] = 1.0
    m[p + 1, p + 1] = 2.0
    m[p, p + 1] = m[p + 1, p] = 1.0
    return JointMomentTable(pairs=pairs, matrix=m)


def _power_integral(c: float, h: float) -> float:
    """∫_h^1 u^c du."""
    if abs(c + 1.0) < 1e-12:
        return -math.log(h)
    return (1.0 - h ** (c + 1.0)) / (c + 1.0)


def kernel_moments(pairs: Sequence[Tuple[float, float]], k_over_n: float) -> JointMomentTable:
    """
    Exact second moments of (W1..., W2, W3) at tail mass h = k/n, from the
    bridge covariance min(u, v) - uv. These are what the Monte Carlo oracle
    estimates; their h → 0 limits form `joint_moment_table`.
    """
    h = float(k_over_n)
    if not 0.0 < h < 1.0:
        raise ArgumentOutOfRange(f"k/n = {h} outside (0, 1)")
    pairs = tuple((float(g), float(r)) for g, r in pairs)
    betas = [_exponent(g, r) - 2.0 for g, r in pairs]
    p = len(pairs)
    m = np.zeros((p + 2, p + 2))

    for i, ((gi, _), a) in enumerate(zip(pairs, betas)):
        for j, ((gj, _), b) in enumerate(zip(pairs, betas)):
            s_min = (
                (_power_integral(a + b + 2.0, h) - h ** (a + 2.0) * _power_integral(b, h)) / (a + 2.0)
                + (_power_integral(b + 1.0, h) - _power_integral(a + b + 2.0, h)) / (a + 1.0)
            )
            cross = s_min - _power_integral(a + 1.0, h) * _power_integral(b + 1.0, h)
            m[i, j] = gi * gj * h ** (-(a + b + 3.0)) * cross
        with_w2 = gi * h ** (-(a + 1.0)) * (_power_integral(a, h) - _power_integral(a + 1.0, h))
        m[i, p] = m[p, i] = with_w2
        m[i, p + 1] = m[p + 1, i] = with_w2

    m[p, p] = 1.0 - h
    m[p + 1, p + 1] = 2.0 - h
    m[p, p + 1] = m[p + 1, p] = 1.0 - h
    # (i, j) and (j, i) round differently
    m = 0.5 * (m + m.T)
    return JointMomentTable(pairs=pairs, matrix=m, k_over_n=h)


def _bridge_weights(
    pairs: Sequence[Tuple[float, float]], h: float, grid_size: int, log_nodes: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes in (0, 1] and the matrix mapping bridge values at the nodes to (W1..., W2, W3)."""
    low = np.geomspace(h * LOG_FLOOR, h, log_nodes)
    high = np.linspace(h, 1.0, grid_size + 1)
    nodes = np.concatenate((low, high[1:]))
    p = len(pairs)
    weights = np.zeros((nodes.size, p + 2))

    # W1: exact ∫u^β over each uniform cell, bridge averaged over the cell end points
    for col, (g, r) in enumerate(pairs):
        beta = _exponent(g, r) - 2.0
        cell = (high[1:] ** (beta + 1.0) - high[:-1] ** (beta + 1.0)) / (beta + 1.0)
        node_w = np.zeros(grid_size + 1)
        node_w[:-1] += 0.5 * cell
        node_w[1:] += 0.5 * cell
        weights[log_nodes - 1:, col] = g * h ** (-(beta + 1.5)) * node_w

    weights[log_nodes - 1, p] = 1.0 / math.sqrt(h)

    # W3: trapezoid in log v, since ∫B(v)/v dv = ∫B d(log v)
    dlog = np.diff(np.log(low))
    trap = np.zeros(log_nodes)
    trap[:-1] += 0.5 * dlog
    trap[1:] += 0.5 * dlog
    weights[:log_nodes, p + 1] = trap / math.sqrt(h)
    return nodes, weights


def simulate_bridge_moments(
    gamma: float,
    rhos: Sequence[float],
    k_over_n: float,
    grid_size: int,
    reps: int,
    seed: int,
) -> JointMomentTable:
    """
    Monte Carlo moments of (W1 per ρ, W2, W3) from discretized Brownian
    bridges. Replicate r draws from ``default_rng([seed, r])``, so results do
    not depend on how replicates are batched.
    """
    settings = get_settings()
    if grid_size < settings.bridge_min_grid:
        raise GridTooCoarse(f"grid size {grid_size} below the minimum {settings.bridge_min_grid}")
    if reps < settings.bridge_min_reps:
        raise ArgumentOutOfRange(f"{reps} replicates below the minimum {settings.bridge_min_reps}")
    if not 0.0 < k_over_n <= 0.01:
        raise ArgumentOutOfRange(f"k/n = {k_over_n} outside (0, 0.01]")

    pairs = tuple((float(gamma), float(r)) for r in rhos)
    log_nodes = max(2_000, grid_size // 10)
    nodes, weights = _bridge_weights(pairs, k_over_n, grid_size, log_nodes)
    steps = np.sqrt(np.diff(np.concatenate(([0.0], nodes))))
    dim = weights.shape[1]

    total = np.zeros((dim, dim))
    total_sq = np.zeros((dim, dim))
    batch = settings.bridge_batch_size
    logger.info("Simulating %d bridges on %d nodes", reps, nodes.size)
    for start in range(0, reps, batch):
        stop = min(start + batch, reps)
        z = np.stack([np.random.default_rng([seed, r]).standard_normal(nodes.size) for r in range(start, stop)])
        walk = np.cumsum(z * steps, axis=1)
        bridge = walk - np.outer(walk[:, -1], nodes)
        f = bridge @ weights
        prods = f[:, :, None] * f[:, None, :]
        total += prods.sum(axis=0)
        total_sq += (prods ** 2).sum(axis=0)

    mean = total / reps
    var = np.maximum(total_sq / reps - mean ** 2, 0.0)
    se = np.sqrt(var / (reps - 1))
    return JointMomentTable(
        pairs=pairs,
        matrix=mean,
        k_over_n=k_over_n,
        se=se,
        reps=reps,
        grid_size=grid_size,
        seed=seed,
    )


def asymptotic_variance(measure: Distortion, gamma: float) -> float:
    """Closed-form variance: one polynomial formula for PHT and the mean, another for CTE."""
    rho = measure.rho_eff
    if rho is None:
        raise VarianceUnavailable("no closed-form variance for a custom distortion")
    _exponent(gamma, rho)
    g2 = gamma * gamma
    if measure.kind is DistortionKind.CTE:
        if gamma <= 0.5:
            raise VarianceUndefined(f"CTE variance needs gamma > 1/2, got {gamma:.6g}")
        return g2 * g2 / ((1.0 - gamma) ** 2 * (2.0 * gamma - 1.0))
    denom = rho + 2.0 * gamma * rho - 2.0
    if denom <= 0.0:
        raise VarianceUndefined(f"variance undefined: rho + 2*gamma*rho - 2 = {denom:.6g} <= 0")
    r2 = rho * rho
    poly = g2 * r2 - 2.0 * g2 * r2 * rho + 4.0 * gamma * r2 - 2.0 * gamma * rho + r2 - 2.0 * rho + 1.0
    return g2 * poly / (gamma * rho - 1.0) ** 2 + 2.0 * g2 * (rho + gamma * rho - 1.0) / denom


def quadratic_form_variance(measure: Distortion, gamma: float) -> float:
    """aᵀ M a from the coefficients and the limiting moment table."""
    coefs = ell_coefficients(measure, gamma)
    a = coefs.as_array()
    return float(a @ w_moment_table(gamma, coefs.rho_eff).matrix() @ a)


def _combined_vector(
    coefs: Sequence[EllCoefficients], loads: Sequence[float], shared: bool
) -> np.ndarray:
    """Coefficients of ℓ = Σ load_i·ℓ_i in the (W1..., W2, W3) basis."""
    if shared:
        v = np.zeros(3)
        for c, w in zip(coefs, loads):
            v += w * c.as_array()
        return v
    p = len(coefs)
    v = np.zeros(p + 2)
    for i, (c, w) in enumerate(zip(coefs, loads)):
        v[i] = w * c.a1
        v[p] += w * c.a2
        v[p + 1] += w * c.a3
    return v


def variance_coupled(
    gamma1: float,
    gamma2: float,
    rho1_eff: Optional[float],
    rho2_eff: Optional[float],
    delta: float,
    partials: Tuple[float, float],
    mode: VarianceMode = VarianceMode.CLOSED_FORM,
    reps: Optional[int] = None,
    grid_size: Optional[int] = None,
    seed: int = 0,
    k_over_n: Optional[float] = None,
) -> float:
    """
    Var[δ𝓗x·ℓ1 + (1-δ)𝓗y·ℓ2]. A measure with zero load drops out entirely.
    CLOSED_FORM needs both active measures to share one W1 functional.
    """
    loads = [delta * partials[0], (1.0 - delta) * partials[1]]
    specs = [(gamma1, rho1_eff), (gamma2, rho2_eff)]
    active = [(g, r, w) for (g, r), w in zip(specs, loads) if w != 0.0]
    if not active:
        return 0.0
    if any(r is None for _, r, _ in active):
        raise VarianceUnavailable("no bridge coefficients for a custom distortion")

    coefs = [_ell(g, r) for g, r, _ in active]
    weights = [w for _, _, w in active]
    pairs = [(g, r) for g, r, _ in active]
    shared = len(set(pairs)) == 1

    if mode is VarianceMode.CLOSED_FORM:
        if not shared:
            raise VarianceUnavailable(
                "closed-form variance needs a shared W1; use the kernel or bridge-simulation mode"
            )
        g, r = pairs[0]
        v = _combined_vector(coefs, weights, shared=True)
        return float(v @ w_moment_table(g, r).matrix() @ v)

    if mode is VarianceMode.KERNEL:
        # the limit table also rejects pairs whose variance blows up as k/n → 0
        limits = joint_moment_table(pairs[:1] if shared else pairs)
        table = limits if k_over_n is None else kernel_moments(limits.pairs, k_over_n)
        v = _combined_vector(coefs, weights, shared=shared)
        return float(v @ table.matrix @ v)
    else:
        settings = get_settings()
        if len({g for g, _ in pairs}) != 1:
            raise VarianceUnavailable("bridge simulation needs a common tail index for both measures")
        for g, r in pairs:
            _finite_second_moment(g, r)
        table = simulate_bridge_moments(
            pairs[0][0],
            [r for _, r in pairs],
            k_over_n if k_over_n is not None else settings.bridge_k_over_n,
            grid_size if grid_size is not None else settings.bridge_grid_size,
            reps if reps is not None else settings.bridge_reps,
            seed,
        )
    v = _combined_vector(coefs, weights, shared=False)
    return float(v @ table.matrix @ v)


@dataclass(frozen=True)
class MomentCheckRow:
    name: str
    limit: float
    alternate: float
    finite_h: float
    empirical: float
    se: float

    @property
    def z_score(self) -> float:
        return (self.empirical - self.finite_h) / self.se if self.se > 0 else 0.0


def moment_check(
    gamma: float,
    rho: float,
    k_over_n: float,
    grid_size: int,
    reps: int,
    seed: int,
) -> List[MomentCheckRow]:
    """Limit, alternate limit, exact finite-h and simulated values of every (W1, W2, W3) moment."""
    limit = w_moment_table(gamma, rho)
    exact = kernel_moments([(gamma, rho)], k_over_n).matrix
    sim = simulate_bridge_moments(gamma, [rho], k_over_n, grid_size, reps, seed)
    entries = [
        ("E[W1^2]", 0, 0, limit.e11, limit.e11),
        ("E[W2^2]", 1, 1, limit.e22, limit.e22),
        ("E[W3^2]", 2, 2, limit.e33, limit.e33),
        ("E[W1W2]", 0, 1, limit.e12, limit.e12_alt),
        ("E[W1W3]", 0, 2, limit.e13, limit.e13),
        ("E[W2W3]", 1, 2, limit.e23, limit.e23),
    ]
    return [
        MomentCheckRow(
            name=name,
            limit=lim,
            alternate=alternate,
            finite_h=float(exact[i, j]),
            empirical=float(sim.matrix[i, j]),
            se=float(sim.se[i, j]),
        )
        for name, i, j, lim, alternate in entries
    ]

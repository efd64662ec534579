"""Random function priors from weighted wavelet series.

A prior draw is u = sum gamma_{jm} xi_{jm} basis_{jm} where the gamma decay
like 2^{-j(s(2^-j m) + 1/2 - 1/q^+)} / concentration^{1/q^+} and the xi are
i.i.d. from the generalized q(.)-exponential law with density proportional
to exp(-0.5 * integral |x|^{q(y)} kappa(dy)).  Innovations are drawn by
exact rejection from a box-plus-tail envelope; every coefficient stream is
keyed by (seed, sample index, level, generator), so truncating the series
or enlarging a batch never reshuffles the shared low levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sps

from ._rng import substream
from .exponents import (ConstantField, ExponentField, HoelderBudget,
                        check_integrability_exponent, regularity_threshold)
from .modular import ModularSpec, batch_modular_values
from .wavelets import (U_CONVENTION, WaveletCoefficients, WaveletFamily,
                       WaveletIndex, evaluate_basis, synthesize)

_MAX_REJECTION_ROUNDS = 1_000_000


def uniform_kappa(count: int = 64) -> tuple[tuple[float, float], ...]:
    """Midpoint quadrature of the uniform mixing measure on the torus."""
    return tuple(((i + 0.5) / count, 1.0 / count) for i in range(count))


@dataclass(frozen=True)
class PriorSpec:
    smoothness: ExponentField
    integrability: ExponentField
    concentration: float                      # larger values shrink the draws
    max_level: int
    family: WaveletFamily = WaveletFamily()
    kappa: tuple[tuple[float, float], ...] = uniform_kappa()
    seed: int = 0

    def __post_init__(self):
        if self.smoothness.lower_bound <= 0.0:
            raise ValueError("smoothness must be bounded away from zero")
        check_integrability_exponent(self.integrability)
        if self.concentration <= 0.0:
            raise ValueError("concentration must be positive")
        if self.max_level < 0:
            raise ValueError("max_level must be >= 0")
        weights = np.array([w for _, w in self.kappa])
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("kappa weights must be nonnegative and sum to one")
        needed = regularity_threshold(self.smoothness, self.integrability)
        if self.family.order < math.ceil(needed) + 1:
            raise ValueError(
                f"family order {self.family.order} too low for these fields; "
                f"need >= {math.ceil(needed) + 1}")

    @property
    def dimension(self) -> int:
        return 2 ** (self.max_level + 1)


@dataclass(frozen=True, eq=False)
class PriorSample:
    coeffs: WaveletCoefficients       # u convention
    xi: np.ndarray                    # raw innovations, canonical order
    max_level: int


def coefficient_scale(level: int, shift: int, spec: PriorSpec) -> float:
    """Deterministic decay factor gamma for the (level, shift) coefficient."""
    if not 0 <= shift < 2 ** level:
        raise ValueError("shift out of range for level")
    s_here = float(spec.smoothness.evaluate(np.array([shift / 2 ** level]))[0])
    q_plus = spec.integrability.upper_bound
    exponent = -level * (s_here + 0.5 - 1.0 / q_plus)
    return 2.0 ** exponent * spec.concentration ** (-1.0 / q_plus)


def scale_vector(spec: PriorSpec) -> np.ndarray:
    """gamma in canonical flat order; both level-0 generators share gamma(0,0)."""
    parts = [np.full(1, coefficient_scale(0, 0, spec))]
    for j in range(spec.max_level + 1):
        shifts = np.arange(2 ** j, dtype=float) / 2 ** j
        s_vals = np.asarray(spec.smoothness.evaluate(shifts), dtype=float)
        q_plus = spec.integrability.upper_bound
        parts.append(2.0 ** (-j * (s_vals + 0.5 - 1.0 / q_plus))
                     * spec.concentration ** (-1.0 / q_plus))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# generalized q(.)-exponential innovations
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _envelope_constants(q_lo: float) -> tuple[float, float]:
    """Tail mass T = int_1^inf exp(-x^q/2) dx and hit rate P(X >= 1).

    The tail proposal X = (2 W)^{1/q} with W ~ Gamma(1/q, 1) has density
    proportional to exp(-x^q / 2) on (0, inf); conditioning on X >= 1 keeps
    exactly the envelope tail.
    """
    inv = 1.0 / q_lo
    hit = float(sps.gammaincc(inv, 0.5))
    tail_mass = 2.0 ** inv / q_lo * float(sps.gamma(inv)) * hit
    return tail_mass, hit


def draw_innovations(integrability: ExponentField,
                     kappa: tuple[tuple[float, float], ...],
                     count: int, rng: np.random.Generator) -> np.ndarray:
    """Exact rejection sampling from the generalized q(.)-exponential law.

    Target density ~ exp(-phi(x)/2) with phi(x) = sum_i w_i |x|^{q(y_i)}.
    Envelope: flat on (-1, 1), exp(-|x|^{q^-}/2) outside; phi(x) >= |x|^{q^-}
    for |x| >= 1 and phi >= 0 make both acceptance ratios at most one.  Tail
    proposals that land inside (-1, 1) are discarded, and the middle/tail
    pick probability is corrected for that discard rate so the realized
    envelope keeps its 2 : 2T mass split.
    """
    check_integrability_exponent(integrability)
    nodes = np.array([y for y, _ in kappa])
    weights = np.array([w for _, w in kappa])
    q_nodes = np.asarray(integrability.evaluate(nodes), dtype=float)
    q_lo = integrability.lower_bound
    tail_mass, hit = _envelope_constants(q_lo)
    p_mid = hit / (hit + tail_mass)

    out = np.empty(count)
    pending = np.arange(count)
    for _ in range(_MAX_REJECTION_ROUNDS):
        if pending.size == 0:
            return out
        k = pending.size
        take_mid = rng.random(k) < p_mid
        x = np.empty(k)
        x[take_mid] = rng.uniform(-1.0, 1.0, size=int(take_mid.sum()))
        n_tail = k - int(take_mid.sum())
        w_gamma = rng.gamma(1.0 / q_lo, 1.0, size=n_tail)
        signs = np.where(rng.random(n_tail) < 0.5, -1.0, 1.0)
        x[~take_mid] = signs * (2.0 * w_gamma) ** (1.0 / q_lo)
        valid = take_mid | (np.abs(x) >= 1.0)

        phi = np.abs(x)[:, None] ** q_nodes[None, :] @ weights
        log_accept = np.where(take_mid, -0.5 * phi,
                              -0.5 * (phi - np.abs(x) ** q_lo))
        accept = valid & (np.log(rng.random(k)) < log_accept)
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
    raise RuntimeError(
        "rejection sampler exceeded its iteration cap; integrability field malformed")


def sample_prior(spec: PriorSpec, index: int = 0, seed: int | None = None) -> PriorSample:
    """One deterministic draw; identical (spec, seed, index) reproduce bitwise."""
    root = spec.seed if seed is None else seed
    xi_parts = [draw_innovations(spec.integrability, spec.kappa, 1,
                                 substream(root, "xi", index, 0, "F"))]
    for j in range(spec.max_level + 1):
        rng = substream(root, "xi", index, j, "M")
        xi_parts.append(draw_innovations(spec.integrability, spec.kappa, 2 ** j, rng))
    xi = np.concatenate(xi_parts)
    coeffs = WaveletCoefficients.unflatten(scale_vector(spec) * xi, U_CONVENTION)
    return PriorSample(coeffs, xi, spec.max_level)


def sample_prior_batch(spec: PriorSpec, count: int, seed: int | None = None,
                       start_index: int = 0) -> np.ndarray:
    """(count, dim) matrix of u-convention coefficient draws, rows = samples."""
    out = np.empty((count, spec.dimension))
    for i in range(count):
        out[i] = sample_prior(spec, index=start_index + i, seed=seed).coeffs.flatten()
    return out


def synthesize_sample(sample: PriorSample, spec: PriorSpec, grid_size: int,
                      mean=None) -> np.ndarray:
    """Grid values of the drawn function; an optional mean profile is added."""
    values = synthesize(sample.coeffs, spec.family, grid_size)
    if mean is not None:
        grid = np.arange(grid_size, dtype=float) / grid_size
        values = values + np.asarray(mean(grid), dtype=float)
    return values


def _lambda_weights(max_level: int) -> np.ndarray:
    parts = [np.ones(1)]
    for j in range(max_level + 1):
        parts.append(np.full(2 ** j, 2.0 ** (j / 2.0)))
    return np.concatenate(parts)


def fernique_moment(spec: PriorSpec, target: ExponentField, tilt: float,
                    sample_count: int, seed: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of E[exp(tilt * modular_target(u))] with stderr.

    Overflowing draws propagate an infinite estimate, which is the honest
    diagnostic on the divergent side of the gap dichotomy.
    """
    if tilt < 0.0:
        raise ValueError("tilt must be nonnegative")
    if tilt == 0.0:
        return 1.0, 0.0
    flat_u = sample_prior_batch(spec, sample_count, seed=seed)
    flat_lambda = flat_u * _lambda_weights(spec.max_level)[None, :]
    mspec = ModularSpec(target, spec.integrability)
    rho = batch_modular_values(flat_lambda, mspec, spec.max_level)
    with np.errstate(over="ignore"):
        vals = np.exp(tilt * rho)
    mean = float(vals.mean())
    if not np.isfinite(mean):
        return math.inf, math.inf
    stderr = float(vals.std(ddof=1) / math.sqrt(sample_count))
    return mean, stderr


def modular_statistics(spec: PriorSpec, target: ExponentField, sample_count: int,
                       seed: int | None = None) -> tuple[float, float]:
    """Mean and stderr of the target-field modular under the prior."""
    flat_u = sample_prior_batch(spec, sample_count, seed=seed)
    flat_lambda = flat_u * _lambda_weights(spec.max_level)[None, :]
    rho = batch_modular_values(flat_lambda, ModularSpec(target, spec.integrability),
                               spec.max_level)
    return float(rho.mean()), float(rho.std(ddof=1) / math.sqrt(sample_count))


# ---------------------------------------------------------------------------
# pathwise continuity diagnostics
# ---------------------------------------------------------------------------

def hoelder_condition(smoothness: ExponentField, integrability: ExponentField,
                      budget: HoelderBudget, dim: int = 1) -> bool:
    """Continuity test: inf s > dim (b + 1/q^+ + theta (a - b) / 2)."""
    needed = dim * (budget.sup_rate + 1.0 / integrability.upper_bound
                    + 0.5 * budget.tradeoff * (budget.increment_rate - budget.sup_rate))
    return smoothness.lower_bound > needed


@lru_cache(maxsize=32)
def _level_sup_norms(family: WaveletFamily, max_level: int,
                     grid_power: int = 12) -> tuple[np.ndarray, float]:
    """Measured sup norms of the periodized wavelets per level, plus the
    level-0 scaling sup (exactly 1 by partition of unity, measured anyway)."""
    grid = np.arange(2 ** grid_power, dtype=float) / 2 ** grid_power
    sups = np.empty(max_level + 1)
    for j in range(max_level + 1):
        sups[j] = float(np.max(np.abs(evaluate_basis(WaveletIndex(j, "M", 0), family, grid))))
    sup_f = float(np.max(np.abs(evaluate_basis(WaveletIndex(0, "F", 0), family, grid))))
    return sups, sup_f


def measure_budget(family: WaveletFamily, tradeoff: float, levels: int = 8,
                   grid_power: int = 12) -> HoelderBudget:
    """Fit the growth/regularity constants of the basis from fine grids.

    sup_rate comes from regressing log2 of per-level sup norms on the level,
    holder_exponent from the dyadic-lag increments of the mother wavelet
    (capped at 1), and increment_rate from the per-level Hoelder constants
    at that exponent.
    """
    sups, _ = _level_sup_norms(family, levels, grid_power)
    js = np.arange(levels + 1)
    sup_rate = float(np.polyfit(js, np.log2(sups), 1)[0])

    grid = np.arange(2 ** grid_power, dtype=float) / 2 ** grid_power
    mother = evaluate_basis(WaveletIndex(0, "M", 0), family, grid)
    lags = np.arange(3, 9)
    sup_inc = np.array([np.max(np.abs(np.roll(mother, -(2 ** (grid_power - r))) - mother))
                        for r in lags])
    alpha = float(np.polyfit(-lags.astype(float), np.log2(sup_inc), 1)[0])
    alpha = min(1.0, max(alpha, 1e-3))

    # per-level Hoelder constants at one fine lag, finer than any oscillation
    lag_entries = 4
    h = lag_entries / grid.size
    consts = np.empty(levels + 1)
    for j in range(levels + 1):
        values = evaluate_basis(WaveletIndex(j, "M", 0), family, grid)
        consts[j] = np.max(np.abs(np.roll(values, -lag_entries) - values)) / h ** alpha
    increment_rate = float(np.polyfit(js, np.log2(consts), 1)[0])
    if increment_rate <= sup_rate:
        increment_rate = sup_rate + alpha
    return HoelderBudget(sup_rate=sup_rate, increment_rate=increment_rate,
                         holder_exponent=alpha, tradeoff=tradeoff)


def kolmogorov_sums(spec: PriorSpec, budget: HoelderBudget,
                    max_level: int) -> tuple[float, float]:
    """Partial sums of the two continuity-test series up to ``max_level``.

    S1 accumulates gamma^2 ||basis||_inf^2; S2 accumulates
    ||gamma basis||_inf^{2-theta} (gamma 2^{j a})^{theta} with the measured
    sup norms and the budget's growth rate.
    """
    sups, sup_f = _level_sup_norms(spec.family, max_level)
    theta = budget.tradeoff
    a = budget.increment_rate
    s1 = s2 = 0.0
    g00 = coefficient_scale(0, 0, spec)
    for sup in (sup_f, sups[0]):
        s1 += g00 ** 2 * sup ** 2
        s2 += (g00 * sup) ** (2.0 - theta) * g00 ** theta
    for j in range(1, max_level + 1):
        shifts = np.arange(2 ** j, dtype=float) / 2 ** j
        s_vals = np.asarray(spec.smoothness.evaluate(shifts), dtype=float)
        q_plus = spec.integrability.upper_bound
        gam = 2.0 ** (-j * (s_vals + 0.5 - 1.0 / q_plus)) \
            * spec.concentration ** (-1.0 / q_plus)
        s1 += float(np.sum(gam ** 2)) * sups[j] ** 2
        s2 += float(np.sum((gam * sups[j]) ** (2.0 - theta)
                           * (gam * 2.0 ** (j * a)) ** theta))
    return s1, s2


def empirical_hoelder_exponent(sample: PriorSample, spec: PriorSpec,
                               grid_size: int) -> float:
    """Log-log slope of sup-increments against dyadic lags.

    Synthesizes the sample, measures m(r) = max_x |u(x + 2^-r) - u(x)| for
    lags resolved by the truncation (r = 2 .. max_level + 1), and returns
    the least squares slope.  A flat sample returns +inf as a marker.
    """
    if grid_size & (grid_size - 1) or grid_size < 2 ** (sample.max_level + 3):
        raise ValueError("grid_size must be a power of two >= 2^(max_level + 3)")
    values = synthesize_sample(sample, spec, grid_size)
    power = int(math.log2(grid_size))
    rs = np.arange(2, sample.max_level + 2)
    increments = np.array([np.max(np.abs(np.roll(values, -(2 ** (power - r))) - values))
                           for r in rs])
    if np.any(increments == 0.0):
        return math.inf
    slope = np.polyfit(-rs.astype(float), np.log2(increments), 1)[0]
    return float(slope)

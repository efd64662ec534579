"""Variable exponent fields on the unit circle.

A field is a closed-form function x -> g(x) on the torus [0, 1).  Three
shapes are supported: constants, trigonometric polynomials, and plateau
ramps with smooth transitions.  Restricting to these shapes keeps the
infimum/supremum certifiable by grid refinement and makes every field
automatically log-Hoelder continuous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

_REFINE_START = 10      # first grid is 2**10 nodes
_REFINE_MAX = 22
_REFINE_TOL = 1e-9


def _torus_distance(x, y):
    d = np.abs(x - y)
    return np.minimum(d, 1.0 - d)


class _FieldBase:
    """Shared evaluation plumbing and certified bounds."""

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        raise NotImplementedError

    @cached_property
    def _bounds(self) -> tuple[float, float]:
        lo = hi = None
        for p in range(_REFINE_START, _REFINE_MAX + 1):
            grid = np.arange(2 ** p, dtype=float) / 2 ** p
            values = np.asarray(self.evaluate(grid), dtype=float)
            new_lo, new_hi = float(values.min()), float(values.max())
            if lo is not None and max(abs(new_lo - lo), abs(new_hi - hi)) < _REFINE_TOL:
                return new_lo, new_hi
            lo, hi = new_lo, new_hi
        return lo, hi

    @property
    def lower_bound(self) -> float:
        return self._bounds[0]

    @property
    def upper_bound(self) -> float:
        return self._bounds[1]


@dataclass(frozen=True)
class ConstantField(_FieldBase):
    value: float

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.value)

    @cached_property
    def _bounds(self):
        return float(self.value), float(self.value)


@dataclass(frozen=True)
class TrigField(_FieldBase):
    """mean + sum_k cos_coeffs[k-1] cos(2 pi k x) + sin_coeffs[k-1] sin(2 pi k x)."""

    mean: float
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.mean)
        for k, a in enumerate(self.cos_coeffs, start=1):
            out += a * np.cos(2.0 * np.pi * k * x)
        for k, b in enumerate(self.sin_coeffs, start=1):
            out += b * np.sin(2.0 * np.pi * k * x)
        return out


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class RampField(_FieldBase):
    """Plateau at ``low``, smooth rise to ``high``, plateau, smooth fall back.

    The rise transition occupies [rise, rise + width] and the fall
    [fall, fall + width]; both must fit inside (0, 1) without overlapping so
    the profile closes up periodically.
    """

    low: float
    high: float
    rise: float = 0.25
    fall: float = 0.65
    width: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.width <= 0.5):
            raise ValueError("transition width must lie in (0, 0.5]")
        if not (0.0 < self.rise and self.rise + self.width <= self.fall
                and self.fall + self.width < 1.0):
            raise ValueError("ramp transitions must be ordered and stay inside (0, 1)")

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        bump = _smoothstep((x - self.rise) / self.width) - _smoothstep((x - self.fall) / self.width)
        return self.low + (self.high - self.low) * bump

    @cached_property
    def _bounds(self):
        return (min(self.low, self.high), max(self.low, self.high))


ExponentField = ConstantField | TrigField | RampField


def evaluate(field: ExponentField, x):
    """Evaluate the field at points of the torus (callers reduce mod 1)."""
    return field.evaluate(x)


def check_integrability_exponent(field: ExponentField) -> None:
    """Fields used as integrability exponents must satisfy 1 <= q- <= q+ < inf."""
    if field.lower_bound < 1.0:
        raise ValueError(
            f"integrability exponent must be >= 1 everywhere, got infimum {field.lower_bound}")
    if not math.isfinite(field.upper_bound):
        raise ValueError("integrability exponent must be bounded")


def log_hoelder_constant(field: ExponentField, grid_size: int = 512) -> float:
    """Largest |g(x)-g(y)| * log(e + 1/d(x,y)) over grid pairs, torus metric."""
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    grid = np.arange(grid_size, dtype=float) / grid_size
    values = np.asarray(field.evaluate(grid), dtype=float)
    diffs = np.abs(values[:, None] - values[None, :])
    dist = _torus_distance(grid[:, None], grid[None, :])
    np.fill_diagonal(dist, np.inf)          # excludes x == y pairs
    factor = np.log(np.e + 1.0 / dist)
    return float(np.max(diffs * factor))


def regularity_threshold(smoothness: ExponentField, integrability: ExponentField,
                         dim: int = 1) -> float:
    """max(sigma_q - s^-, s^+) with sigma_q = dim (1/min(1, q^-) - 1).

    Wavelet orders strictly above this value make the coefficient
    characterization of the space valid, so families are chosen with
    order >= ceil(threshold) + 1.
    """
    q_lo = integrability.lower_bound
    if q_lo <= 0:
        raise ValueError("integrability exponent must be positive")
    sigma = dim * (1.0 / min(1.0, q_lo) - 1.0)
    return max(sigma - smoothness.lower_bound, smoothness.upper_bound)


def _refined_sup(fn) -> float:
    prev = None
    for p in range(_REFINE_START, _REFINE_MAX + 1):
        grid = np.arange(2 ** p, dtype=float) / 2 ** p
        value = float(np.max(fn(grid)))
        if prev is not None and abs(value - prev) < _REFINE_TOL:
            return value
        prev = value
    return prev


def gap_condition(target: ExponentField, smoothness: ExponentField,
                  integrability: ExponentField, dim: int = 1) -> float:
    """sup_x (t(x) - s(x) + dim/q^+); negative certifies series convergence.

    The sign decides the dichotomy for the prior: a negative gap gives a
    convergent coefficient series and finite exponential moments of the
    modular, a positive gap gives divergence.  An exact zero is reported
    as-is and callers should treat it as inconclusive.
    """
    offset = dim / integrability.upper_bound
    sup = _refined_sup(lambda g: np.asarray(target.evaluate(g)) - np.asarray(smoothness.evaluate(g)))
    return sup + offset


@dataclass(frozen=True)
class HoelderBudget:
    """Growth/regularity constants of the periodized basis.

    sup_rate is the per-level exponent of the basis sup norms, increment_rate
    the per-level exponent of the Hoelder constants, holder_exponent the
    basis Hoelder exponent in (0, 1], and tradeoff the interpolation exponent
    in (0, 2) splitting sup-norm against increment factors in the continuity
    test sums.
    """

    sup_rate: float          # b
    increment_rate: float    # a
    holder_exponent: float   # in (0, 1]
    tradeoff: float          # in (0, 2)

    def __post_init__(self):
        if not (0.0 < self.holder_exponent <= 1.0):
            raise ValueError("holder_exponent must lie in (0, 1]")
        if not (0.0 < self.tradeoff < 2.0):
            raise ValueError("tradeoff must lie in (0, 2)")
        if not self.increment_rate > self.sup_rate:
            raise ValueError("increment_rate must exceed sup_rate")

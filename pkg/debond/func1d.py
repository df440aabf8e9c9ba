"""
Sampled one-dimensional functions.

==============================================================================
                         HOW IT WORKS
==============================================================================

Every function of one variable in the toolkit (initial and target data,
toughness, controls, the trace f and the characteristic maps t +/- l(t))
is a ``SampledFunction``: strictly increasing abscissae, one value per
abscissa, piecewise-linear in between.  Piecewise-linear interpolation
represents Lipschitz data exactly at the nodes, which is the weakest
regularity class the solver has to handle.

- Evaluation outside the closed domain raises ``DomainError`` (a slack of
  1e-10 x span absorbs round-off at the endpoints).
- Integrals are exact for the interpolant (trapezoid on every segment).
- Derivatives are midpoint slopes, extended flat to both endpoints.
- ``MonotoneMap`` wraps a SampledFunction with strictly increasing values
  and inverts it by bisection on the bracketing segment followed by exact
  linear inversion.

==============================================================================
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import DomainError, RangeError

logger = logging.getLogger("debond.func1d")

ArrayLike = Union[float, np.ndarray]

MIN_RELATIVE_SPACING = 1e-12
ENDPOINT_SLACK = 1e-10


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """
    Piecewise-linear function given by samples.

    Args:
        abscissae: Strictly increasing sample locations.
        values: Function values at the abscissae.
    """

    abscissae: np.ndarray
    values: np.ndarray
    _cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        x = _readonly(self.abscissae).ravel()
        v = _readonly(self.values).ravel()
        if x.size < 2 or x.size != v.size:
            raise ValueError(
                f"SampledFunction needs >= 2 abscissae and one value each "
                f"(got {x.size} abscissae, {v.size} values)"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("SampledFunction samples must be finite")
        span = x[-1] - x[0]
        if span <= 0 or np.min(np.diff(x)) < MIN_RELATIVE_SPACING * span:
            raise ValueError("abscissae must be strictly increasing with spacing >= 1e-12 x span")

        segments = 0.5 * (v[:-1] + v[1:]) * np.diff(x)
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_cumulative", _readonly(np.concatenate(([0.0], np.cumsum(segments)))))

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int = 1001) -> "SampledFunction":
        """Sample ``fn`` on ``n`` uniform points of [a, b]."""
        x = np.linspace(a, b, max(int(n), 2))
        return cls(x, np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape))

    @classmethod
    def constant(cls, c: float, a: float, b: float) -> "SampledFunction":
        return cls(np.array([a, b], dtype=float), np.array([c, c], dtype=float))

    @classmethod
    def from_pairs(cls, pairs) -> "SampledFunction":
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("sample table must be a list of [x, value] pairs")
        return cls(arr[:, 0], arr[:, 1])

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.abscissae[0]), float(self.abscissae[-1])

    @property
    def span(self) -> float:
        return float(self.abscissae[-1] - self.abscissae[0])

    def contains(self, x: float) -> bool:
        slack = ENDPOINT_SLACK * self.span
        return self.abscissae[0] - slack <= x <= self.abscissae[-1] + slack

    def _clip(self, x: ArrayLike) -> ArrayLike:
        a, b = self.abscissae[0], self.abscissae[-1]
        slack = ENDPOINT_SLACK * (b - a)
        arr = np.asarray(x, dtype=float)
        if np.any(arr < a - slack) or np.any(arr > b + slack):
            lo, hi = float(np.min(arr)), float(np.max(arr))
            raise DomainError(f"query [{lo:.6g}, {hi:.6g}] outside domain [{a:.6g}, {b:.6g}]")
        return np.clip(arr, a, b)

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return evaluate(self, x)

    def integral(self, a: float, b: float) -> float:
        return definite_integral(self, a, b)

    def derivative(self) -> "SampledFunction":
        return derivative(self)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def restrict(self, a: float, b: float) -> "SampledFunction":
        """Samples inside [a, b] plus interpolated endpoints."""
        a_c, b_c = float(self._clip(a)), float(self._clip(b))
        inner = self.abscissae[(self.abscissae > a_c) & (self.abscissae < b_c)]
        x = np.concatenate(([a_c], inner, [b_c]))
        keep = np.concatenate(([True], np.diff(x) > MIN_RELATIVE_SPACING * max(b_c - a_c, 1e-300)))
        x = x[keep]
        x[-1] = b_c
        return SampledFunction(x, np.interp(x, self.abscissae, self.values))


def evaluate(fn: SampledFunction, x: ArrayLike) -> ArrayLike:
    """Linear interpolation of ``fn`` at ``x``; exact at sample points."""
    xc = fn._clip(x)
    out = np.interp(xc, fn.abscissae, fn.values)
    return float(out) if np.ndim(out) == 0 else out


def _antiderivative_at(fn: SampledFunction, x: np.ndarray) -> np.ndarray:
    xs, vs = fn.abscissae, fn.values
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
    dx = x - xs[i]
    slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
    return fn._cumulative[i] + dx * (vs[i] + 0.5 * slope * dx)


def antiderivative(fn: SampledFunction, x: ArrayLike) -> ArrayLike:
    """Exact integral of the interpolant from its first abscissa to ``x``."""
    out = _antiderivative_at(fn, np.asarray(fn._clip(x), dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def definite_integral(fn: SampledFunction, a: float, b: float) -> float:
    """Exact integral of the interpolant from ``a`` to ``b`` (signed)."""
    ends = fn._clip(np.array([a, b], dtype=float))
    lo, hi = _antiderivative_at(fn, ends)
    return float(hi - lo)


def cumulative_integral(fn: SampledFunction, c0: float = 0.0) -> SampledFunction:
    """Antiderivative sampled on the same grid, starting from ``c0``."""
    return SampledFunction(fn.abscissae, c0 + fn._cumulative)


def derivative(fn: SampledFunction) -> SampledFunction:
    """Midpoint slopes; the first and last slopes are held to the endpoints."""
    x, v = fn.abscissae, fn.values
    slopes = np.diff(v) / np.diff(x)
    mids = 0.5 * (x[:-1] + x[1:])
    return SampledFunction(
        np.concatenate(([x[0]], mids, [x[-1]])),
        np.concatenate(([slopes[0]], slopes, [slopes[-1]])),
    )


def linear_combination(a: float, f: SampledFunction, b: float, g: SampledFunction) -> SampledFunction:
    """``a*f + b*g`` sampled on the union of both grids over the common domain."""
    lo = max(f.abscissae[0], g.abscissae[0])
    hi = min(f.abscissae[-1], g.abscissae[-1])
    if hi <= lo:
        raise DomainError("linear_combination: functions have no common domain")
    grid = np.union1d(f.abscissae, g.abscissae)
    grid = grid[(grid >= lo) & (grid <= hi)]
    grid = np.union1d(grid, [lo, hi])
    keep = np.concatenate(([True], np.diff(grid) > MIN_RELATIVE_SPACING * (hi - lo)))
    grid = grid[keep]
    grid[-1] = hi
    return SampledFunction(grid, a * np.interp(grid, f.abscissae, f.values) + b * np.interp(grid, g.abscissae, g.values))


@dataclass(frozen=True, eq=False)
class MonotoneMap:
    """
    Strictly increasing sampled map with an inverse.

    The forward direction is plain interpolation; ``inverse`` locates the
    bracketing segment with ``np.searchsorted`` (bisection) and inverts the
    segment exactly.
    """

    fn: SampledFunction

    def __post_init__(self):
        if np.any(np.diff(self.fn.values) <= 0):
            raise ValueError("MonotoneMap values must be strictly increasing")

    @classmethod
    def from_samples(cls, abscissae, values) -> "MonotoneMap":
        return cls(SampledFunction(abscissae, values))

    @property
    def range(self) -> tuple[float, float]:
        return float(self.fn.values[0]), float(self.fn.values[-1])

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return evaluate(self.fn, t)

    def inverse(self, s: ArrayLike) -> ArrayLike:
        return invert(self, s)


def invert(map_: MonotoneMap, s: ArrayLike) -> ArrayLike:
    """Solve ``map_(t) = s`` for t."""
    xs, vs = map_.fn.abscissae, map_.fn.values
    lo, hi = vs[0], vs[-1]
    slack = ENDPOINT_SLACK * (hi - lo)
    arr = np.asarray(s, dtype=float)
    if np.any(arr < lo - slack) or np.any(arr > hi + slack):
        raise RangeError(
            f"inverse query [{float(np.min(arr)):.6g}, {float(np.max(arr)):.6g}] "
            f"outside range [{lo:.6g}, {hi:.6g}]"
        )
    arr = np.clip(arr, lo, hi)
    i = np.clip(np.searchsorted(vs, arr, side="right") - 1, 0, vs.size - 2)
    t = xs[i] + (arr - vs[i]) * (xs[i + 1] - xs[i]) / (vs[i + 1] - vs[i])
    return float(t) if np.ndim(t) == 0 else t

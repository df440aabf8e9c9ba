"""
Core domain types for the dynamic debonding model.

==============================================================================
                         HOW IT WORKS
==============================================================================

A film occupies 0 < x < l(t); its displacement y solves the wave equation,
is driven at x = 0 by the control u(t) and vanishes at the debonding front
x = l(t).  The front advances only when the dynamic energy release rate

    G = 1/2 (1 - l'^2) (dy/dx at the front)^2

reaches the local toughness kappa(l).  Writing y(t, x) = u(t+x) - f(t+x) +
f(t-x) turns Griffith's criterion into a pointwise relation between the
trace slope f' at s = t - l(t) and the front speed:

    l' = max[(2 f'^2 - kappa) / (2 f'^2 + kappa), 0]

This module holds that kernel (``griffith_speed`` and its inverse), the
compatibility predicates for initial and target data, and the immutable
containers passed between the solver, the branch integrator and the
control synthesizer.

==============================================================================
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .errors import (
    AmbiguityNote,
    DomainError,
    IncompatibleTarget,
    InvalidToughness,
    SpeedOutOfRange,
    StepTooLarge,
)
from .func1d import (
    MonotoneMap,
    SampledFunction,
    definite_integral,
    derivative,
    linear_combination,
)

logger = logging.getLogger("debond.model")

ANALYTIC_TOLERANCE = 1e-8


class Regularity(str, Enum):
    """Regularity class of data, controls and fronts."""
    C01 = "C01"
    C1 = "C1"


def sampled_tolerance(*fns: SampledFunction) -> float:
    """10 x the typical sample spacing, floored at the analytic tolerance."""
    spacing = 0.0
    for fn in fns:
        if fn.abscissae.size > 2:
            spacing = max(spacing, float(np.median(np.diff(fn.abscissae))))
    return max(ANALYTIC_TOLERANCE, 10.0 * spacing)


# =============================================================================
# Griffith kernel
# =============================================================================

def griffith_speed(fprime_at_trace: float, kappa_at_front: float) -> float:
    """
    Front speed selected by Griffith's criterion.

    Args:
        fprime_at_trace: Trace slope f'(t - l(t)).
        kappa_at_front: Toughness kappa(l(t)), must be positive.

    Returns:
        Speed in [0, 1).
    """
    if not kappa_at_front > 0:
        raise InvalidToughness(f"toughness must be positive, got {kappa_at_front}")
    g = 2.0 * fprime_at_trace * fprime_at_trace
    return max((g - kappa_at_front) / (g + kappa_at_front), 0.0)


def speed_to_fprime_magnitude(v: float, kappa_at_front: float) -> float:
    """|f'| that makes ``griffith_speed`` return the moving speed ``v``."""
    if not 0.0 < v < 1.0:
        raise SpeedOutOfRange(f"moving speed must lie in (0, 1), got {v}")
    if not kappa_at_front > 0:
        raise InvalidToughness(f"toughness must be positive, got {kappa_at_front}")
    return math.sqrt(kappa_at_front * (1.0 + v) / (2.0 * (1.0 - v)))


def threshold_magnitude(kappa_at_front: float) -> float:
    """|f'| at which the front is about to move (2 f'^2 = kappa)."""
    return math.sqrt(0.5 * kappa_at_front)


def energy_release_rate(speed: float, slope_at_front: float) -> float:
    """Dynamic energy release rate 1/2 (1 - v^2) (dy/dx)^2."""
    if not 0.0 <= speed < 1.0:
        raise SpeedOutOfRange(f"speed must lie in [0, 1), got {speed}")
    return 0.5 * (1.0 - speed * speed) * slope_at_front * slope_at_front


def reflection_factor(speed: float) -> float:
    return (1.0 - speed) / (1.0 + speed)


# =============================================================================
# Toughness
# =============================================================================

@dataclass(frozen=True, eq=False)
class Toughness:
    """
    Local toughness kappa(x), constant or sampled on [0, X_max].

    Args:
        value: Constant toughness (mutually exclusive with ``samples``).
        samples: Sampled toughness profile.
        c1: Lower bound (defaults to half the minimum).
        c2: Upper bound (defaults to twice the maximum).
    """

    value: Optional[float] = None
    samples: Optional[SampledFunction] = None
    c1: Optional[float] = None
    c2: Optional[float] = None

    def __post_init__(self):
        if (self.value is None) == (self.samples is None):
            raise InvalidToughness("give exactly one of a constant value or a sample table")
        lo = self.value if self.samples is None else float(np.min(self.samples.values))
        hi = self.value if self.samples is None else float(np.max(self.samples.values))
        if not lo > 0:
            raise InvalidToughness(f"toughness must be positive, minimum is {lo}")
        c1 = 0.5 * lo if self.c1 is None else float(self.c1)
        c2 = 2.0 * hi if self.c2 is None else float(self.c2)
        if not 0 < c1 < c2:
            raise InvalidToughness(f"bounds must satisfy 0 < c1 < c2 (got c1={c1}, c2={c2})")
        if lo < c1 or hi > c2:
            raise InvalidToughness(f"toughness range [{lo}, {hi}] leaves bounds [{c1}, {c2}]")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @classmethod
    def constant(cls, value: float) -> "Toughness":
        return cls(value=float(value))

    @property
    def is_constant(self) -> bool:
        return self.samples is None

    def __call__(self, x: float) -> float:
        if self.samples is None:
            return self.value
        return self.samples(x)


# =============================================================================
# States
# =============================================================================

@dataclass(frozen=True, eq=False)
class InitialState:
    """Initial front position and displacement/velocity data on [0, ell0]."""

    ell0: float
    y0: SampledFunction
    y1: SampledFunction
    regularity: Regularity = Regularity.C01
    y0_prime: SampledFunction = field(init=False, repr=False)
    incoming: SampledFunction = field(init=False, repr=False)

    def __post_init__(self):
        if not self.ell0 > 0:
            raise ValueError(f"ell0 must be positive, got {self.ell0}")
        for name in ("y0", "y1"):
            a, b = getattr(self, name).domain
            if abs(a) > 1e-12 or abs(b - self.ell0) > 1e-9 * self.ell0:
                raise DomainError(f"{name} must be sampled on [0, ell0] = [0, {self.ell0}], got [{a}, {b}]")
        object.__setattr__(self, "regularity", Regularity(self.regularity))
        yp = derivative(self.y0)
        object.__setattr__(self, "y0_prime", yp)
        # 1/2 (y0' + y1): the right-going part of the data
        object.__setattr__(self, "incoming", linear_combination(0.5, yp, 0.5, self.y1))

    @classmethod
    def at_rest(cls, ell0: float, regularity: Regularity = Regularity.C01) -> "InitialState":
        zero = SampledFunction.constant(0.0, 0.0, ell0)
        return cls(ell0, zero, zero, regularity)

    def left_trace_slope(self, s: float) -> float:
        """f'(s) for s in [-ell0, 0]: 1/2 (y1 - y0')(-s)."""
        return 0.5 * (self.y1(-s) - self.y0_prime(-s))

    def left_trace_value(self, s: float) -> float:
        """f(s) for s in [-ell0, 0], normalised by f(0) = 0."""
        r = -s
        return 0.5 * (self.y0(r) - self.y0(0.0)) - 0.5 * definite_integral(self.y1, 0.0, r)

    def incoming_integral(self, s: float) -> float:
        """1/2 of the integral of (y0' + y1) over [0, s]."""
        return 0.5 * (self.y0(s) - self.y0(0.0)) + 0.5 * definite_integral(self.y1, 0.0, s)


@dataclass(frozen=True, eq=False)
class TargetState:
    """Prescribed terminal front position and displacement/velocity on [0, ellbar0]."""

    ellbar0: float
    ybar0: SampledFunction
    ybar1: SampledFunction
    regularity: Regularity = Regularity.C01
    ybar0_prime: SampledFunction = field(init=False, repr=False)
    damping_part: SampledFunction = field(init=False, repr=False)
    radiating_part: SampledFunction = field(init=False, repr=False)

    def __post_init__(self):
        if not self.ellbar0 > 0:
            raise ValueError(f"ellbar0 must be positive, got {self.ellbar0}")
        for name in ("ybar0", "ybar1"):
            a, b = getattr(self, name).domain
            if abs(a) > 1e-12 or abs(b - self.ellbar0) > 1e-9 * self.ellbar0:
                raise DomainError(f"{name} must be sampled on [0, ellbar0] = [0, {self.ellbar0}], got [{a}, {b}]")
        object.__setattr__(self, "regularity", Regularity(self.regularity))
        yp = derivative(self.ybar0)
        object.__setattr__(self, "ybar0_prime", yp)
        object.__setattr__(self, "damping_part", linear_combination(1.0, self.ybar1, 1.0, yp))
        object.__setattr__(self, "radiating_part", linear_combination(1.0, self.ybar1, -1.0, yp))

    @classmethod
    def at_rest(cls, ellbar0: float, regularity: Regularity = Regularity.C01) -> "TargetState":
        zero = SampledFunction.constant(0.0, 0.0, ellbar0)
        return cls(ellbar0, zero, zero, regularity)


# =============================================================================
# Fronts, controls and results
# =============================================================================

@dataclass(frozen=True, eq=False)
class FrontCurve:
    """
    Debonding front sampled on a time grid.

    ``tau_plus`` and ``tau_minus`` are the characteristic maps t +/- l(t);
    both are strictly increasing because 0 <= l' < 1.
    """

    times: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    tau_plus: MonotoneMap = field(init=False, repr=False)
    tau_minus: MonotoneMap = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.speeds, dtype=float)
        if not (t.size == p.size == v.size) or t.size < 2:
            raise ValueError("front needs matching times, positions and speeds (>= 2 nodes)")
        if np.any(np.diff(p) < -1e-12):
            raise ValueError("front position must be nondecreasing")
        if np.any(v < 0) or np.any(v >= 1):
            raise ValueError("front speed must lie in [0, 1)")
        if np.any(np.diff(t - p) <= 0):
            raise StepTooLarge("t - l(t) is not strictly increasing on the grid; reduce the step")
        for name, arr in (("times", t), ("positions", p), ("speeds", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "tau_plus", MonotoneMap.from_samples(t, t + p))
        object.__setattr__(self, "tau_minus", MonotoneMap.from_samples(t, t - p))

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def position(self, t):
        return self.tau_plus.fn(t) - t

    def speed(self, t):
        return np.interp(t, self.times, self.speeds)

    def echo(self, s: float) -> float:
        """Where the characteristic hitting x = 0 at time s left the origin: tau_- o tau_+^-1."""
        return self.tau_minus(self.tau_plus.inverse(s))


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Boundary displacement u(t) = y(t, 0) and its derivative on [0, T]."""

    u: SampledFunction
    uprime: SampledFunction
    regularity: Regularity = Regularity.C01

    @classmethod
    def from_displacement(cls, u: SampledFunction, regularity: Regularity = Regularity.C01) -> "ControlSignal":
        return cls(u, derivative(u), Regularity(regularity))

    @classmethod
    def hold(cls, value: float, T: float) -> "ControlSignal":
        return cls(SampledFunction.constant(value, 0.0, T), SampledFunction.constant(0.0, 0.0, T))

    @property
    def horizon(self) -> float:
        return min(self.u.domain[1], self.uprime.domain[1])

    def max_jump(self) -> float:
        return float(np.max(np.abs(np.diff(self.uprime.values))))


@dataclass(frozen=True, eq=False)
class SolutionRecord:
    """
    A simulated trajectory.

    Besides the front, the march stores three quantities at every node t_n:
    ``foot_slope`` = f'(t_n - l_n), ``foot_value`` = f(t_n - l_n) and
    ``reflected`` = 1/2 (dy/dt + dy/dx) at the front, which is the amplitude
    carried back along the characteristic t + x = const.  Together with
    the data they determine f and f' everywhere on [-ell0, T].
    """

    front: FrontCurve
    trace: SampledFunction
    trace_prime: SampledFunction
    control: ControlSignal
    initial: InitialState
    toughness: Toughness
    foot_slope: np.ndarray
    foot_value: np.ndarray
    reflected: np.ndarray

    @property
    def horizon(self) -> float:
        return self.front.end

    def reflected_at(self, t: float) -> float:
        return float(np.interp(t, self.front.times, self.reflected))

    def trace_slope(self, s: float) -> float:
        ell0 = self.initial.ell0
        if s <= 0.0:
            return self.initial.left_trace_slope(s)
        if s <= ell0:
            return self.control.uprime(s) - self.initial.incoming(s)
        return self.control.uprime(s) - self.reflected_at(self.front.tau_plus.inverse(s))

    def trace_value(self, s: float) -> float:
        ell0 = self.initial.ell0
        if s <= 0.0:
            return self.initial.left_trace_value(s)
        u = self.control.u
        if s <= ell0:
            return u(s) - u(0.0) - self.initial.incoming_integral(s)
        t_src = self.front.tau_plus.inverse(s)
        return u(s) + float(np.interp(t_src, self.front.times, self.foot_value))

    def front_energy_balance(self) -> np.ndarray:
        """G - kappa at every node, with G from the trace slope at the front."""
        out = np.empty(self.front.times.size)
        for n, (pos, v, fp) in enumerate(zip(self.front.positions, self.front.speeds, self.foot_slope)):
            # dy/dx at the front = -f'(t - l) - f'(echo) r = -2 f'(t - l) / (1 + l')
            slope = -2.0 * fp / (1.0 + v)
            out[n] = energy_release_rate(v, slope) - self.toughness(pos)
        return out


@dataclass(frozen=True)
class InitialBranchResult:
    """End of the initial branch: t_star = tau_-^-1(0), l_star = t_star."""

    t_star: float
    ell_star: float
    ell_star_prime: float
    authoritative: bool
    front: Optional[FrontCurve] = None


@dataclass(frozen=True, eq=False)
class BranchResult:
    """Admissible final branch on [t_bar_star, T]."""

    curve: FrontCurve
    t_bar_star: float
    ell_bar_star: float
    ell_bar_star_prime: float
    alpha: float
    alternative_admissible: np.ndarray
    moving: np.ndarray

    @property
    def is_static(self) -> bool:
        return not bool(np.any(self.moving))


# =============================================================================
# Reports
# =============================================================================

@dataclass(frozen=True)
class CheckEntry:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class CheckReport:
    checks: List[CheckEntry] = field(default_factory=list)

    def add(self, name: str, residual: float, tolerance: float, detail: str = "") -> CheckEntry:
        entry = CheckEntry(name, bool(residual <= tolerance), float(residual), detail)
        self.checks.append(entry)
        return entry

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[CheckEntry]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": "success" if self.passed else "error",
            "checks": [
                {"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                for c in self.checks
            ],
        }


# =============================================================================
# Compatibility predicates
# =============================================================================

def _front_start_condition(y1_end: float, y0p_end: float, kappa: float) -> float:
    """Right-hand side of the C1 front-start relation for y1(ell0)."""
    jump = 0.5 * (y1_end - y0p_end) ** 2
    return -max((jump - kappa) / (jump + kappa), 0.0) * y0p_end


def check_initial_compatibility(
    state: InitialState,
    u0: float,
    uprime0: float,
    kappa: Optional[Toughness],
    tol: Optional[float] = None,
) -> CheckReport:
    """
    Compatibility of initial data with the control and the toughness.

    C01 needs y0(0) = u(0) and y0(ell0) = 0.  C1 additionally needs
    y1(0) = u'(0) and, when a toughness is given, the front-start relation
    at ell0.  With ``kappa=None`` that last check is not part of the report.
    """
    ell0 = state.ell0
    value_tol = ANALYTIC_TOLERANCE if tol is None else tol
    slope_tol = sampled_tolerance(state.y0, state.y1) if tol is None else tol

    report = CheckReport()
    report.add("y0(0)=u(0)", abs(state.y0(0.0) - u0), value_tol)
    report.add("y0(ell0)=0", abs(state.y0(ell0)), value_tol)
    if state.regularity == Regularity.C1:
        report.add("y1(0)=u'(0)", abs(state.y1(0.0) - uprime0), slope_tol)
        if kappa is None:
            return report
        y1_end, yp_end = state.y1(ell0), state.y0_prime(ell0)
        required = _front_start_condition(y1_end, yp_end, kappa(ell0))
        report.add("front_start", abs(y1_end - required), slope_tol, f"requires y1(ell0)={required:.6g}")
    return report


def classify_final_state(target: TargetState, kappa: Toughness, tol: Optional[float] = None) -> float:
    """
    Terminal speed alpha a C1 trajectory must have to end in ``target``.

    Passive states (ybar1(ellbar0) = 0) give alpha = 0.  Active states need
    2 kappa < |ybar0'(ellbar0)|^2 and ybar1 = -alpha ybar0' at ellbar0 with
    alpha = sqrt(1 - 2 kappa / |ybar0'|^2).
    """
    L = target.ellbar0
    value_tol = ANALYTIC_TOLERANCE if tol is None else tol
    slope_tol = sampled_tolerance(target.ybar0, target.ybar1) if tol is None else tol
    y1_end = target.ybar1(L)
    yp_end = target.ybar0_prime(L)
    k = kappa(L)

    passive = abs(y1_end) <= value_tol
    active_alpha = None
    if yp_end * yp_end > 2.0 * k:
        alpha = math.sqrt(1.0 - 2.0 * k / (yp_end * yp_end))
        if abs(y1_end + alpha * yp_end) <= slope_tol:
            active_alpha = alpha

    if passive and active_alpha is not None:
        message = f"target is both passive and active (alpha={active_alpha:.3g}); treating as passive"
        logger.warning(message)
        warnings.warn(message, AmbiguityNote, stacklevel=2)
        return 0.0
    if passive:
        return 0.0
    if active_alpha is not None:
        return active_alpha
    raise IncompatibleTarget(
        f"target is neither passive nor active at ellbar0={L}: "
        f"ybar1={y1_end:.6g}, ybar0'={yp_end:.6g}, kappa={k:.6g}"
    )


def check_damping_bound(
    target: TargetState,
    kappa_at_front_along_tau: Union[SampledFunction, float],
    tol: float = 1e-9,
) -> CheckReport:
    """|ybar1 + ybar0'|^2 <= 2 kappa along the terminal characteristics."""
    part = target.damping_part
    lhs = part.values ** 2
    if isinstance(kappa_at_front_along_tau, SampledFunction):
        x = np.clip(part.abscissae, *kappa_at_front_along_tau.domain)
        rhs = 2.0 * np.asarray(kappa_at_front_along_tau(x))
    else:
        rhs = np.full_like(lhs, 2.0 * float(kappa_at_front_along_tau))
    excess = lhs - rhs
    worst = int(np.argmax(excess))
    report = CheckReport()
    report.add(
        "damping_bound",
        max(float(excess[worst]), 0.0),
        tol,
        f"worst at x={part.abscissae[worst]:.6g}",
    )
    return report


def check_final_set(target: TargetState, kappa: Toughness, tol: Optional[float] = None) -> CheckReport:
    """Admissibility of the target: ybar0(ellbar0) = 0, plus classification for C1."""
    report = CheckReport()
    report.add("ybar0(ellbar0)=0", abs(target.ybar0(target.ellbar0)), ANALYTIC_TOLERANCE if tol is None else tol)
    if target.regularity == Regularity.C1:
        try:
            alpha = classify_final_state(target, kappa, tol)
            report.add("terminal_slope", 0.0, 0.0, f"alpha={alpha:.17g}")
        except IncompatibleTarget as exc:
            report.checks.append(CheckEntry("terminal_slope", False, float("inf"), str(exc)))
    return report

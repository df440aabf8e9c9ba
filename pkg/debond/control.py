"""
Exact boundary control synthesis.

==============================================================================
                         HOW IT WORKS
==============================================================================

A control is built by prescribing the front and the trace slope f' on
[0, T] and solving the trace relations for u'.  The s-axis (s = t - l(t))
splits into three stages:

    (0, tau_-(t_bar_star)]          Stage 1: grow the front from l_star to
                                    l_bar_star over [t_star, t_bar_star]
    (tau_-(t_bar_star), tau_-(T)]   Stage 2: ride the final branch L; f' is
                                    chosen so Griffith reproduces L'
    (tau_-(T), T]                   Stage 3: emit the left-going part of the
                                    target, f'(s) = 1/2 (ybar1 - ybar0')(T - s)

Before s = 0 the front is fixed by the initial data (the initial branch).
Given f' everywhere, u' follows pointwise:

    s in (0, ell0]:  u'(s) = f'(s) + 1/2 (y0' + y1)(s)
    s > ell0:        u'(s) = f'(s) - f'(echo(s)) (1 - l')/(1 + l')

and u = y0(0) + integral of u'.

Lipschitz controls use a linear Stage-1 front.  C1 controls use a front
whose speed is continuous, with zero-speed stretches at t_star (if
l_star' = 0), at t_bar_star (if l_bar_star' = 0) and around the midpoint;
on those stretches f' is free inside the band 2 f'^2 <= kappa and is used
to change sign continuously.

==============================================================================
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .branch import static_final_branch
from .errors import (
    ContinuityFailure,
    DomainError,
    IncompatibleData,
    IncompatibleTarget,
    InfeasibleTime,
)
from .forward import SolverConfig, reconstruct_state, solve_front, solve_initial_branch
from .func1d import SampledFunction
from .model import (
    BranchResult,
    ControlSignal,
    FrontCurve,
    InitialBranchResult,
    InitialState,
    Regularity,
    SolutionRecord,
    TargetState,
    Toughness,
    check_final_set,
    check_initial_compatibility,
    classify_final_state,
    reflection_factor,
    speed_to_fprime_magnitude,
    threshold_magnitude,
)

logger = logging.getLogger("debond.control")

TIME_TOLERANCE = 1e-12
DEFAULT_DELTA_FRACTION = 0.05
DEFAULT_RAMP_FRACTION = 0.25
# ramp fractions tried by the cruise profile, nearest the default first
RAMP_FRACTIONS = tuple(sorted((k / 100 for k in range(1, 51)), key=lambda r: abs(r - DEFAULT_RAMP_FRACTION)))
# bound on |df'/ds| along a C1 Stage-1 trace
FPRIME_SLOPE_BUDGET = 2.0


class PlanCase(str, Enum):
    STATIC_MATCH = "static_match"
    A = "a"   # l_star' > 0, l_bar_star' > 0
    B = "b"   # l_star' = 0, l_bar_star' > 0
    C = "c"   # l_star' > 0, l_bar_star' = 0
    D = "d"   # l_star' = 0, l_bar_star' = 0


def _case_for(ell_star_prime: float, ell_bar_star_prime: float) -> PlanCase:
    if ell_star_prime > 0:
        return PlanCase.A if ell_bar_star_prime > 0 else PlanCase.C
    return PlanCase.B if ell_bar_star_prime > 0 else PlanCase.D


def _sign(x: float, fallback: float = 1.0) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return fallback


# =============================================================================
# Data types
# =============================================================================

@dataclass(frozen=True, eq=False)
class InflationPlan:
    """How the front is grown from l_star to l_bar_star in Stage 1."""

    t_star: float
    ell_star: float
    ell_star_prime: float
    t_bar_star: float
    ell_bar_star: float
    ell_bar_star_prime: float
    v: float
    t_circ: float
    delta: float
    case: PlanCase
    front_segment: FrontCurve

    def to_lines(self) -> List[str]:
        return [
            f"case={self.case.value}",
            f"v={self.v:.17g}",
            f"delta={self.delta:.17g}",
            f"t_circ={self.t_circ:.17g}",
            f"t_star={self.t_star:.17g}",
            f"ell_star={self.ell_star:.17g}",
            f"ell_star_prime={self.ell_star_prime:.17g}",
            f"t_bar_star={self.t_bar_star:.17g}",
            f"ell_bar_star={self.ell_bar_star:.17g}",
            f"ell_bar_star_prime={self.ell_bar_star_prime:.17g}",
        ]


@dataclass(frozen=True)
class StageBoundaries:
    """Stage intervals on the s-axis: (0, sigma1], (sigma1, sigma2], (sigma2, T]."""

    sigma1: float
    sigma2: float
    T: float

    def intervals(self) -> List[Tuple[float, float]]:
        return [(0.0, self.sigma1), (self.sigma1, self.sigma2), (self.sigma2, self.T)]


class StagedTrace:
    """
    f' on [-ell0, T] assembled from the initial data and the three stages.

    Pieces are half-open on the left as in (a, b]; ``right=True`` evaluates
    the right limit at a boundary instead.
    """

    def __init__(self, initial: InitialState, stages: StageBoundaries,
                 pieces: Sequence[SampledFunction]):
        self.initial = initial
        self.stages = stages
        self.pieces = tuple(pieces)
        self._bounds = np.array([0.0, stages.sigma1, stages.sigma2, stages.T])

    def __call__(self, s: float, right: bool = False) -> float:
        idx = int(np.searchsorted(self._bounds, s, side="right" if right else "left"))
        if idx == 0:
            if s < -self.initial.ell0 * (1 + 1e-10):
                raise DomainError(f"trace queried at s={s:.6g} before -ell0")
            return self.initial.left_trace_slope(max(s, -self.initial.ell0))
        return self.pieces[min(idx, 3) - 1](s)


@dataclass(frozen=True, eq=False)
class SynthesisReport:
    control: ControlSignal
    plan: InflationPlan
    branch: BranchResult
    initial_branch: InitialBranchResult
    stages: StageBoundaries
    front: FrontCurve
    trace: StagedTrace
    regularity: Regularity
    junction_residual: float
    boundary_jumps: Dict[str, float]
    max_uprime_step: float
    max_speed_step: float

    @property
    def max_jumps(self) -> Dict[str, float]:
        """Largest one-sided jump of u' at the stage boundaries, and largest nodal steps of u' and l'."""
        return {
            "uprime_boundary": max(self.boundary_jumps.values()),
            "uprime_step": self.max_uprime_step,
            "speed_step": self.max_speed_step,
        }

    def plan_lines(self) -> List[str]:
        lines = [f"regularity={self.regularity.value}"] + self.plan.to_lines()
        for name, (a, b) in zip(("stage1", "stage2", "stage3"), self.stages.intervals()):
            lines.append(f"{name}=({a:.17g}, {b:.17g}]")
        lines.append(f"junction_residual={self.junction_residual:.17g}")
        return lines


@dataclass(frozen=True, eq=False)
class VerificationReport:
    front_error: float
    displacement_error: float
    velocity_error: float
    solution: SolutionRecord

    def passed(self, front_tol: float, displacement_tol: float, velocity_tol: float) -> bool:
        return (
            self.front_error <= front_tol
            and self.displacement_error <= displacement_tol
            and self.velocity_error <= velocity_tol
        )

    def to_dict(self) -> Dict[str, float]:
        return {
            "front_error": self.front_error,
            "displacement_error": self.displacement_error,
            "velocity_error": self.velocity_error,
        }


# =============================================================================
# Trace and control kernels
# =============================================================================

def fprime_for_prescribed_front(
    front: FrontCurve,
    kappa: Toughness,
    signs: Sequence[float] = (1.0,),
    start_value: Optional[float] = None,
    end_value: Optional[float] = None,
) -> SampledFunction:
    """
    Trace slope on tau_-(front) that makes Griffith reproduce the front.

    Moving nodes get |f'| = speed_to_fprime_magnitude(l', kappa(l)), with the
    sign of the k-th moving run taken from ``signs[k]`` (the last sign is
    reused).  Zero-speed runs interpolate linearly in s between their end
    values, clipped to the band 2 f'^2 <= kappa: a run next to a moving run
    ends on the threshold with that run's sign, a run at either end of the
    segment uses ``start_value`` / ``end_value`` (0 if neither is given).
    """
    s = front.times - front.positions
    speeds = front.speeds
    thresholds = np.array([threshold_magnitude(kappa(p)) for p in front.positions])
    values = np.zeros_like(s)
    moving = speeds > 0.0
    n = s.size

    run_sign = np.zeros(n)
    k = -1
    for i in range(n):
        if moving[i]:
            if i == 0 or not moving[i - 1]:
                k += 1
            run_sign[i] = signs[min(k, len(signs) - 1)]
            values[i] = run_sign[i] * speed_to_fprime_magnitude(speeds[i], kappa(front.positions[i]))

    if start_value is None and end_value is None:
        start_value = end_value = 0.0
    elif start_value is None:
        start_value = end_value
    elif end_value is None:
        end_value = start_value

    i = 0
    while i < n:
        if moving[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and not moving[j + 1]:
            j += 1
        left = start_value if i == 0 else run_sign[i - 1] * thresholds[i]
        right = end_value if j == n - 1 else run_sign[j + 1] * thresholds[j]
        if j == i:
            values[i] = right if j < n - 1 else left
        else:
            w = (s[i:j + 1] - s[i]) / (s[j] - s[i])
            values[i:j + 1] = left + w * (right - left)
        values[i:j + 1] = np.clip(values[i:j + 1], -thresholds[i:j + 1], thresholds[i:j + 1])
        i = j + 1

    return SampledFunction(s, values)


def uprime_from_fprime(
    fprime: Callable[..., float],
    front: FrontCurve,
    initial: InitialState,
    s: float,
    right: bool = False,
) -> float:
    """
    The control slope u'(s) that makes the trace relations hold at s.

    ``fprime`` is called as ``fprime(s)``; when ``right`` is set it is
    called with ``right=True`` so piecewise traces return right limits.
    """
    kw = {"right": True} if right else {}
    fp = fprime(s, **kw)
    if s <= initial.ell0 and not (right and s == initial.ell0):
        return fp + initial.incoming(s)
    t_src = front.tau_plus.inverse(s)
    echo = t_src - float(front.position(t_src))
    if echo < -initial.ell0 * (1 + 1e-10):
        raise DomainError(f"echo point {echo:.6g} of s={s:.6g} precedes -ell0")
    return fp - fprime(max(echo, -initial.ell0)) * reflection_factor(float(front.speed(t_src)))


# =============================================================================
# Stage 1 fronts
# =============================================================================

def _ramp_time(va: float, vb: float, kappa_max: float) -> float:
    """Shortest linear speed ramp from va to vb with |df'/ds| <= FPRIME_SLOPE_BUDGET."""
    top = max(va, vb)
    if top <= 0.0:
        return 0.0
    # along a moving run df'/ds = f' l'' / ((1 - l')(1 - l'^2)), largest at the top speed
    steepness = speed_to_fprime_magnitude(top, kappa_max) / ((1.0 - top) * (1.0 - top * top))
    return abs(vb - va) * steepness / FPRIME_SLOPE_BUDGET


def _cruise_profile(a: float, b: float, va: float, vb: float, gain: float, vmax: float,
                    kappa_max: Optional[float] = None):
    """
    Piecewise-linear speed on [a, b] from va to vb with integral ``gain``.

    Ramp to a cruise speed P, hold, ramp to vb.  Ramp fractions are tried
    nearest DEFAULT_RAMP_FRACTION first; the first one with 0 < P < vmax
    wins.  With ``kappa_max`` both ramps must also last ``_ramp_time``.
    """
    length = b - a
    avg = gain / length
    if not 0 < avg < vmax:
        raise InfeasibleTime(f"average speed {avg:.6g} needed on [{a:.6g}, {b:.6g}]")
    mean_end = 0.5 * (va + vb)
    for r in RAMP_FRACTIONS:
        P = (avg - r * mean_end) / (1.0 - r)
        if not 0 < P < vmax:
            continue
        if kappa_max is not None and r * length < max(_ramp_time(va, P, kappa_max), _ramp_time(P, vb, kappa_max)):
            continue
        return [a, a + r * length, b - r * length, b], [va, P, P, vb]
    raise InfeasibleTime(f"no cruise speed below {vmax} reaches gain {gain:.6g} on [{a:.6g}, {b:.6g}]")


def _front_from_knots(knots: Sequence[float], knot_speeds: Sequence[float], ell_start: float,
                      ell_end: float, h: float) -> FrontCurve:
    knots = np.asarray(knots, dtype=float)
    knot_speeds = np.asarray(knot_speeds, dtype=float)
    grid = [knots[0]]
    for a, b in zip(knots[:-1], knots[1:]):
        if b - a <= TIME_TOLERANCE * (knots[-1] - knots[0]):
            continue
        m = max(1, int(math.ceil((b - a) / h)))
        grid.extend(np.linspace(a, b, m + 1)[1:])
    t = np.array(grid)
    v = np.interp(t, knots, knot_speeds)
    pos = ell_start + cumulative_trapezoid(v, t, initial=0.0)
    pos[-1] = ell_end
    return FrontCurve(t, np.maximum.accumulate(pos), v)


def _linear_stage1(ib: InitialBranchResult, br: BranchResult, cfg: SolverConfig) -> Tuple[FrontCurve, float]:
    span = br.t_bar_star - ib.t_star
    v = (br.ell_bar_star - ib.ell_star) / span
    if v <= TIME_TOLERANCE:
        v = 0.0
    if v >= cfg.max_speed:
        raise InfeasibleTime(f"Stage-1 speed {v:.6g} is not below 1")
    t = cfg.grid(ib.t_star, br.t_bar_star)
    pos = ib.ell_star + v * (t - ib.t_star)
    pos[-1] = br.ell_bar_star
    return FrontCurve(t, pos, np.full(t.size, v)), v


def _plateau_floor(kappa_max: float, v0: float, v1: float, end_values: Tuple[float, float]) -> float:
    """
    Narrowest plateau over which f' can swing without |df'/ds| exceeding the budget.

    The middle plateau is 2 delta wide and swings by at most 2 thresholds;
    a plateau at either end is delta wide and swings from the end value to
    the threshold.
    """
    band = threshold_magnitude(kappa_max)
    swing = band
    if v0 == 0:
        swing = max(swing, band + abs(end_values[0]))
    if v1 == 0:
        swing = max(swing, band + abs(end_values[1]))
    return swing / FPRIME_SLOPE_BUDGET


def _c1_stage1(ib: InitialBranchResult, br: BranchResult, cfg: SolverConfig, kappa: Toughness,
               end_values: Tuple[float, float],
               delta_fraction: float = DEFAULT_DELTA_FRACTION) -> Tuple[FrontCurve, PlanCase, float, float]:
    """
    C1 Stage-1 front from (t_star, l_star) to (t_bar_star, l_bar_star).

    ``end_values`` are f' at t_star - l_star and at the Stage-2 junction.
    Plateaus are at least ``_plateau_floor`` wide and ramps at least
    ``_ramp_time`` long, which keeps the trace slope within
    FPRIME_SLOPE_BUDGET.
    """
    t0, t1 = ib.t_star, br.t_bar_star
    v0, v1 = ib.ell_star_prime, br.ell_bar_star_prime
    span = t1 - t0
    gain = br.ell_bar_star - ib.ell_star
    t_circ = 0.5 * (t0 + t1)

    if gain <= TIME_TOLERANCE * span:
        if v0 > 0 or v1 > 0:
            raise InfeasibleTime("l_star = l_bar_star requires both end speeds to vanish")
        front = _front_from_knots([t0, t1], [0.0, 0.0], ib.ell_star, br.ell_bar_star, cfg.h)
        return front, PlanCase.STATIC_MATCH, 0.0, t_circ

    case = _case_for(v0, v1)
    kappa_max = max(kappa(float(x)) for x in np.linspace(ib.ell_star, br.ell_bar_star, 17))
    floor = _plateau_floor(kappa_max, v0, v1, end_values)
    delta = max(delta_fraction * span, floor)
    last_error = None
    for _ in range(30):
        a1 = t0 + (delta if v0 == 0 else 0.0)
        b1 = t_circ - delta
        a2 = t_circ + delta
        b2 = t1 - (delta if v1 == 0 else 0.0)
        L1, L2 = b1 - a1, b2 - a2
        try:
            if L1 <= 0 or L2 <= 0:
                raise InfeasibleTime("plateaus leave no time to move")
            g1 = gain * L1 / (L1 + L2)
            k1, s1 = _cruise_profile(a1, b1, v0, 0.0, g1, cfg.max_speed, kappa_max)
            k2, s2 = _cruise_profile(a2, b2, 0.0, v1, gain - g1, cfg.max_speed, kappa_max)
        except InfeasibleTime as exc:
            last_error = exc
            if delta <= floor:
                break
            delta = max(0.5 * delta, floor)
            continue
        knots, speeds = [], []
        if v0 == 0:
            knots.append(t0)
            speeds.append(0.0)
        knots += k1 + k2
        speeds += s1 + s2
        if v1 == 0:
            knots.append(t1)
            speeds.append(0.0)
        front = _front_from_knots(knots, speeds, ib.ell_star, br.ell_bar_star, cfg.h)
        return front, case, delta, t_circ
    raise InfeasibleTime(f"cannot grow the front by {gain:.6g} in time {span:.6g}: {last_error}")


# =============================================================================
# Assembly
# =============================================================================

def _merge_fronts(parts: Sequence[FrontCurve]) -> FrontCurve:
    times, pos, speeds = [parts[0].times], [parts[0].positions], [parts[0].speeds]
    for part in parts[1:]:
        cut = 1 if abs(part.times[0] - times[-1][-1]) <= TIME_TOLERANCE * max(1.0, part.times[-1]) else 0
        if cut:
            # keep the right-hand speed at the junction node
            times[-1], pos[-1], speeds[-1] = times[-1][:-1], pos[-1][:-1], speeds[-1][:-1]
        times.append(part.times)
        pos.append(part.positions)
        speeds.append(part.speeds)
    return FrontCurve(np.concatenate(times), np.maximum.accumulate(np.concatenate(pos)), np.concatenate(speeds))


def _stage2_piece(target: TargetState, br: BranchResult, T: float) -> SampledFunction:
    curve = br.curve
    s = curve.times - curve.positions
    x = np.clip(curve.times + curve.positions - T, 0.0, target.ellbar0)
    part = target.damping_part(x)
    v = curve.speeds
    return SampledFunction(s, -0.5 * part * (1.0 + v) / (1.0 - v))


def _stage3_piece(target: TargetState, T: float) -> SampledFunction:
    rad = target.radiating_part
    return SampledFunction(T - rad.abscissae[::-1], 0.5 * rad.values[::-1])


def _uprime_grid(breaks: Sequence[float], T: float, h: float) -> np.ndarray:
    pts = sorted({float(b) for b in breaks if 0.0 <= b <= T})
    grid = [0.0]
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= TIME_TOLERANCE * T:
            continue
        m = max(1, int(math.ceil((b - a) / h)))
        grid.extend(np.linspace(a, b, m + 1)[1:])
    return np.array(grid)


def _distinct(points: Sequence[float], T: float) -> List[float]:
    """Sorted points with near-coincident ones merged into the first."""
    out: List[float] = []
    for b in sorted(float(p) for p in points):
        if not out or b - out[-1] > TIME_TOLERANCE * T:
            out.append(b)
    return out


def _assemble(
    initial: InitialState,
    target: TargetState,
    kappa: Toughness,
    T: float,
    ib: InitialBranchResult,
    br: BranchResult,
    stage1_front: FrontCurve,
    stage1_trace: SampledFunction,
    plan: InflationPlan,
    cfg: SolverConfig,
    regularity: Regularity,
) -> SynthesisReport:
    front = _merge_fronts([ib.front, stage1_front, br.curve])
    stages = StageBoundaries(
        sigma1=br.t_bar_star - br.ell_bar_star,
        sigma2=T - target.ellbar0,
        T=T,
    )
    trace = StagedTrace(initial, stages, [stage1_trace, _stage2_piece(target, br, T), _stage3_piece(target, T)])

    ell0 = initial.ell0
    inner = _distinct([b for b in (ell0, stages.sigma1, stages.sigma2) if 0.0 < b < T], T)
    s_grid = _uprime_grid([0.0, T] + inner, T, cfg.h)
    up = np.array([uprime_from_fprime(trace, front, initial, s, right=(i == 0)) for i, s in enumerate(s_grid)])

    # sharpen the jumps of Lipschitz controls at the stage boundaries
    if regularity == Regularity.C01:
        eps = 1e-9 * T
        sharp = [b for b in inner if b + eps < T and np.min(np.abs(s_grid - (b + eps))) > 0.5 * eps]
        if sharp:
            extra = [b + eps for b in sharp]
            up_extra = [uprime_from_fprime(trace, front, initial, b, right=True) for b in sharp]
            order = np.argsort(np.concatenate((s_grid, extra)), kind="stable")
            s_grid = np.concatenate((s_grid, extra))[order]
            up = np.concatenate((up, up_extra))[order]

    u = float(initial.y0(0.0)) + cumulative_trapezoid(up, s_grid, initial=0.0)
    control = ControlSignal(SampledFunction(s_grid, u), SampledFunction(s_grid, up), regularity)

    stage2_end = trace.pieces[1](stages.sigma2)
    stage3_start = trace.pieces[2](stages.sigma2)
    junction_residual = abs(stage2_end - stage3_start)

    jumps = {}
    for name, b in (("ell0", ell0), ("sigma1", stages.sigma1), ("sigma2", stages.sigma2)):
        if 0.0 < b < T:
            jumps[name] = abs(
                uprime_from_fprime(trace, front, initial, b, right=True)
                - uprime_from_fprime(trace, front, initial, b)
            )
    jumps["s=0"] = abs(up[0] - float(initial.y1(0.0)))
    report = SynthesisReport(
        control=control,
        plan=plan,
        branch=br,
        initial_branch=ib,
        stages=stages,
        front=front,
        trace=trace,
        regularity=regularity,
        junction_residual=junction_residual,
        boundary_jumps=jumps,
        max_uprime_step=float(np.max(np.abs(np.diff(up)))),
        max_speed_step=float(np.max(np.abs(np.diff(front.speeds)))),
    )
    logger.info(
        f"control synthesized ({regularity.value}, case {plan.case.value}): "
        f"stages (0, {stages.sigma1:.6f}], ({stages.sigma1:.6f}, {stages.sigma2:.6f}], ({stages.sigma2:.6f}, {T:.6f}]"
    )
    return report


def _check_initial(initial: InitialState, kappa: Toughness) -> None:
    report = check_initial_compatibility(initial, initial.y0(0.0), initial.y1(0.0), kappa)
    if not report.passed:
        detail = ", ".join(f"{c.name} (residual {c.residual:.3g})" for c in report.failures())
        raise IncompatibleData(f"initial data not compatible: {detail}")


def _check_target(target: TargetState, kappa: Toughness) -> None:
    report = check_final_set(target, kappa)
    if not report.passed:
        detail = ", ".join(f"{c.name} (residual {c.residual:.3g})" for c in report.failures())
        raise IncompatibleTarget(f"target not admissible: {detail}")


def _check_time(ib: InitialBranchResult, br: BranchResult, c1: bool) -> None:
    tol = TIME_TOLERANCE * max(1.0, br.t_bar_star)
    if br.ell_bar_star < ib.ell_star - tol:
        raise InfeasibleTime(f"l_bar_star={br.ell_bar_star:.9g} is below l_star={ib.ell_star:.9g}")
    if not br.ell_bar_star < br.t_bar_star - tol:
        raise InfeasibleTime(f"l_bar_star={br.ell_bar_star:.9g} must stay below t_bar_star={br.t_bar_star:.9g}")
    if c1 and abs(br.ell_bar_star - ib.ell_star) <= tol and (ib.ell_star_prime > 0 or br.ell_bar_star_prime > 0):
        raise InfeasibleTime("equal start and end positions need both end speeds to vanish")


def _solver_for(T: float, cfg: SolverConfig) -> SolverConfig:
    if cfg.T == T:
        return cfg
    return SolverConfig(T=T, h=cfg.h, scheme=cfg.scheme, speed_clamp_eps=cfg.speed_clamp_eps)


# =============================================================================
# Synthesizers
# =============================================================================

def synthesize_c01(initial: InitialState, target: TargetState, kappa: Toughness, T: float,
                   branch: BranchResult, cfg: SolverConfig) -> SynthesisReport:
    """
    Lipschitz control steering ``initial`` to ``target`` along ``branch``.

    Raises:
        IncompatibleData: initial or target data fail their compatibility checks.
        InfeasibleTime: l_star <= l_bar_star < t_bar_star fails.
    """
    cfg = _solver_for(T, cfg)
    _check_initial(initial, kappa)
    _check_target(target, kappa)
    ib = solve_initial_branch(initial, kappa, cfg)
    _check_time(ib, branch, c1=False)

    segment, v = _linear_stage1(ib, branch, cfg)
    junction = -0.5 * target.damping_part(0.0) * (1 + branch.ell_bar_star_prime) / (1 - branch.ell_bar_star_prime)
    if v > 0:
        trace1 = fprime_for_prescribed_front(segment, kappa, signs=(_sign(junction),))
        case = _case_for(ib.ell_star_prime, branch.ell_bar_star_prime)
    else:
        trace1 = fprime_for_prescribed_front(segment, kappa, start_value=0.0, end_value=0.0)
        case = PlanCase.STATIC_MATCH
    plan = InflationPlan(
        t_star=ib.t_star, ell_star=ib.ell_star, ell_star_prime=ib.ell_star_prime,
        t_bar_star=branch.t_bar_star, ell_bar_star=branch.ell_bar_star,
        ell_bar_star_prime=branch.ell_bar_star_prime,
        v=v, t_circ=0.5 * (ib.t_star + branch.t_bar_star), delta=0.0, case=case,
        front_segment=segment,
    )
    logger.info(f"Stage-1 linear front with v={v:.9f}")
    return _assemble(initial, target, kappa, T, ib, branch, segment, trace1, plan, cfg, Regularity.C01)


def synthesize_c1(initial: InitialState, target: TargetState, kappa: Toughness, T: float,
                  branch: BranchResult, cfg: SolverConfig,
                  delta_fraction: float = DEFAULT_DELTA_FRACTION) -> SynthesisReport:
    """
    C1 control steering ``initial`` to ``target`` along ``branch``.

    Raises:
        IncompatibleData: data are not C1-compatible or the branch does not
            end with the target's terminal slope.
        InfeasibleTime: the time condition fails or no C1 front fits.
        ContinuityFailure: an assembled jump in u' or l' exceeds tolerance.
    """
    cfg = _solver_for(T, cfg)
    if initial.regularity != Regularity.C1:
        raise IncompatibleData("C1 synthesis needs C1 initial data (l_star' is only a left limit otherwise)")
    _check_initial(initial, kappa)
    _check_target(target, kappa)
    alpha = classify_final_state(target, kappa)
    terminal = float(branch.curve.speeds[-1])
    if abs(terminal - alpha) > 10 * cfg.h + 1e-9:
        raise IncompatibleData(f"branch ends with speed {terminal:.6g}, target needs alpha={alpha:.6g}")

    ib = solve_initial_branch(initial, kappa, cfg)
    _check_time(ib, branch, c1=True)
    fp0 = initial.left_trace_slope(0.0)
    junction = -0.5 * target.damping_part(0.0) * (1 + branch.ell_bar_star_prime) / (1 - branch.ell_bar_star_prime)
    segment, case, delta, t_circ = _c1_stage1(ib, branch, cfg, kappa, (fp0, junction), delta_fraction)

    sign_right = _sign(junction, _sign(fp0))
    sign_left = _sign(fp0) if ib.ell_star_prime > 0 else sign_right
    trace1 = fprime_for_prescribed_front(
        segment, kappa, signs=(sign_left, sign_right), start_value=fp0, end_value=junction
    )
    plan = InflationPlan(
        t_star=ib.t_star, ell_star=ib.ell_star, ell_star_prime=ib.ell_star_prime,
        t_bar_star=branch.t_bar_star, ell_bar_star=branch.ell_bar_star,
        ell_bar_star_prime=branch.ell_bar_star_prime,
        v=(branch.ell_bar_star - ib.ell_star) / (branch.t_bar_star - ib.t_star),
        t_circ=t_circ, delta=delta, case=case, front_segment=segment,
    )
    logger.info(f"Stage-1 C1 front: case {case.value}, delta={delta:.6f}")
    report = _assemble(initial, target, kappa, T, ib, branch, segment, trace1, plan, cfg, Regularity.C1)

    tol = 1e-6 + 10 * cfg.h
    identity = -0.5 * (1 + alpha) * target.ybar0_prime(target.ellbar0)
    limits = abs(report.trace.pieces[1](report.stages.sigma2) - identity)
    if report.max_uprime_step > tol or report.max_speed_step > tol:
        raise ContinuityFailure(
            f"C1 control steps by {report.max_uprime_step:.3g} in u' and {report.max_speed_step:.3g} "
            f"in l' between nodes, tolerance {tol:.3g}"
        )
    worst = max(list(report.boundary_jumps.values()) + [report.junction_residual, limits])
    if worst > tol:
        raise ContinuityFailure(f"C1 assembly jump {worst:.3g} exceeds {tol:.3g}: {report.boundary_jumps}")
    return report


def synthesize_static_c01(initial: InitialState, target: TargetState, kappa: Toughness, T: float,
                          cfg: SolverConfig) -> SynthesisReport:
    """Lipschitz synthesis along the static branch L = ellbar0."""
    branch = static_final_branch(target, kappa, T, cfg.h)
    if not T > 2.0 * target.ellbar0:
        raise InfeasibleTime(f"static steering needs T > 2 ellbar0 = {2.0 * target.ellbar0}, got T={T}")
    return synthesize_c01(initial, target, kappa, T, branch, cfg)


def synthesize_static_c1(initial: InitialState, target: TargetState, kappa: Toughness, T: float,
                         cfg: SolverConfig) -> SynthesisReport:
    """C1 synthesis along the static branch; the target must be passive."""
    branch = static_final_branch(target, kappa, T, cfg.h)
    y1_end = target.ybar1(target.ellbar0)
    if abs(y1_end) > 1e-8:
        raise IncompatibleTarget(f"static C1 steering needs ybar1(ellbar0) = 0, got {y1_end:.6g}")
    if not T > 2.0 * target.ellbar0:
        raise InfeasibleTime(f"static steering needs T > 2 ellbar0 = {2.0 * target.ellbar0}, got T={T}")
    return synthesize_c1(initial, target, kappa, T, branch, cfg)


# =============================================================================
# Round trip
# =============================================================================

def verify_control(control: ControlSignal, initial: InitialState, target: TargetState, kappa: Toughness,
                   cfg: SolverConfig, n: int = 401) -> VerificationReport:
    """Simulate under ``control`` and measure the distance to ``target`` at T."""
    sol = solve_front(initial, control, kappa, cfg)
    T = sol.horizon
    ell_T = float(sol.front.positions[-1])
    x = np.linspace(0.0, min(ell_T, target.ellbar0), n)
    y, dty, _ = reconstruct_state(sol, T, x)
    report = VerificationReport(
        front_error=abs(ell_T - target.ellbar0),
        displacement_error=float(np.max(np.abs(y - target.ybar0(x)))),
        velocity_error=float(np.max(np.abs(dty - target.ybar1(x)))),
        solution=sol,
    )
    logger.info(
        f"verification: |l(T)-ellbar0|={report.front_error:.3e}, "
        f"displacement {report.displacement_error:.3e}, velocity {report.velocity_error:.3e}"
    )
    return report


def verify_synthesis(report: SynthesisReport, initial: InitialState, target: TargetState, kappa: Toughness,
                     cfg: SolverConfig, n: int = 401) -> VerificationReport:
    return verify_control(report.control, initial, target, kappa, _solver_for(report.stages.T, cfg), n)

"""
Forward solver for the coupled front / trace system.

==============================================================================
                         HOW IT WORKS
==============================================================================

Given the initial data, a boundary control u and the toughness, the march
advances the front l on a uniform time grid.  At each node t_n it needs the
trace slope at the foot s = t_n - l_n of the left-going characteristic:

    s in [-ell0, 0]:  f'(s) = 1/2 (y1 - y0')(-s)            (initial data)
    s in (0, ell0]:   f'(s) = u'(s) - 1/2 (y0' + y1)(s)     (data + control)
    s > ell0:         f'(s) = u'(s) - w(tau_+^-1(s))        (reflection)

where w(t) = -f'(t - l) (1 - l')/(1 + l') is the amplitude reflected at
the front at time t.  tau_+^-1(s) always lies strictly before the current
node, so w is read from nodes that are already closed.  The front speed is
then given by Griffith's criterion and the front is advanced with an
explicit Euler or Heun (trapezoid predictor-corrector) step.

f' jumps where the foot crosses s = 0 and s = ell0.  A step during which
the foot passes one of these is split at the crossing.  Leading nodes at
which the front has not started to move are filled in one vectorised pass.

Every closed node stores f'(s), f(s) and w, which is all that is needed to
rebuild the trace anywhere on [-ell0, T] and, through the representation
y(t, x) = u(t+x) - f(t+x) + f(t-x), the displacement and its derivatives.

==============================================================================
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .errors import DomainError, HorizonExceeded, IncompatibleData, StepTooLarge
from .func1d import SampledFunction, antiderivative, linear_combination
from .model import (
    ControlSignal,
    FrontCurve,
    InitialBranchResult,
    InitialState,
    Regularity,
    SolutionRecord,
    Toughness,
    check_initial_compatibility,
    griffith_speed,
    reflection_factor,
)

logger = logging.getLogger("debond.forward")


class Scheme(str, Enum):
    EULER = "euler"
    HEUN = "heun"


@dataclass(frozen=True)
class SolverConfig:
    """
    Time stepping parameters.

    Args:
        T: Horizon.
        h: Nominal time step; the grid uses the largest step <= h that divides T.
        scheme: ``heun`` (default) or ``euler``.
        speed_clamp_eps: Speeds are clamped to 1 - eps.
    """

    T: float
    h: float = 1e-3
    scheme: Scheme = Scheme.HEUN
    speed_clamp_eps: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.T > 0:
            raise ValueError(f"horizon T must be positive, got {self.T}")
        if not self.h > 0:
            raise ValueError(f"time step h must be positive, got {self.h}")
        if not 0 < self.speed_clamp_eps < 1e-3:
            raise ValueError(f"speed_clamp_eps must lie in (0, 1e-3), got {self.speed_clamp_eps}")

    def check_step(self, ell0: float) -> None:
        if self.h > ell0 / 10.0:
            raise StepTooLarge(f"h={self.h} exceeds ell0/10={ell0 / 10.0}")

    def grid(self, t0: float = 0.0, t1: Optional[float] = None) -> np.ndarray:
        t1 = self.T if t1 is None else t1
        n = max(1, int(math.ceil((t1 - t0) / self.h - 1e-9)))
        return np.linspace(t0, t1, n + 1)

    @property
    def max_speed(self) -> float:
        return 1.0 - self.speed_clamp_eps


# =============================================================================
# Seed trace
# =============================================================================

@dataclass(frozen=True, eq=False)
class SeedTrace:
    """
    f' on [-ell0, ell0], fixed by the data and the control alone.

    The two halves are kept separate since f' may jump at s = 0 for
    Lipschitz data.
    """

    left: SampledFunction
    right: SampledFunction

    def slope(self, s: float) -> float:
        return self.left(s) if s <= 0.0 else self.right(s)


def _require_compatible(initial: InitialState, control: ControlSignal, kappa: Optional[Toughness]) -> None:
    # kappa=None leaves out the front-start relation, which needs a toughness
    report = check_initial_compatibility(initial, control.u(0.0), control.uprime(0.0), kappa)
    failures = report.failures()
    if failures:
        detail = ", ".join(f"{c.name} (residual {c.residual:.3g})" for c in failures)
        raise IncompatibleData(f"initial data incompatible with control: {detail}")


def _outgoing(initial: InitialState) -> SampledFunction:
    # 1/2 (y1 - y0') on [0, ell0]
    return linear_combination(0.5, initial.y1, -0.5, initial.y0_prime)


def seed_trace(initial: InitialState, control: ControlSignal, kappa: Optional[Toughness] = None) -> SeedTrace:
    """
    f' on [-ell0, 0] from the initial data and on (0, ell0] from data and control.

    The seed itself does not depend on the toughness.  When ``kappa`` is
    given, C1 data is also checked against the front-start relation.
    """
    _require_compatible(initial, control, kappa)
    ell0 = initial.ell0
    if control.horizon < ell0:
        # the seed only reaches as far as the control does
        ell0 = control.horizon
    out = _outgoing(initial)
    left = SampledFunction(-out.abscissae[::-1], out.values[::-1])
    right = linear_combination(1.0, control.uprime.restrict(0.0, ell0), -1.0, initial.incoming.restrict(0.0, ell0))
    return SeedTrace(left, right)


# =============================================================================
# March
# =============================================================================

def _lerp(xs: List[float], ys: List[float], x: float, size: Optional[int] = None) -> float:
    """``np.interp`` at a single point over the first ``size`` samples of two lists."""
    last = (len(xs) if size is None else size) - 1
    if x <= xs[0]:
        return ys[0]
    if x >= xs[last]:
        return ys[last]
    i = bisect_right(xs, x, 0, last) - 1
    x0 = xs[i]
    return ys[i] + (ys[i + 1] - ys[i]) * (x - x0) / (xs[i + 1] - x0)


def _table(fn: SampledFunction) -> Tuple[List[float], List[float]]:
    return fn.abscissae.tolist(), fn.values.tolist()


class _FrontMarch:
    """
    Node-by-node integration of the front.

    With ``control=None`` only the left seed is used (the front does not
    depend on u until t - l(t) > 0), which is what the initial branch needs.

    Node data lives in preallocated lists and single-point lookups go
    through ``_lerp``; the array evaluators are used for the leading
    resting nodes and for the trace tables once the march is done.  A node
    exactly on a kink of f' takes the right limit, as the next step does.
    """

    def __init__(self, initial: InitialState, kappa: Toughness, cfg: SolverConfig,
                 control: Optional[ControlSignal] = None, horizon: Optional[float] = None):
        self.initial = initial
        self.kappa = kappa
        self.cfg = cfg
        self.control = control
        self.ell0 = initial.ell0
        self.grid = cfg.grid(0.0, cfg.T if horizon is None else horizon)
        self.times = self.grid.tolist()

        size = len(self.times)
        self.pos = [0.0] * size
        self.speeds = [0.0] * size
        self.foot_slope = [0.0] * size
        self.foot_value = [0.0] * size
        self.reflected = [0.0] * size
        self.tplus = [0.0] * size
        self.known = 0
        self.clamped = 0

        out = _outgoing(initial)
        self._out = (out.abscissae, out.values)
        self._out_l = _table(out)
        self._inc_l = _table(initial.incoming)
        self._y0_l = _table(initial.y0)
        self._y1_l = _table(initial.y1)
        self._y1_cum = initial.y1._cumulative.tolist()
        self._y0_0 = float(initial.y0(0.0))
        # f' jumps where the foot crosses these
        self._breaks: Tuple[float, ...] = ()
        if control is not None:
            self._up = (control.uprime.abscissae, control.uprime.values)
            self._u = (control.u.abscissae, control.u.values)
            self._up_l = _table(control.uprime)
            self._u_l = _table(control.u)
            self._u0 = float(control.u(0.0))
            self._breaks = (0.0, self.ell0)
        self._kappa_const = kappa.value if kappa.is_constant else None

        self.known = self._resting_prefix()
        if self.known == 0:
            self.pos[0] = self.ell0
            self._close_node(0)
            self.known = 1

    # -- data integrals ------------------------------------------------------

    def _y1_integral(self, r: float) -> float:
        xs, vs = self._y1_l
        i = min(max(bisect_right(xs, r) - 1, 0), len(xs) - 2)
        d = r - xs[i]
        slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
        return self._y1_cum[i] + d * (vs[i] + 0.5 * slope * d)

    def _left_value(self, r: float) -> float:
        # f(-r) = 1/2 (y0(r) - y0(0)) - 1/2 int_0^r y1
        return 0.5 * (_lerp(*self._y0_l, r) - self._y0_0) - 0.5 * self._y1_integral(r)

    def _incoming_integral(self, s: float) -> float:
        return 0.5 * (_lerp(*self._y0_l, s) - self._y0_0) + 0.5 * self._y1_integral(s)

    # -- pointwise evaluators ------------------------------------------------

    def _kappa(self, x: float) -> float:
        return self._kappa_const if self._kappa_const is not None else self.kappa(x)

    def fprime(self, s: float, right: bool = True) -> float:
        if self.control is None or s < 0.0 or (s == 0.0 and not right):
            return _lerp(*self._out_l, -min(s, 0.0))
        up = _lerp(*self._up_l, s)
        if s < self.ell0 or (s == self.ell0 and not right):
            return up - _lerp(*self._inc_l, s)
        k = self.known
        t_src = _lerp(self.tplus, self.times, s, k)
        return up - _lerp(self.times, self.reflected, t_src, k)

    def fvalue(self, s: float) -> float:
        if self.control is None or s <= 0.0:
            return self._left_value(min(-min(s, 0.0), self.ell0))
        u = _lerp(*self._u_l, s)
        if s <= self.ell0:
            return u - self._u0 - self._incoming_integral(s)
        k = self.known
        t_src = _lerp(self.tplus, self.times, s, k)
        return u + _lerp(self.times, self.foot_value, t_src, k)

    def speed(self, s: float, ell: float, right: bool = True) -> float:
        v = griffith_speed(self.fprime(s, right), self._kappa(ell))
        if v > self.cfg.max_speed:
            self.clamped += 1
            logger.debug(f"speed {v:.12f} clamped at foot s={s:.6f}")
            return self.cfg.max_speed
        return v

    # -- array evaluators ----------------------------------------------------

    def _seed_many(self, s: np.ndarray, value: bool, right: bool) -> np.ndarray:
        """f or f' from data and control alone; only meaningful for s <= ell0."""
        r = np.clip(-s, 0.0, self.ell0)
        if value:
            left = 0.5 * (self.initial.y0(r) - self._y0_0) - 0.5 * antiderivative(self.initial.y1, r)
        else:
            left = np.interp(r, *self._out)
        if self.control is None:
            return left
        q = np.clip(s, 0.0, self.ell0)
        if value:
            incoming = 0.5 * (self.initial.y0(q) - self._y0_0) + 0.5 * antiderivative(self.initial.y1, q)
            mid = np.interp(q, *self._u) - self._u0 - incoming
        else:
            mid = np.interp(q, *self._up) - self.initial.incoming(q)
        return np.where(s < 0.0 if right else s <= 0.0, left, mid)

    def _trace_many(self, s, value: bool, right: bool, resting: bool = False) -> np.ndarray:
        """
        f (``value``) or f' on an array of feet.

        With ``resting`` the front is taken to sit at ell0 throughout, so the
        reflected amplitude is read off the trace 2 ell0 earlier instead of
        from closed nodes.
        """
        s = np.asarray(s, dtype=float)
        out = self._seed_many(s, value, right)
        if self.control is None:
            return out
        beyond = s >= self.ell0 if right else s > self.ell0
        if not beyond.any():
            return out
        sb = s[beyond]
        base = np.interp(sb, *(self._u if value else self._up))
        if resting:
            # w(t) = -f'(t - ell0) and f(t - l) = f(t - ell0) at a resting front
            out[beyond] = base + self._trace_many(sb - 2.0 * self.ell0, value, right, resting=True)
            return out
        k = self.known
        times = self.grid[:k]
        t_src = np.interp(sb, np.asarray(self.tplus[:k]), times)
        if value:
            out[beyond] = base + np.interp(t_src, times, np.asarray(self.foot_value[:k]))
        else:
            out[beyond] = base - np.interp(t_src, times, np.asarray(self.reflected[:k]))
        return out

    def trace_tables(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """f and f' on ``s``, left limits at the kinks."""
        return self._trace_many(s, True, right=False), self._trace_many(s, False, right=False)

    # -- node bookkeeping ----------------------------------------------------

    def _resting_prefix(self) -> int:
        """Close the leading nodes at which the front has not started to move."""
        s = self.grid - self.ell0
        fp = self._trace_many(s, False, right=True, resting=True)
        kappa = self._kappa(self.ell0)
        moving = 2.0 * fp * fp > kappa
        m = int(np.argmax(moving)) if moving.any() else s.size
        if m == 0:
            return 0
        fv = self._trace_many(s[:m], True, right=True, resting=True)
        self.pos[:m] = [self.ell0] * m
        self.foot_slope[:m] = fp[:m].tolist()
        self.reflected[:m] = (-fp[:m]).tolist()
        self.foot_value[:m] = fv.tolist()
        self.tplus[:m] = (self.grid[:m] + self.ell0).tolist()
        logger.debug(f"front at rest on the first {m} nodes")
        return m

    def _close_node(self, n: int) -> None:
        t, ell = self.times[n], self.pos[n]
        s = t - ell
        fp = self.fprime(s)
        v = griffith_speed(fp, self._kappa(ell))
        if v > self.cfg.max_speed:
            self.clamped += 1
            v = self.cfg.max_speed
        self.foot_slope[n] = fp
        self.speeds[n] = v
        self.reflected[n] = -fp * reflection_factor(v)
        self.foot_value[n] = self.fvalue(s)
        self.tplus[n] = t + ell

    def _next_break(self, s: float) -> Optional[float]:
        for b in self._breaks:
            if b > s:
                return b
        return None

    def _advance(self, ta: float, ell: float, ka: float, tb: float,
                 lo: float = -math.inf, hi: float = math.inf) -> float:
        """One Euler or Heun step from ``ta`` to ``tb``; the corrector foot is kept in [lo, hi]."""
        h = tb - ta
        predicted = ell + h * ka
        if self.cfg.scheme == Scheme.EULER:
            return predicted
        s = tb - predicted
        if s >= hi:
            kb = self.speed(hi, predicted, right=False)
        else:
            kb = self.speed(max(s, lo), predicted)
        return ell + 0.5 * h * (ka + kb)

    def step(self) -> None:
        n = self.known - 1
        t0, t1 = self.times[n], self.times[n + 1]
        ell, k1 = self.pos[n], self.speeds[n]
        s0 = t0 - ell
        b = self._next_break(s0)
        if b is not None and t1 - (ell + (t1 - t0) * k1) > b:
            # the foot passes a kink of f' inside the step: split it there
            tc = t0 + (b - s0) / (1.0 - k1)
            ell_c = self._advance(t0, ell, k1, tc, hi=b)
            kc = self.speed(max(tc - ell_c, b), ell_c)
            new = self._advance(tc, ell_c, kc, t1, lo=b)
        else:
            new = self._advance(t0, ell, k1, t1, hi=math.inf if b is None else b)
        self.pos[n + 1] = max(new, ell)
        if t1 - self.pos[n + 1] <= s0:
            raise StepTooLarge(f"t - l(t) stopped increasing at t={t1:.6g}")
        self._close_node(n + 1)
        self.known = n + 2

    def run(self) -> None:
        while self.known < len(self.times):
            self.step()
        if self.clamped:
            logger.warning(f"front speed clamped at {self.clamped} evaluations")

    def front(self, upto: Optional[int] = None) -> FrontCurve:
        k = self.known if upto is None else upto
        return FrontCurve(self.grid[:k].copy(), np.array(self.pos[:k]), np.array(self.speeds[:k]))


def _trace_grid(initial: InitialState, out: SampledFunction, T: float, h: float) -> np.ndarray:
    ell0 = initial.ell0
    left = np.union1d(out.abscissae, np.linspace(0.0, ell0, max(2, int(math.ceil(ell0 / h)) + 1)))
    pieces = [-left[::-1]]
    mid_end = min(ell0, T)
    pieces.append(np.linspace(0.0, mid_end, max(2, int(math.ceil(mid_end / h)) + 1))[1:])
    if T > ell0:
        pieces.append(np.linspace(ell0, T, max(2, int(math.ceil((T - ell0) / h)) + 1))[1:])
    grid = np.concatenate(pieces)
    keep = np.concatenate(([True], np.diff(grid) > 1e-12 * (grid[-1] - grid[0])))
    return grid[keep]


def solve_front(initial: InitialState, control: ControlSignal, kappa: Toughness, cfg: SolverConfig) -> SolutionRecord:
    """
    March the front from 0 to T under the control ``control``.

    Raises:
        StepTooLarge: h > ell0/10 or t - l(t) loses monotonicity.
        DomainError: the control does not cover [0, T].
        IncompatibleData: data and control fail the compatibility checks.
    """
    cfg.check_step(initial.ell0)
    if control.horizon < cfg.T - 1e-12 * cfg.T:
        raise DomainError(f"control defined up to {control.horizon}, horizon is {cfg.T}")
    _require_compatible(initial, control, kappa)

    march = _FrontMarch(initial, kappa, cfg, control)
    march.run()
    front = march.front()

    grid = _trace_grid(initial, _outgoing(initial), cfg.T, cfg.h)
    values, slopes = march.trace_tables(grid)

    logger.info(
        f"front solved on [0, {cfg.T}] with {front.times.size} nodes ({cfg.scheme.value}): "
        f"l(T)={front.positions[-1]:.6f}, max speed {front.speeds.max():.4f}"
    )
    return SolutionRecord(
        front=front,
        trace=SampledFunction(grid, values),
        trace_prime=SampledFunction(grid, slopes),
        control=control,
        initial=initial,
        toughness=kappa,
        foot_slope=np.array(march.foot_slope),
        foot_value=np.array(march.foot_value),
        reflected=np.array(march.reflected),
    )


def solve_initial_branch(initial: InitialState, kappa: Toughness, cfg: SolverConfig) -> InitialBranchResult:
    """
    Front motion fixed by the initial data alone, up to t_star = tau_-^-1(0).

    Raises:
        HorizonExceeded: t - l(t) does not reach 0 before cfg.T.
    """
    cfg.check_step(initial.ell0)
    march = _FrontMarch(initial, kappa, cfg)
    times = march.times

    def foot(n: int) -> float:
        return times[n] - march.pos[n]

    n = 0
    while foot(n) < 0.0:
        if n + 1 >= len(times):
            raise HorizonExceeded(f"initial branch does not end before t={cfg.T}")
        if march.known <= n + 1:
            march.step()
        n += 1

    theta = -foot(n - 1) / (foot(n) - foot(n - 1))
    t_star = float(times[n - 1] + theta * (times[n] - times[n - 1]))
    ell_star = t_star
    fp0 = march.fprime(0.0, right=False)
    ell_star_prime = min(griffith_speed(fp0, kappa(ell_star)), cfg.max_speed)

    keep = n if t_star - times[n - 1] > 1e-9 * (times[n] - times[n - 1]) else n - 1
    front = FrontCurve(
        np.append(march.grid[:keep], t_star),
        np.append(march.pos[:keep], ell_star),
        np.append(march.speeds[:keep], ell_star_prime),
    )
    authoritative = initial.regularity == Regularity.C1
    logger.info(
        f"initial branch ends at t*={t_star:.9f} with l*'={ell_star_prime:.6f}"
        + ("" if authoritative else " (left limit)")
    )
    return InitialBranchResult(t_star, ell_star, ell_star_prime, authoritative, front)




# =============================================================================
# Reconstruction
# =============================================================================

def reconstruct_state(sol: SolutionRecord, t: float, x_grid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    y, dy/dt and dy/dx at time ``t`` on ``x_grid``.

    Raises:
        DomainError: t outside [0, T] or some x outside [0, l(t)].
    """
    T = sol.horizon
    if not -1e-12 <= t <= T * (1 + 1e-12):
        raise DomainError(f"t={t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    x_arr = np.atleast_1d(np.asarray(x_grid, dtype=float))
    ell_t = float(sol.front.position(t))
    if np.any(x_arr < -1e-12) or np.any(x_arr > ell_t + 1e-9 * max(ell_t, 1.0)):
        raise DomainError(f"x outside [0, l(t)] = [0, {ell_t:.6g}] at t={t}")
    x_arr = np.clip(x_arr, 0.0, ell_t)

    initial, ell0 = sol.initial, sol.initial.ell0
    u0 = sol.control.u(0.0)
    y = np.empty_like(x_arr)
    dty = np.empty_like(x_arr)
    dxy = np.empty_like(x_arr)

    for i, x in enumerate(x_arr):
        plus, minus = t + x, t - x
        left_going = sol.trace_slope(minus)
        if plus < ell0:
            # undisturbed by the front: y = u(t+x) - f(t+x) + f(t-x) with the seed trace
            y[i] = u0 + initial.incoming_integral(plus) + sol.trace_value(minus)
            right_going = initial.incoming(plus)
        else:
            t_src = sol.front.tau_plus.inverse(plus)
            y[i] = sol.trace_value(minus) - float(np.interp(t_src, sol.front.times, sol.foot_value))
            right_going = sol.reflected_at(t_src)
        dty[i] = right_going + left_going
        dxy[i] = right_going - left_going
    return y, dty, dxy


def state_at(sol: SolutionRecord, t: float, n: int = 401) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Reconstruct (x, y, dy/dt, dy/dx) on a uniform grid of [0, l(t)]."""
    x = np.linspace(0.0, float(sol.front.position(t)), n)
    y, dty, dxy = reconstruct_state(sol, t, x)
    return x, y, dty, dxy


def toughness_along_terminal_characteristics(sol: SolutionRecord, kappa: Toughness, n: int = 401) -> SampledFunction:
    """kappa(l(tau_+^-1(x + T))) for x in [0, l(T)]."""
    T = sol.horizon
    x = np.linspace(0.0, float(sol.front.positions[-1]), n)
    t_src = sol.front.tau_plus.inverse(x + T)
    return SampledFunction(x, [kappa(float(p)) for p in sol.front.position(t_src)])


def terminal_state(sol: SolutionRecord, n: int = 401) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``state_at`` the horizon."""
    return state_at(sol, sol.horizon, n)

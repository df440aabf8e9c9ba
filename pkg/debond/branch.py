"""
Admissible final branches.

==============================================================================
                         HOW IT WORKS
==============================================================================

A trajectory ending in the target (ellbar0, ybar0, ybar1) at time T must,
on its last stretch [t_bar_star, T], follow a front curve L that is read
off the target alone.  With

    Y(t) = |(ybar1 + ybar0')(t + L(t) - T)|^2,      K(t) = 2 kappa(L(t))

the front speed must be either 0 (allowed only while Y <= K) or the moving
root (K - Y)/(K + Y).  Starting from L(T) = ellbar0 the curve is integrated
backward in time, one option chosen per node by a ``BranchPolicy``, until
the characteristic leaving the origin at t_bar_star reaches the front at
T, i.e. t_bar_star + L(t_bar_star) = T.

In C1 mode the speed must be continuous: the curve starts at the terminal
slope alpha of the target and may only switch between the static and the
moving option where both coincide (Y = K).

==============================================================================
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import C1SwitchViolation, ConstraintViolated, DeadEnd, InvalidToughness, NoTermination
from .model import BranchResult, FrontCurve, TargetState, Toughness, classify_final_state

logger = logging.getLogger("debond.branch")

COINCIDENCE_TOLERANCE = 1e-9


class BranchMode(str, Enum):
    PREFER_STATIC = "prefer_static"
    PREFER_MOVING = "prefer_moving"


@dataclass(frozen=True)
class BranchPolicy:
    """
    Selection rule among admissible branch speeds.

    Args:
        mode: Which option to take when both are admissible.
        c1_mode: Enforce a continuous speed starting from alpha.
        h: Backward step.
        switch_tol: Largest moving root at which a C1 switch is allowed
            (defaults to 10 h).
        max_speed: Speed clamp.
    """

    mode: BranchMode = BranchMode.PREFER_STATIC
    c1_mode: bool = False
    h: float = 1e-3
    switch_tol: Optional[float] = None
    max_speed: float = 1.0 - 1e-9

    def __post_init__(self):
        object.__setattr__(self, "mode", BranchMode(self.mode))
        if not self.h > 0:
            raise ValueError(f"branch step h must be positive, got {self.h}")
        if self.switch_tol is None:
            object.__setattr__(self, "switch_tol", 10.0 * self.h)


def branch_speed_options(Y: float, K: float) -> Tuple[float, ...]:
    """
    Admissible speeds at a node, in increasing order.

    Raises:
        DeadEnd: Y > K, so neither the static nor the moving option exists.
    """
    if not K > 0:
        raise InvalidToughness(f"K = 2 kappa must be positive, got {K}")
    options = []
    if Y <= K:
        options.append(0.0)
    root = (K - Y) / (K + Y)
    if 0.0 < root < 1.0:
        options.append(root)
    if not options:
        raise DeadEnd(f"no admissible branch speed: Y={Y:.6g} exceeds K={K:.6g}")
    return tuple(options)


class _BranchField:
    """Y and K along the backward march."""

    def __init__(self, target: TargetState, kappa: Toughness, T: float):
        self.T = T
        self.L = target.ellbar0
        part = target.damping_part
        self._xs, self._vs = part.abscissae, part.values
        self.kappa = kappa

    def Y(self, t: float, ell: float) -> float:
        x = min(max(t + ell - self.T, 0.0), self.L)
        d = float(np.interp(x, self._xs, self._vs))
        return d * d

    def K(self, ell: float) -> float:
        return 2.0 * self.kappa(ell)

    def evaluate(self, t: float, ell: float) -> Tuple[float, float]:
        Y, K = self.Y(t, ell), self.K(ell)
        # equality cases sampled in floating point land on the admissible side
        if K < Y <= K * (1.0 + COINCIDENCE_TOLERANCE):
            Y = K
        return Y, K


def _moving_root(Y: float, K: float) -> float:
    return max((K - Y) / (K + Y), 0.0)


def solve_final_branch(target: TargetState, kappa: Toughness, T: float, policy: BranchPolicy) -> BranchResult:
    """
    Integrate an admissible final branch backward from L(T) = ellbar0.

    Raises:
        DeadEnd: no admissible speed at some node.
        NoTermination: t reached 0 before t + L(t) = T.
        C1SwitchViolation: in C1 mode the moving option disappears away from Y = K.
    """
    L_bar = target.ellbar0
    if not T > L_bar:
        raise NoTermination(f"horizon T={T} must exceed ellbar0={L_bar}")

    field = _BranchField(target, kappa, T)
    h = policy.h
    alpha = classify_final_state(target, kappa) if policy.c1_mode else None

    times, positions, speeds, alternatives, moving_flags = [], [], [], [], []
    t, ell = T, L_bar
    moving = None
    k = 0
    while True:
        Y, K = field.evaluate(t, ell)
        try:
            options = branch_speed_options(Y, K)
        except DeadEnd as exc:
            raise DeadEnd(f"{exc} at t={t:.6g}, L={ell:.6g}") from None
        static_ok = options[0] == 0.0
        moving_ok = options[-1] > 0.0
        root = _moving_root(Y, K)

        if policy.c1_mode:
            if moving is None:
                moving = alpha > 0.0
                if moving and not moving_ok:
                    raise DeadEnd(f"terminal slope alpha={alpha:.6g} has no moving option at T")
                if not moving and not static_ok:
                    raise DeadEnd(f"passive target violates the constraint at T (Y={Y:.6g} > K={K:.6g})")
            elif moving:
                if not moving_ok:
                    if root > policy.switch_tol:
                        raise C1SwitchViolation(
                            f"moving branch lost at t={t:.6g} with speed {root:.6g}; no continuous switch"
                        )
                    moving = False
                elif policy.mode == BranchMode.PREFER_STATIC and root <= policy.switch_tol:
                    moving = False
            else:
                if not static_ok:
                    raise DeadEnd(f"static branch violates the constraint at t={t:.6g} (Y={Y:.6g} > K={K:.6g})")
                if policy.mode == BranchMode.PREFER_MOVING and moving_ok and root <= policy.switch_tol:
                    moving = True
        else:
            moving = moving_ok if policy.mode == BranchMode.PREFER_MOVING else not static_ok

        v = min(root, policy.max_speed) if moving else 0.0
        if policy.c1_mode and k == 0 and moving:
            v = min(alpha, policy.max_speed)
        times.append(t)
        positions.append(ell)
        speeds.append(v)
        alternatives.append(len(options) == 2)
        moving_flags.append(bool(moving and v > 0.0))
        if len(options) == 2:
            logger.debug(f"both branch speeds admissible at t={t:.6f}: {options}")

        g_prev = t + ell - T
        if t <= 0.0:
            raise NoTermination(f"backward march reached t=0 with t + L - T = {g_prev:.6g} > 0")
        t_next = max(T - (k + 1) * h, 0.0)
        dt = t - t_next
        predicted = ell - dt * v
        if moving:
            Yp, Kp = field.evaluate(t_next, predicted)
            v2 = min(_moving_root(Yp, Kp), policy.max_speed)
            ell_next = ell - 0.5 * dt * (v + v2)
        else:
            ell_next = ell
        ell_next = min(ell_next, ell)
        g_next = t_next + ell_next - T
        if g_next <= 0.0:
            theta = g_prev / (g_prev - g_next)
            t_cross = t - theta * dt
            break
        t, ell = t_next, ell_next
        k += 1

    if not any(moving_flags):
        t_cross = T - L_bar
    ell_cross = T - t_cross
    v_cross = speeds[-1]
    if moving_flags[-1]:
        Yc, Kc = field.evaluate(t_cross, ell_cross)
        v_cross = min(_moving_root(Yc, Kc), policy.max_speed)

    if times[-1] - t_cross < 1e-9 * h:
        times, positions, speeds = times[:-1], positions[:-1], speeds[:-1]
        alternatives, moving_flags = alternatives[:-1], moving_flags[:-1]
    times = np.array([t_cross] + times[::-1])
    positions = np.array([ell_cross] + positions[::-1])
    speeds = np.array([v_cross] + speeds[::-1])
    alternatives = np.array([alternatives[-1] if alternatives else False] + alternatives[::-1])
    moving_flags = np.array([v_cross > 0.0] + moving_flags[::-1])

    curve = FrontCurve(times, positions, speeds)
    terminal = float(speeds[-1])
    result = BranchResult(
        curve=curve,
        t_bar_star=float(t_cross),
        ell_bar_star=float(ell_cross),
        ell_bar_star_prime=float(v_cross),
        alpha=terminal if alpha is None else alpha,
        alternative_admissible=alternatives,
        moving=moving_flags,
    )
    if np.any(alternatives):
        logger.warning(f"final branch not unique: alternative speed admissible at {int(alternatives.sum())} nodes")
    logger.info(
        f"final branch ({policy.mode.value}{', C1' if policy.c1_mode else ''}): "
        f"t_bar*={result.t_bar_star:.9f}, l_bar*={result.ell_bar_star:.9f}, l_bar*'={result.ell_bar_star_prime:.6f}"
    )
    return result


def static_final_branch(target: TargetState, kappa: Toughness, T: float, h: float = 1e-3,
                        tol: float = COINCIDENCE_TOLERANCE) -> BranchResult:
    """
    The branch L = ellbar0 on [T - ellbar0, T].

    Raises:
        ConstraintViolated: sup |ybar1 + ybar0'|^2 exceeds 2 kappa(ellbar0).
        NoTermination: T <= ellbar0.
    """
    L_bar = target.ellbar0
    if not T > L_bar:
        raise NoTermination(f"horizon T={T} must exceed ellbar0={L_bar}")
    K = 2.0 * kappa(L_bar)
    Y = target.damping_part.values ** 2
    excess = float(np.max(Y) - K)
    if excess > tol * K:
        raise ConstraintViolated(
            f"static branch needs |ybar1 + ybar0'|^2 <= 2 kappa(ellbar0) = {K:.6g}; worst excess {excess:.6g}",
            excess=excess,
        )
    n = max(2, int(math.ceil(L_bar / h)) + 1)
    times = np.linspace(T - L_bar, T, n)
    times[0] = T - L_bar
    x = times + L_bar - T
    Y_nodes = np.interp(x, target.damping_part.abscissae, target.damping_part.values) ** 2
    alternatives = (Y_nodes > 0.0) & (Y_nodes < K)
    curve = FrontCurve(times, np.full(n, L_bar), np.zeros(n))
    logger.info(f"static final branch on [{T - L_bar:.6f}, {T:.6f}]")
    return BranchResult(
        curve=curve,
        t_bar_star=float(T - L_bar),
        ell_bar_star=float(L_bar),
        ell_bar_star_prime=0.0,
        alpha=0.0,
        alternative_admissible=alternatives,
        moving=np.zeros(n, dtype=bool),
    )

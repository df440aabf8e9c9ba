"""Tests for control synthesis and round-trip verification"""
import math

import numpy as np
import pytest

from debond.branch import BranchPolicy, solve_final_branch, static_final_branch
from debond.control import (
    PlanCase,
    _distinct,
    fprime_for_prescribed_front,
    synthesize_c01,
    synthesize_c1,
    synthesize_static_c01,
    synthesize_static_c1,
    uprime_from_fprime,
    verify_control,
    verify_synthesis,
)
from debond.errors import ConstraintViolated, IncompatibleData, IncompatibleTarget, InfeasibleTime
from debond.forward import SolverConfig
from debond.func1d import SampledFunction, derivative
from debond.model import FrontCurve, InitialState, Regularity, TargetState, Toughness, griffith_speed


def _const(c, a, b):
    return SampledFunction.constant(c, a, b)


def _static_front(ell, t0, t1, n=301):
    t = np.linspace(t0, t1, n)
    return FrontCurve(t, np.full(n, ell), np.zeros(n))


# =============================================================================
# Trace and control kernels
# =============================================================================

def test_fprime_free_segment_is_zero():
    fp = fprime_for_prescribed_front(_static_front(1.0, 1.0, 2.0), Toughness.constant(1.0),
                                     start_value=0.0, end_value=0.0)
    assert np.all(fp.values == 0.0)


def test_fprime_constant_speed_magnitude():
    t = np.linspace(1.0, 4.0, 301)
    front = FrontCurve(t, 1 + (t - 1) / 3, np.full(t.size, 1 / 3))
    fp = fprime_for_prescribed_front(front, Toughness.constant(3.0))
    np.testing.assert_allclose(np.abs(fp.values), math.sqrt(3.0))
    for s in fp.abscissae[::30]:
        assert griffith_speed(fp(s), 3.0) == pytest.approx(1 / 3)


def test_fprime_sign_change_across_plateau():
    kappa = Toughness.constant(2.0)
    band = math.sqrt(kappa(1.0) / 2)
    fp = fprime_for_prescribed_front(_static_front(1.0, 1.0, 2.0), kappa, start_value=band, end_value=-band)
    assert fp.values[0] == pytest.approx(band)
    assert fp.values[-1] == pytest.approx(-band)
    assert np.all(np.abs(fp.values) <= band + 1e-15)
    assert np.all(np.diff(fp.values) <= 0.0)
    assert np.max(np.abs(np.diff(fp.values))) < 0.01


def test_fprime_zero_run_meets_threshold_next_to_motion():
    t = np.linspace(0.0, 2.0, 201)
    speeds = np.where(t < 1.0, 0.0, 0.2 * (t - 1.0))
    positions = 1.0 + np.concatenate(([0.0], np.cumsum(0.5 * (speeds[1:] + speeds[:-1]) * np.diff(t))))
    front = FrontCurve(t, positions, speeds)
    fp = fprime_for_prescribed_front(front, Toughness.constant(1.0), signs=(-1.0,), start_value=0.0)
    at_touchdown = int(np.searchsorted(t, 1.0))
    assert fp.values[0] == 0.0
    assert fp.values[at_touchdown] == pytest.approx(-math.sqrt(0.5), abs=1e-12)
    assert np.all(fp.values[at_touchdown:] < 0)


def test_uprime_inside_initial_region():
    initial = InitialState(1.0, _const(0, 0, 1), _const(2, 0, 1))
    front = _static_front(1.0, 0.0, 3.0)
    assert uprime_from_fprime(lambda s, right=False: 1.0, front, initial, 0.5) == pytest.approx(2.0)


def test_uprime_static_front_echo():
    initial = InitialState.at_rest(1.0)
    front = _static_front(1.0, 0.0, 3.0)
    for s in (1.5, 2.0, 2.75):
        # f'(s) - f'(s - 2 ell)
        assert uprime_from_fprime(lambda r, right=False: r, front, initial, s) == pytest.approx(2.0)
    assert uprime_from_fprime(lambda r, right=False: 0.0, front, initial, 2.5) == 0.0


# =============================================================================
# Lipschitz synthesis
# =============================================================================

def test_zero_to_zero(at_rest, resting_target, kappa_one):
    initial, target = at_rest(1.0), resting_target(1.0)
    cfg = SolverConfig(T=3.0, h=1e-3)
    branch = solve_final_branch(target, kappa_one, 3.0, BranchPolicy())
    report = synthesize_c01(initial, target, kappa_one, 3.0, branch, cfg)
    assert report.plan.case == PlanCase.STATIC_MATCH
    assert report.plan.v == 0.0
    assert np.max(np.abs(report.control.u.values)) <= 1e-12

    check = verify_synthesis(report, initial, target, kappa_one, cfg)
    assert check.front_error <= 1e-10
    assert check.displacement_error <= 1e-10
    assert check.velocity_error <= 1e-10
    np.testing.assert_allclose(check.solution.front.positions, 1.0, atol=1e-12)


def test_expansion_scenario(at_rest, resting_target, kappa_one):
    initial, target = at_rest(1.0), resting_target(2.0)
    cfg = SolverConfig(T=6.0, h=1e-3)
    branch = solve_final_branch(target, kappa_one, 6.0, BranchPolicy())
    assert branch.t_bar_star == pytest.approx(4.0)
    report = synthesize_c01(initial, target, kappa_one, 6.0, branch, cfg)

    assert report.plan.v == pytest.approx(1 / 3, abs=1e-12)
    assert report.plan.case == PlanCase.D
    assert report.stages.sigma1 == pytest.approx(2.0)
    assert report.stages.sigma2 == pytest.approx(4.0)
    np.testing.assert_allclose(np.abs(report.trace.pieces[0].values), 1.0, atol=1e-9)
    assert report.control.uprime(1.0) == pytest.approx(1.0, abs=1e-9)
    assert report.control.uprime(3.0) == pytest.approx(-0.5, abs=1e-9)
    assert report.control.u(6.0) == pytest.approx(0.0, abs=1e-6)

    check = verify_synthesis(report, initial, target, kappa_one, cfg)
    assert check.front_error <= 1e-2
    assert check.displacement_error <= 1e-2


def test_expansion_round_trip_front_tracks_plan(at_rest, resting_target, kappa_one):
    initial, target = at_rest(1.0), resting_target(2.0)
    cfg = SolverConfig(T=6.0, h=1e-3)
    report = synthesize_static_c01(initial, target, kappa_one, 6.0, cfg)
    check = verify_control(report.control, initial, target, kappa_one, cfg)
    front = check.solution.front
    for t in (1.0, 2.5, 4.0, 5.5):
        assert front.position(t) == pytest.approx(float(report.front.position(t)), abs=1e-2)


def test_shrinking_front_is_infeasible(at_rest, resting_target, kappa_one):
    initial, target = at_rest(2.0), resting_target(1.0)
    cfg = SolverConfig(T=5.0, h=1e-3)
    branch = solve_final_branch(target, kappa_one, 5.0, BranchPolicy())
    with pytest.raises(InfeasibleTime):
        synthesize_c01(initial, target, kappa_one, 5.0, branch, cfg)


def test_incompatible_initial_data_rejected(resting_target):
    initial = InitialState(1.0, _const(0.3, 0, 1), _const(0, 0, 1))
    target = resting_target(2.0)
    kappa = Toughness.constant(1.0)
    cfg = SolverConfig(T=6.0)
    branch = static_final_branch(target, kappa, 6.0)
    with pytest.raises(IncompatibleData):
        synthesize_c01(initial, target, kappa, 6.0, branch, cfg)


def test_target_must_vanish_at_front(at_rest, kappa_one):
    target = TargetState(2.0, _const(0.5, 0, 2), _const(0, 0, 2))
    with pytest.raises(IncompatibleTarget):
        synthesize_static_c01(at_rest(1.0), target, kappa_one, 6.0, SolverConfig(T=6.0))


# =============================================================================
# Static corollaries
# =============================================================================

def _sine_target():
    x = np.linspace(0, 2, 2001)
    ybar0 = SampledFunction(x, np.sin(np.pi * x / 2) * (2 - x) / 2)
    yp = derivative(ybar0)
    return TargetState(2.0, ybar0, SampledFunction(yp.abscissae, -yp.values))


def test_static_sine_target(at_rest, kappa_one):
    target = _sine_target()
    cfg = SolverConfig(T=5.0, h=1e-3)
    report = synthesize_static_c01(at_rest(1.0), target, kappa_one, 5.0, cfg)
    assert report.branch.is_static
    assert report.plan.v == pytest.approx(0.5)
    # sigma1 = t_bar_star - ellbar0 = 1 lands on ell0
    assert report.stages.sigma1 == pytest.approx(1.0)
    check = verify_synthesis(report, at_rest(1.0), target, kappa_one, cfg)
    assert check.front_error <= 1e-2
    assert check.displacement_error <= 1e-2


@pytest.mark.parametrize("h", [1e-3, 2e-3, 1 / 300])
def test_static_first_stage_ends_at_initial_length(at_rest, resting_target, kappa_one, h):
    initial, target = at_rest(1.0), resting_target(2.0)
    cfg = SolverConfig(T=5.0, h=h)
    report = synthesize_static_c01(initial, target, kappa_one, 5.0, cfg)
    assert report.stages.sigma1 == pytest.approx(initial.ell0)
    assert np.all(np.diff(report.control.uprime.abscissae) > 0)
    check = verify_synthesis(report, initial, target, kappa_one, cfg)
    assert check.front_error <= 1e-2
    assert check.displacement_error <= 1e-2


def test_distinct_merges_coincident_breakpoints():
    assert _distinct([3.0, 1.0, 1.0 + 1e-15, 1.0], 5.0) == [1.0, 3.0]
    assert _distinct([2.0, 1.0], 5.0) == [1.0, 2.0]


def test_static_constraint_violation(at_rest, kappa_one):
    target = TargetState(1.0, _const(0, 0, 1), _const(2, 0, 1))
    with pytest.raises(ConstraintViolated) as info:
        synthesize_static_c01(at_rest(1.0), target, kappa_one, 3.0, SolverConfig(T=3.0))
    assert info.value.excess == pytest.approx(2.0)


def test_static_time_must_exceed_twice_final_length(at_rest, resting_target, kappa_one):
    with pytest.raises(InfeasibleTime):
        synthesize_static_c01(at_rest(1.0), resting_target(2.0), kappa_one, 4.0, SolverConfig(T=4.0))


def test_static_c1_needs_passive_target(at_rest, kappa_one):
    target = TargetState(1.0, SampledFunction([0, 1], [1, 0]), _const(1, 0, 1), Regularity.C1)
    with pytest.raises(IncompatibleTarget):
        synthesize_static_c1(at_rest(1.0, Regularity.C1), target, kappa_one, 3.0, SolverConfig(T=3.0))


def test_random_static_targets_round_trip(at_rest, kappa_one):
    rng = np.random.default_rng(5)
    initial = at_rest(1.0)
    h = 1e-3
    for _ in range(50):
        L = rng.uniform(1.2, 2.0)
        T = 2 * L + rng.uniform(0.5, 1.5)
        a, k = rng.uniform(-0.3, 0.3), int(rng.integers(1, 3))
        d = rng.uniform(-1.0, 1.0)
        x = np.linspace(0, L, 801)
        ybar0 = SampledFunction(x, a * np.sin(k * np.pi * x / L))
        yp = derivative(ybar0)
        ybar1 = SampledFunction(yp.abscissae, d - yp.values)
        target = TargetState(L, ybar0, ybar1)

        cfg = SolverConfig(T=T, h=h)
        report = synthesize_static_c01(initial, target, kappa_one, T, cfg)
        check = verify_synthesis(report, initial, target, kappa_one, cfg)
        assert check.front_error <= 1e-2
        assert check.displacement_error <= 1e-2


# =============================================================================
# C1 synthesis
# =============================================================================

def test_c1_zero_to_zero(at_rest, resting_target, kappa_one):
    initial, target = at_rest(1.0, Regularity.C1), resting_target(1.0, Regularity.C1)
    cfg = SolverConfig(T=3.0, h=1e-3)
    report = synthesize_static_c1(initial, target, kappa_one, 3.0, cfg)
    assert report.plan.case == PlanCase.STATIC_MATCH
    assert max(report.boundary_jumps.values()) <= 1e-8
    check = verify_synthesis(report, initial, target, kappa_one, cfg)
    assert check.displacement_error <= 1e-10


def test_c1_case_d(at_rest, resting_target, kappa_one):
    initial, target = at_rest(1.0, Regularity.C1), resting_target(2.0, Regularity.C1)
    h = 1e-3
    cfg = SolverConfig(T=8.0, h=h)
    branch = solve_final_branch(target, kappa_one, 8.0, BranchPolicy(c1_mode=True, h=h))
    report = synthesize_c1(initial, target, kappa_one, 8.0, branch, cfg)

    plan = report.plan
    assert plan.case == PlanCase.D
    assert plan.delta > 0
    segment = plan.front_segment
    # zero speed at both ends and around the midpoint
    assert segment.speed(plan.t_star + 0.5 * plan.delta) == 0.0
    assert segment.speed(plan.t_bar_star - 0.5 * plan.delta) == 0.0
    assert segment.speed(plan.t_circ) == 0.0
    assert segment.positions[-1] == pytest.approx(2.0)

    jumps = report.max_jumps
    assert jumps["uprime_step"] <= 1e-6 + 10 * h
    assert jumps["speed_step"] <= 1e-6 + 10 * h
    assert jumps["uprime_boundary"] <= 1e-6 + 10 * h

    # both one-sided limits at the Stage-3 junction equal -1/2 (1 + alpha) ybar0'(ellbar0)
    identity = -0.5 * (1 + branch.alpha) * target.ybar0_prime(2.0)
    sigma2 = report.stages.sigma2
    assert report.trace(sigma2) == pytest.approx(identity, abs=1e-8)
    assert report.trace(sigma2, right=True) == pytest.approx(identity, abs=1e-8)

    check = verify_synthesis(report, initial, target, kappa_one, cfg)
    assert check.front_error <= 1e-2
    assert check.displacement_error <= 1e-2
    assert check.velocity_error <= 0.5


def _active_target(ellbar0, y_left, alpha_slope):
    ybar0 = SampledFunction([0, ellbar0], [y_left, 0.0])
    return TargetState(ellbar0, ybar0, _const(alpha_slope, 0, ellbar0), Regularity.C1)


def test_c1_active_target(at_rest):
    kappa = Toughness.constant(1.0)
    initial = at_rest(0.5, Regularity.C1)
    # |ybar0'| = 1.5 gives alpha = 1/3 and ybar1(ellbar0) = 0.5
    target = _active_target(2.0, 3.0, 0.5)
    h, T = 1e-3, 10.0
    cfg = SolverConfig(T=T, h=h)
    branch = solve_final_branch(target, kappa, T, BranchPolicy(mode="prefer_moving", c1_mode=True, h=h))
    assert branch.alpha == pytest.approx(1 / 3)
    assert branch.ell_bar_star == pytest.approx(1.5, abs=1e-2)
    report = synthesize_c1(initial, target, kappa, T, branch, cfg)

    assert report.plan.case == PlanCase.B
    assert report.plan.ell_bar_star_prime == pytest.approx(1 / 3, abs=10 * h)
    jumps = report.max_jumps
    assert jumps["uprime_step"] <= 1e-6 + 10 * h
    assert jumps["speed_step"] <= 1e-6 + 10 * h

    check = verify_synthesis(report, initial, target, kappa, cfg)
    assert check.front_error <= 1e-2
    assert check.displacement_error <= 1e-2
    assert check.velocity_error <= 0.5


def test_c1_refuses_terminal_speed_it_cannot_ramp_to(at_rest):
    kappa = Toughness.constant(1.0)
    alpha = math.sqrt(0.5)
    target = _active_target(2.0, 4.0, 2 * alpha)
    h, T = 1e-3, 6.0
    branch = solve_final_branch(target, kappa, T, BranchPolicy(mode="prefer_moving", c1_mode=True, h=h))
    with pytest.raises(InfeasibleTime):
        synthesize_c1(at_rest(1.0, Regularity.C1), target, kappa, T, branch, SolverConfig(T=T, h=h))


def test_c1_refuses_lipschitz_initial_data(at_rest, resting_target, kappa_one):
    target = resting_target(2.0, Regularity.C1)
    branch = static_final_branch(target, kappa_one, 8.0)
    with pytest.raises(IncompatibleData):
        synthesize_c1(at_rest(1.0), target, kappa_one, 8.0, branch, SolverConfig(T=8.0))


def test_c1_rejects_front_start_violation(resting_target):
    initial = InitialState(1.0, _const(0, 0, 1), _const(2, 0, 1), Regularity.C1)
    target = resting_target(2.0, Regularity.C1)
    kappa = Toughness.constant(0.5)
    branch = static_final_branch(target, kappa, 8.0)
    with pytest.raises(IncompatibleData):
        synthesize_c1(initial, target, kappa, 8.0, branch, SolverConfig(T=8.0))



def test_moving_branch_stage_consistency(at_rest):
    kappa = Toughness.constant(1.0)
    h = 1e-3
    T = 6.0
    ybar1 = _const(math.sqrt(2 / 3), 0, 2)
    target = TargetState(2.0, _const(0.0, 0, 2), ybar1)
    branch = solve_final_branch(target, kappa, T, BranchPolicy(mode="prefer_moving", h=h))
    report = synthesize_c01(at_rest(1.0), target, kappa, T, branch, SolverConfig(T=T, h=h))

    curve = branch.curve
    for t, ell, v in zip(curve.times[1::50], curve.positions[1::50], curve.speeds[1::50]):
        assert griffith_speed(report.trace(t - ell), kappa(ell)) == pytest.approx(v, abs=10 * h)

    sigma2 = report.stages.sigma2
    for s in np.linspace(sigma2 + 0.1, T, 5):
        assert report.trace(s) == pytest.approx(0.5 * float(target.radiating_part(T - s)), abs=1e-12)

    check = verify_synthesis(report, at_rest(1.0), target, kappa, SolverConfig(T=T, h=h))
    assert check.front_error <= 1e-2
    front = check.solution.front
    for t, ell in zip(curve.times[::100], curve.positions[::100]):
        assert float(front.position(t)) == pytest.approx(ell, abs=1e-2)

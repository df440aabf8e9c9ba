"""Dynamic debonding: forward simulation, admissible branches and control synthesis"""
from .branch import BranchMode, BranchPolicy, branch_speed_options, solve_final_branch, static_final_branch
from .control import (
    InflationPlan,
    PlanCase,
    SynthesisReport,
    VerificationReport,
    fprime_for_prescribed_front,
    synthesize_c01,
    synthesize_c1,
    synthesize_static_c01,
    synthesize_static_c1,
    uprime_from_fprime,
    verify_control,
    verify_synthesis,
)
from .errors import (
    C1SwitchViolation,
    ConfigError,
    ConstraintViolated,
    ContinuityFailure,
    DeadEnd,
    DebondError,
    IncompatibleData,
    IncompatibleTarget,
    InfeasibleTime,
    NoTermination,
)
from .forward import (
    Scheme,
    SolverConfig,
    reconstruct_state,
    seed_trace,
    solve_front,
    solve_initial_branch,
    state_at,
    terminal_state,
    toughness_along_terminal_characteristics,
)
from .func1d import MonotoneMap, SampledFunction, antiderivative, definite_integral, derivative, evaluate, invert
from .model import (
    ControlSignal,
    FrontCurve,
    InitialState,
    Regularity,
    TargetState,
    Toughness,
    check_damping_bound,
    check_final_set,
    check_initial_compatibility,
    classify_final_state,
    energy_release_rate,
    griffith_speed,
    speed_to_fprime_magnitude,
)

__version__ = "0.1.0"

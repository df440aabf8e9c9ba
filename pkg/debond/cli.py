"""
Command-line front end.

==============================================================================
                         HOW IT WORKS
==============================================================================

    debond <command> --config scenario.json [--out DIR] [--h STEP]
                     [--policy prefer_static|prefer_moving] [--verbose]

Commands:

    simulate          front.csv, trace.csv, control.csv, state_at_T.csv
    initial-branch    initial_branch.txt, initial_front.csv
    final-branch      branch.csv, branch.txt
    check-admissible  admissibility.csv
    synthesize        control.csv, branch.csv, plan.txt
    verify            verify.csv (synthesized or replayed control vs. an
                      uncontrolled baseline, run side by side)

The scenario is one JSON document validated by pydantic.  Functions are
given as sample tables or presets:

    {"table": [[0, 0], [1, 2]]}
    {"preset": "constant", "c": 2}
    {"preset": "linear", "a": 1, "b": -1}
    {"preset": "sine", "A": 1, "omega": 3.14159, "phi": 0, "resolution": 2001}

CSV numbers are written with 17 significant digits so identical scenarios
give byte-identical files.  Errors map to exit codes through
``DebondError.exit_code``; ``verify`` and ``check-admissible`` exit 1 when
a check fails.

==============================================================================
"""

from __future__ import annotations

import argparse
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .branch import BranchMode, BranchPolicy, solve_final_branch
from .control import SynthesisReport, VerificationReport, synthesize_c01, synthesize_c1, verify_control
from .errors import ConfigError, DebondError
from .forward import Scheme, SolverConfig, solve_front, solve_initial_branch, terminal_state
from .func1d import SampledFunction
from .model import (
    CheckReport,
    ControlSignal,
    InitialState,
    Regularity,
    TargetState,
    Toughness,
    check_damping_bound,
    check_final_set,
)

logger = logging.getLogger("debond.cli")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1


# =============================================================================
# Scenario schema
# =============================================================================

class FunctionSpec(BaseModel):
    """A function on a domain supplied by context: sample table or preset."""

    model_config = ConfigDict(extra="forbid")

    table: Optional[List[Tuple[float, float]]] = None
    preset: Optional[Literal["constant", "linear", "sine"]] = None
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    A: float = 0.0
    omega: float = 0.0
    phi: float = 0.0
    resolution: int = Field(1001, ge=2)

    @model_validator(mode="after")
    def _one_source(self) -> "FunctionSpec":
        if (self.table is None) == (self.preset is None):
            raise ValueError("give exactly one of 'table' or 'preset'")
        return self

    def build(self, lo: float, hi: float, name: str) -> SampledFunction:
        if self.table is not None:
            try:
                fn = SampledFunction.from_pairs(self.table)
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from None
            a, b = fn.domain
            slack = 1e-9 * (hi - lo)
            if abs(a - lo) > slack or abs(b - hi) > slack:
                raise ConfigError(f"{name}: table covers [{a}, {b}], expected [{lo}, {hi}]")
            return fn
        if self.preset == "constant":
            return SampledFunction.constant(self.c, lo, hi)
        if self.preset == "linear":
            return SampledFunction.from_callable(lambda x: self.a + self.b * x, lo, hi, self.resolution)
        return SampledFunction.from_callable(
            lambda x: self.A * np.sin(self.omega * x + self.phi), lo, hi, self.resolution
        )


class ToughnessSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    value: Optional[float] = None
    table: Optional[List[Tuple[float, float]]] = None
    c1: Optional[float] = None
    c2: Optional[float] = None

    @model_validator(mode="after")
    def _one_source(self) -> "ToughnessSpec":
        if (self.value is None) == (self.table is None):
            raise ValueError("give exactly one of 'value' or 'table'")
        return self


class InitialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ell0: float = Field(gt=0)
    y0: FunctionSpec
    y1: FunctionSpec


class TargetSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ellbar0: float = Field(gt=0)
    ybar0: FunctionSpec
    ybar1: FunctionSpec


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    h: float = Field(1e-3, gt=0)
    scheme: Scheme = Scheme.HEUN
    speed_clamp_eps: float = Field(1e-9, gt=0, lt=1e-3)


class PolicySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: BranchMode = BranchMode.PREFER_STATIC
    switch_tol: Optional[float] = Field(None, gt=0)


class ToleranceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    front: float = Field(1e-2, gt=0)
    displacement: float = Field(1e-2, gt=0)
    velocity: float = Field(0.5, gt=0)


class ScenarioConfig(BaseModel):
    """One scenario file.  Sections a command does not use may be omitted."""

    model_config = ConfigDict(extra="forbid")

    T: float = Field(gt=0)
    regularity: Regularity = Regularity.C01
    toughness: ToughnessSpec
    initial: Optional[InitialSpec] = None
    target: Optional[TargetSpec] = None
    control: Optional[FunctionSpec] = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    policy: PolicySpec = Field(default_factory=PolicySpec)
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    output_dir: Optional[str] = None


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<document>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid scenario: {_describe(exc)}") from None


def dump_scenario(scenario: ScenarioConfig) -> str:
    return scenario.model_dump_json(indent=2, exclude_none=True)


def load_scenario(path: Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_scenario(text)


# =============================================================================
# Builders
# =============================================================================

def _require(scenario: ScenarioConfig, section: str):
    value = getattr(scenario, section)
    if value is None:
        raise ConfigError(f"{section}: section required for this command")
    return value


def build_toughness(spec: ToughnessSpec) -> Toughness:
    if spec.value is not None:
        return Toughness(value=spec.value, c1=spec.c1, c2=spec.c2)
    try:
        samples = SampledFunction.from_pairs(spec.table)
    except ValueError as exc:
        raise ConfigError(f"toughness.table: {exc}") from None
    return Toughness(samples=samples, c1=spec.c1, c2=spec.c2)


def build_initial(scenario: ScenarioConfig) -> InitialState:
    spec = _require(scenario, "initial")
    return InitialState(
        spec.ell0,
        spec.y0.build(0.0, spec.ell0, "initial.y0"),
        spec.y1.build(0.0, spec.ell0, "initial.y1"),
        scenario.regularity,
    )


def build_target(scenario: ScenarioConfig) -> TargetState:
    spec = _require(scenario, "target")
    return TargetState(
        spec.ellbar0,
        spec.ybar0.build(0.0, spec.ellbar0, "target.ybar0"),
        spec.ybar1.build(0.0, spec.ellbar0, "target.ybar1"),
        scenario.regularity,
    )


def build_control(scenario: ScenarioConfig) -> ControlSignal:
    spec = _require(scenario, "control")
    return ControlSignal.from_displacement(spec.build(0.0, scenario.T, "control"), scenario.regularity)


def build_solver(scenario: ScenarioConfig) -> SolverConfig:
    s = scenario.solver
    return SolverConfig(T=scenario.T, h=s.h, scheme=s.scheme, speed_clamp_eps=s.speed_clamp_eps)


def build_policy(scenario: ScenarioConfig) -> BranchPolicy:
    return BranchPolicy(
        mode=scenario.policy.mode,
        c1_mode=scenario.regularity == Regularity.C1,
        h=scenario.solver.h,
        switch_tol=scenario.policy.switch_tol,
        max_speed=1.0 - scenario.solver.speed_clamp_eps,
    )


def apply_overrides(scenario: ScenarioConfig, h: Optional[float], policy: Optional[str]) -> ScenarioConfig:
    if h is not None:
        if not h > 0:
            raise ConfigError(f"--h: step must be positive, got {h}")
        scenario = scenario.model_copy(update={"solver": scenario.solver.model_copy(update={"h": h})})
    if policy is not None:
        scenario = scenario.model_copy(
            update={"policy": scenario.policy.model_copy(update={"mode": BranchMode(policy)})}
        )
    return scenario


# =============================================================================
# Output
# =============================================================================

def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, header: Sequence[str], columns: Iterable[Sequence[float]]) -> None:
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([_fmt(v) for v in row])
    logger.debug(f"wrote {path} ({cols[0].size} rows)")


def write_keyvalue(path: Path, lines: Iterable[str]) -> None:
    Path(path).write_text("".join(f"{line}\n" for line in lines))


def read_control_csv(path: Path, regularity: Regularity) -> ControlSignal:
    """Read a control.csv (t, u, u_prime) written by ``synthesize``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if [h.strip() for h in header] != ["t", "u", "u_prime"]:
            raise ValueError(f"unexpected header {header}")
        data = np.array([[float(v) for v in row] for row in body if row], dtype=float)
        return ControlSignal(
            SampledFunction(data[:, 0], data[:, 1]),
            SampledFunction(data[:, 0], data[:, 2]),
            regularity,
        )
    except (OSError, IndexError, ValueError) as exc:
        raise ConfigError(f"control-file {path}: {exc}") from None


def _write_control(path: Path, control: ControlSignal) -> None:
    t = control.u.abscissae
    write_csv(path, ["t", "u", "u_prime"], [t, control.u.values, control.uprime(t)])


def _write_front(path: Path, front, header=("t", "ell", "ell_prime")) -> None:
    write_csv(path, list(header), [front.times, front.positions, front.speeds])


def _write_report(path: Path, report: CheckReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check", "passed", "residual", "detail"])
        for c in report.checks:
            writer.writerow([c.name, "pass" if c.passed else "fail", _fmt(c.residual), c.detail])


# =============================================================================
# Commands
# =============================================================================

def cmd_simulate(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    initial = build_initial(scenario)
    control = build_control(scenario)
    kappa = build_toughness(scenario.toughness)
    sol = solve_front(initial, control, kappa, build_solver(scenario))

    _write_front(out / "front.csv", sol.front)
    write_csv(out / "trace.csv", ["s", "f", "f_prime"],
              [sol.trace.abscissae, sol.trace.values, sol.trace_prime.values])
    _write_control(out / "control.csv", control)
    x, y, dty, dxy = terminal_state(sol)
    write_csv(out / "state_at_T.csv", ["x", "y", "dty", "dxy"], [x, y, dty, dxy])
    logger.info(f"simulation written to {out}")
    return EXIT_OK


def cmd_initial_branch(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    initial = build_initial(scenario)
    kappa = build_toughness(scenario.toughness)
    result = solve_initial_branch(initial, kappa, build_solver(scenario))
    write_keyvalue(out / "initial_branch.txt", [
        f"t_star={_fmt(result.t_star)}",
        f"ell_star={_fmt(result.ell_star)}",
        f"ell_star_prime={_fmt(result.ell_star_prime)}",
        f"authoritative={str(result.authoritative).lower()}",
    ])
    _write_front(out / "initial_front.csv", result.front)
    return EXIT_OK


def _branch_files(out: Path, branch) -> None:
    _write_front(out / "branch.csv", branch.curve, header=("t", "L", "L_prime"))


def cmd_final_branch(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    target = build_target(scenario)
    kappa = build_toughness(scenario.toughness)
    branch = solve_final_branch(target, kappa, scenario.T, build_policy(scenario))
    _branch_files(out, branch)
    write_keyvalue(out / "branch.txt", [
        f"t_bar_star={_fmt(branch.t_bar_star)}",
        f"ell_bar_star={_fmt(branch.ell_bar_star)}",
        f"ell_bar_star_prime={_fmt(branch.ell_bar_star_prime)}",
        f"alpha={_fmt(branch.alpha)}",
        f"static={str(branch.is_static).lower()}",
        f"alternative_nodes={int(np.sum(branch.alternative_admissible))}",
    ])
    return EXIT_OK


def cmd_check_admissible(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    target = build_target(scenario)
    kappa = build_toughness(scenario.toughness)
    report = check_final_set(target, kappa)
    # static reachability: the front rests at ellbar0 along the terminal characteristics
    report.checks.extend(check_damping_bound(target, kappa(target.ellbar0)).checks)
    _write_report(out / "admissibility.csv", report)
    if not report.passed:
        logger.warning(f"target not admissible: {[c.name for c in report.failures()]}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def synthesize(scenario: ScenarioConfig) -> SynthesisReport:
    initial = build_initial(scenario)
    target = build_target(scenario)
    kappa = build_toughness(scenario.toughness)
    cfg = build_solver(scenario)
    branch = solve_final_branch(target, kappa, scenario.T, build_policy(scenario))
    if scenario.regularity == Regularity.C1:
        return synthesize_c1(initial, target, kappa, scenario.T, branch, cfg)
    return synthesize_c01(initial, target, kappa, scenario.T, branch, cfg)


def cmd_synthesize(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    report = synthesize(scenario)
    _write_control(out / "control.csv", report.control)
    _branch_files(out, report.branch)
    write_keyvalue(out / "plan.txt", report.plan_lines())
    return EXIT_OK


def _baseline(scenario: ScenarioConfig) -> Optional[VerificationReport]:
    """The uncontrolled run, u held at y0(0)."""
    initial = build_initial(scenario)
    target = build_target(scenario)
    kappa = build_toughness(scenario.toughness)
    hold = ControlSignal.hold(float(initial.y0(0.0)), scenario.T)
    try:
        return verify_control(hold, initial, target, kappa, build_solver(scenario))
    except DebondError as exc:
        logger.warning(f"baseline simulation skipped: {exc}")
        return None


def _controlled(scenario: ScenarioConfig, control_file: Optional[Path]) -> VerificationReport:
    initial = build_initial(scenario)
    target = build_target(scenario)
    kappa = build_toughness(scenario.toughness)
    if control_file is not None:
        control = read_control_csv(control_file, scenario.regularity)
    else:
        control = synthesize(scenario).control
    return verify_control(control, initial, target, kappa, build_solver(scenario))


def cmd_verify(scenario: ScenarioConfig, out: Path, args: argparse.Namespace) -> int:
    control_file = getattr(args, "control_file", None)
    with ThreadPoolExecutor(max_workers=2) as pool:
        controlled = pool.submit(_controlled, scenario, control_file)
        baseline = pool.submit(_baseline, scenario)
        result = controlled.result()
        base = baseline.result()

    tol = scenario.tolerances
    tolerances = {"front_error": tol.front, "displacement_error": tol.displacement, "velocity_error": tol.velocity}
    errors = result.to_dict()
    base_errors = base.to_dict() if base is not None else {k: float("nan") for k in errors}
    passed = result.passed(tol.front, tol.displacement, tol.velocity)

    with open(out / "verify.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "controlled", "baseline", "tolerance", "passed"])
        for name, value in errors.items():
            ok = value <= tolerances[name]
            writer.writerow([name, _fmt(value), _fmt(base_errors[name]), _fmt(tolerances[name]),
                             "pass" if ok else "fail"])
    if not passed:
        logger.error(f"verification failed: {errors}")
        return EXIT_CHECK_FAILED
    logger.info("verification passed")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[ScenarioConfig, Path, argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "initial-branch": cmd_initial_branch,
    "final-branch": cmd_final_branch,
    "check-admissible": cmd_check_admissible,
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="debond", description="Dynamic debonding simulation and control synthesis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=True, help="Scenario JSON file")
        p.add_argument("--out", type=Path, default=None, help="Output directory")
        p.add_argument("--h", type=float, default=None, help="Override the time step")
        p.add_argument("--policy", choices=[m.value for m in BranchMode], default=None,
                       help="Override the branch policy")
        p.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
        if name == "verify":
            p.add_argument("--control-file", type=Path, default=None,
                           help="Replay this control.csv instead of synthesizing")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        scenario = apply_overrides(load_scenario(args.config), args.h, args.policy)
        out = args.out or Path(scenario.output_dir or ".")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](scenario, out, args)
    except DebondError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except ValueError as exc:
        logger.error(f"invalid input: {exc}")
        return ConfigError.exit_code

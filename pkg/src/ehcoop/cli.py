"""Command-line interface.

    ehcoop solve --scenario S1 --case A --rho 0.3
    ehcoop screen-rho --case B --objective sum
    ehcoop select --objective common
    ehcoop sweep-energy --out table.csv --plotdata table.json
    ehcoop sweep-distance --out table.csv
    ehcoop validate

Network parameters come from defaults, an optional key=value config file
(`--config`), and individual flags, in that order of precedence.  Exit
codes: 0 on success, 2 when any requested point failed to solve, 1 on
usage errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields as dataclass_fields
from dataclasses import replace

from .barrier import solve_nb
from .gridsearch import GridSpec, brute_force_grid, finite_diff_check
from .network import NetworkConfig, derive_channels, relay_feasible, rho_max
from .program import initial_point
from .quadratic import solve_iterative
from .scenarios import (
    Case,
    Objective,
    Scenario,
    ScenarioSpec,
    build_problem,
    objective_bits,
    throughputs_from_allocation,
)
from .strategy import screen_rho, select_strategy, solve_spec
from .sweeps import (
    DISTANCE_RANGE,
    ENERGY_RANGE,
    SweepSpec,
    emit_csv,
    emit_plotdata,
    run_sweep,
)

_CONFIG_ALIASES = {"lambda": "lam"}
_CONFIG_KEYS = {f.name for f in dataclass_fields(NetworkConfig)}


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


class UsageError(ValueError):
    pass


def load_config(path) -> dict[str, float]:
    """Parse a flat key=value file; '#' starts a comment, blank lines skipped."""
    values: dict[str, float] = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, _, text = line.partition("=")
                key = _CONFIG_ALIASES.get(key.strip(), key.strip())
                if key not in _CONFIG_KEYS:
                    raise UsageError(
                        f"{path}:{lineno}: unknown key {key!r}; "
                        f"valid keys: {', '.join(sorted(_CONFIG_KEYS | {'lambda'}))}"
                    )
                try:
                    values[key] = float(text.strip())
                except ValueError as exc:
                    raise UsageError(f"{path}:{lineno}: bad number {text.strip()!r}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    return values


def build_network_config(args) -> NetworkConfig:
    overrides: dict[str, float] = {}
    if getattr(args, "config", None):
        overrides.update(load_config(args.config))
    for name in _CONFIG_KEYS:
        flag = getattr(args, f"cfg_{name}", None)
        if flag is not None:
            overrides[name] = flag
    try:
        return replace(NetworkConfig(), **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_network_flags(parser):
    group = parser.add_argument_group("network parameters")
    group.add_argument("--config", metavar="FILE", help="key=value parameter file")
    for name in sorted(_CONFIG_KEYS):
        group.add_argument(f"--{name}", dest=f"cfg_{name}", type=float, metavar="V",
                           help=f"override {name}")


def _add_solver_flag(parser):
    parser.add_argument("--solver", choices=("nb", "quad", "both"), default="nb",
                        help="nb: Newton barrier, quad: iterative quadratic (default nb)")


_OBJECTIVES = {"sum": Objective.WEIGHTED_SUM, "common": Objective.COMMON}


def _objective(args) -> Objective:
    return _OBJECTIVES[args.objective]


def _print_result(tag, spec, cfg, result, tp):
    print(f"[{tag}] {spec.scenario.value}-{spec.case.value} "
          f"objective={spec.objective.value} rho={spec.rho:g}")
    print(f"  status     : {result.status.value} "
          f"(outer {result.outer_iters}, inner {result.inner_iters})")
    if result.x_star is None:
        return
    print(f"  objective  : {objective_bits(spec, cfg, tp):.6f} bits")
    print(f"  B1, B2     : {tp.b1_bits:.6f}, {tp.b2_bits:.6f} bits")
    slots = ", ".join(f"{t:.6f}" for t in tp.slots)
    print(f"  t0, slots  : {tp.t0:.6f} | {slots}")
    powers = []
    for t, y in zip(tp.slots, result.x_star.x[len(tp.slots):]):
        powers.append(f"{(y / t if t > 0 else 0.0):.6f}" if t else "0")
    print(f"  P (W)      : {', '.join(powers)}")
    print(f"  violation  : {result.max_constraint_violation:.3e}  "
          f"kkt: {result.kkt_residual:.3e}")


def _cmd_solve(args) -> int:
    cfg = build_network_config(args)
    spec = ScenarioSpec(
        scenario=Scenario(args.scenario), case=Case(args.case),
        objective=_objective(args), rho=args.rho,
    )
    solvers = ("nb", "quad") if args.solver == "both" else (args.solver,)
    ok = True
    results = {}
    for solver in solvers:
        result, tp = solve_spec(spec, cfg, solver)
        _print_result(solver, spec, cfg, result, tp)
        results[solver] = result
        ok = ok and result.converged
    if len(results) == 2:
        a, b = results["nb"].objective_bits, results["quad"].objective_bits
        rel = abs(a - b) / max(1.0, abs(a))
        print(f"solver agreement: {rel:.3e} relative")
    return 0 if ok else 2


def _cmd_screen_rho(args) -> int:
    cfg = build_network_config(args)
    solver = "nb" if args.solver == "both" else args.solver
    rho_star, table = screen_rho(cfg, Case(args.case), _objective(args), solver=solver)
    print(f"rho     objective_bits  B1_bits   B2_bits   status")
    for out in table:
        tp = out.throughputs
        print(f"{out.rho:<7.2f} {out.objective_bits:<15.6f} {tp.b1_bits:<9.6f} "
              f"{tp.b2_bits:<9.6f} {out.result.status.value}")
    print(f"rho* = {rho_star:g}")
    return 0 if all(o.result.converged for o in table) else 2


def _cmd_select(args) -> int:
    cfg = build_network_config(args)
    solver = "nb" if args.solver == "both" else args.solver
    choice = select_strategy(cfg, _objective(args), solver=solver)
    for note in choice.notes:
        print(f"note: {note}")
    print(f"best configuration: {choice.scenario.value}-{choice.case.value} "
          f"(rho* = {choice.rho_star:g})")
    print(f"  objective : {choice.result.objective_bits:.6f} bits "
          f"(B1 {choice.b1_bits:.6f}, B2 {choice.b2_bits:.6f})")
    bad = [o for o in choice.table if not o.result.converged]
    return 2 if bad else 0


def _run_sweep_command(args, param: str, default_range) -> int:
    cfg = build_network_config(args)
    start = args.start if args.start is not None else default_range[0]
    stop = args.stop if args.stop is not None else default_range[1]
    step = args.step if args.step is not None else default_range[2]
    objectives = (
        tuple(_OBJECTIVES.values()) if args.objective == "both"
        else (_OBJECTIVES[args.objective],)
    )
    solver = "nb" if args.solver == "both" else args.solver
    try:
        spec = SweepSpec(param=param, start=start, stop=stop, step=step,
                         base=cfg, objectives=objectives, solver=solver)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = run_sweep(spec, jobs=args.jobs)
    if args.out:
        emit_csv(rows, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    if args.plotdata:
        emit_plotdata(rows, args.plotdata)
        print(f"wrote plot data to {args.plotdata}")
    if not args.out and not args.plotdata:
        for row in rows:
            mark = " *" if row.winner else ""
            obj = "" if row.obj_bits is None else f"{row.obj_bits:.6f}"
            print(f"{param}={row.sweep_param:g} {row.scenario}-{row.case} "
                  f"[{row.objective_kind}] {obj} {row.status}{mark}")
    failed = [r for r in rows if r.status != "converged"]
    if failed:
        print(f"{len(failed)} point(s) failed or were skipped", file=sys.stderr)
        return 2
    return 0


def _cmd_validate(args) -> int:
    """Self-checks: derivatives, oracle agreement, solver agreement."""
    cfg = build_network_config(args)
    ch = derive_channels(cfg)
    checks: list[tuple[str, bool, str]] = []

    spec = ScenarioSpec(Scenario.S1, Case.A, Objective.WEIGHTED_SUM,
                        rho=min(0.3, 0.5 * rho_max(ch)) if relay_feasible(ch) else 0.0)
    if relay_feasible(ch):
        program = build_problem(spec, cfg, ch)
        x0 = initial_point(program).x
        fd = finite_diff_check(program, x0, tau=1.0)
        checks.append(("derivatives vs finite differences (gradient)",
                       fd["gradient"] <= 1e-6, f"{fd['gradient']:.3e}"))
        checks.append(("derivatives vs finite differences (Hessian)",
                       fd["hessian"] <= 1e-4, f"{fd['hessian']:.3e}"))
    else:
        checks.append(("relay scenarios", False, "skipped: inter-user link too weak"))

    for scenario in (Scenario.S3, Scenario.S4):
        sp = ScenarioSpec(scenario, Case.A, Objective.WEIGHTED_SUM)
        program = build_problem(sp, cfg, ch)
        res = solve_nb(program)
        ref = brute_force_grid(program, GridSpec(step=1e-3))
        gap = res.objective_bits - ref.objective_bits
        ok = res.converged and gap >= -1e-9 and gap <= 0.05
        checks.append((f"{scenario.value}-A vs grid oracle", ok,
                       f"solver {res.objective_bits:.6f}, grid {ref.objective_bits:.6f}"))

    for scenario in Scenario:
        if scenario in (Scenario.S1, Scenario.S2) and not relay_feasible(ch):
            continue
        sp = ScenarioSpec(scenario, Case.B, Objective.WEIGHTED_SUM,
                          rho=0.0)
        program = build_problem(sp, cfg, ch)
        a = solve_nb(program)
        b = solve_iterative(program)
        rel = abs(a.objective_bits - b.objective_bits) / max(1.0, abs(a.objective_bits))
        checks.append((f"{scenario.value}-B solver agreement", rel <= 1e-4, f"{rel:.3e}"))

    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        if not ok:
            failed += 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ehcoop", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one configuration", parents=[])
    p.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    p.add_argument("--case", choices=[c.value for c in Case], required=True)
    p.add_argument("--objective", choices=("sum", "common"), default="sum")
    p.add_argument("--rho", type=float, default=0.0,
                   help="power-splitting ratio (S1 only)")
    _add_solver_flag(p)
    _add_network_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("screen-rho", help="screen the power-splitting ratio for S1")
    p.add_argument("--case", choices=[c.value for c in Case], required=True)
    p.add_argument("--objective", choices=("sum", "common"), default="sum")
    _add_solver_flag(p)
    _add_network_flags(p)
    p.set_defaults(func=_cmd_screen_rho)

    p = sub.add_parser("select", help="pick the best configuration")
    p.add_argument("--objective", choices=("sum", "common"), default="sum")
    _add_solver_flag(p)
    _add_network_flags(p)
    p.set_defaults(func=_cmd_select)

    for name, param, default_range in (
        ("sweep-energy", "X1", ENERGY_RANGE),
        ("sweep-distance", "d1", DISTANCE_RANGE),
    ):
        p = sub.add_parser(name, help=f"sweep {param} over a range")
        p.add_argument("--start", type=float)
        p.add_argument("--stop", type=float)
        p.add_argument("--step", type=float)
        p.add_argument("--objective", choices=("sum", "common", "both"), default="sum")
        p.add_argument("--out", metavar="CSV", help="write the table here")
        p.add_argument("--plotdata", metavar="JSON", help="write grouped series here")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        _add_solver_flag(p)
        _add_network_flags(p)
        p.set_defaults(func=_run_sweep_command, sweep_param=param,
                       sweep_range=default_range)

    p = sub.add_parser("validate", help="run built-in cross-checks")
    _add_network_flags(p)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "sweep_param", None):
            return args.func(args, args.sweep_param, args.sweep_range)
        return args.func(args)
    except UsageError as exc:
        print(f"ehcoop: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as exc:
        print(f"ehcoop: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

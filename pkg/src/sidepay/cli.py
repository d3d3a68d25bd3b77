"""Command-line front end.

Scenario arguments are JSON file paths, or ``@name`` for a bundled example
(``@thm1``, ``@pwl3``, ``@transit``, ...).

Exit codes: 0 success, 1 a ``reproduce`` check failed, 2 invalid input,
3 solver failure, no interior equilibrium or a failed verification.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from typing import List, Optional

import numpy as np

from . import analysis, dynamics, equilibrium, oracle
from .equilibrium import Equilibrium, solve, verify_nep
from .errors import SolverError, ValidationError
from .game import Scenario, load_scenario, scenario_from_dict, utilities

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2, 3


def bundled_names() -> List[str]:
    root = resources.files("sidepay") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled(name: str) -> Scenario:
    path = resources.files("sidepay") / "scenarios" / f"{name}.json"
    if not path.is_file():
        raise ValidationError(f"@{name}: no bundled scenario of that name; have {bundled_names()}")
    return scenario_from_dict(json.loads(path.read_text(encoding="utf-8")))


def read_scenario(arg: str) -> Scenario:
    return bundled(arg[1:]) if arg.startswith("@") else load_scenario(arg)


def rounded(obj):
    """Round every float to 12 significant digits for output."""
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return float("%.12g" % obj) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


def emit(doc, out: Optional[str] = None) -> None:
    text = json.dumps(rounded(doc), indent=2, ensure_ascii=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_text(text: str, out: Optional[str]) -> None:
    if not out:
        sys.stdout.write(text)


def pair(text: str):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return a, b


def cmd_solve(args) -> int:
    s = read_scenario(args.scenario)
    eq = solve(s, args.mode)
    emit(eq.to_dict(), args.out)
    if eq.type == "none":
        print(f"no interior equilibrium: {eq.reason}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _verification_targets(args):
    if args.solution:
        try:
            with open(args.solution, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"{args.solution}: cannot read solution file ({exc.strerror})")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.solution}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        eq = Equilibrium.from_dict(doc)
        found = [eq] if eq.type != "none" else list(eq.alternatives)
        if not found:
            raise ValidationError(f"{args.solution}: solution has no price pair to verify")
        points = []
        for item in found:
            points.extend(item.samples(5) if item.type == "segment" else [(item.p1, item.p2)])
        return points
    if args.p1 is None or args.p2 is None:
        raise ValidationError("verify needs --p1 and --p2, or --solution FILE")
    return [(args.p1, args.p2)]


def cmd_verify(args) -> int:
    s = read_scenario(args.scenario)
    reports = [verify_nep(s, p1, p2, grid_step=args.grid_step, epsilon=args.eps)
               for p1, p2 in _verification_targets(args)]
    passed = all(r.passed for r in reports)
    emit({"passed": passed, "points": [r.to_dict() for r in reports]}, args.out)
    return EXIT_OK if passed else EXIT_SOLVER


def cmd_oracle(args) -> int:
    s = read_scenario(args.scenario)
    grid = oracle.GridSpec.for_scenario(s, args.grid_step)
    found = oracle.find_grid_neps(s, grid, args.eps, interior_only=not args.all)
    emit({"grid": {"lo": grid.lo, "hi": grid.hi, "step": grid.step},
          "equilibria": [g.to_dict() for g in found]}, args.out)
    return EXIT_OK if found else EXIT_SOLVER


def cmd_profit(args) -> int:
    s = read_scenario(args.scenario)
    emit(analysis.profitability_report(s, args.mode).to_dict(), args.out)
    return EXIT_OK


def cmd_transit(args) -> int:
    s = read_scenario(args.scenario)
    emit(analysis.transit_case_report(s).to_dict(), args.out)
    return EXIT_OK


def cmd_dynamics(args) -> int:
    s = read_scenario(args.scenario)
    traj = dynamics.integrate(s, args.init, args.mode, args.dt, args.t_max)
    emit_text(traj.to_csv(args.out), args.out)
    return EXIT_OK


def cmd_field(args) -> int:
    s = read_scenario(args.scenario)
    field = dynamics.sample_field(s, args.box, args.res)
    emit_text(field.to_csv(args.out), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = read_scenario(args.scenario)
    rows = analysis.sweep(s, args.param, args.start, args.stop, args.step, args.mode)
    emit_text(analysis.sweep_csv(rows, args.param, args.out), args.out)
    return EXIT_OK


# reproduce ------------------------------------------------------------------

class Table:
    def __init__(self, title: str):
        self.title = title
        self.rows = []

    def check(self, label: str, expected, computed, ok: bool):
        self.rows.append((label, expected, computed, "OK" if ok else "FAIL"))

    def close(self, label: str, expected: float, computed: Optional[float], tol: float):
        ok = computed is not None and abs(computed - expected) <= tol
        self.check(label, expected, computed, ok)

    @property
    def passed(self) -> bool:
        return all(r[3] == "OK" for r in self.rows)

    def render(self) -> str:
        def cell(v):
            if isinstance(v, float):
                return "%.12g" % v
            return "-" if v is None else str(v)
        body = [("quantity", "expected", "computed", "status")] + [tuple(cell(v) for v in r) for r in self.rows]
        widths = [max(len(r[i]) for r in body) for i in range(4)]
        lines = [self.title]
        for r in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"


def _oracle_rows(t: Table, s: Scenario, expected: Equilibrium, step: float = 1e-3):
    found = oracle.find_grid_neps(s, oracle.GridSpec(0.0, s.ceiling, step))
    listing = "; ".join(f"{g.type}({g.p1:.4f}, {g.p2:.4f})" if g.type == "point"
                        else f"segment(sum {g.p_sum:.4f}, p1 {g.p1_lo:.4f}..{g.p1_hi:.4f})" for g in found)
    tol = step + 1e-9
    if expected.type == "segment":
        match = [g for g in found if g.type == "segment" and abs(g.p_sum - expected.p_sum) <= tol
                 and abs(g.p1_lo - expected.p1_lo) <= tol and abs(g.p1_hi - expected.p1_hi) <= tol]
        want = f"segment(sum {expected.p_sum:.4f}, p1 {expected.p1_lo:.4f}..{expected.p1_hi:.4f})"
    else:
        match = [g for g in found if g.type == "point" and abs(g.p1 - expected.p1) <= tol
                 and abs(g.p2 - expected.p2) <= tol]
        want = f"point({expected.p1:.4f}, {expected.p2:.4f})"
    t.check("oracle finds it (grid 1e-3)", want, listing or "nothing", bool(match))


def reproduce_thm1() -> Table:
    t = Table("Communal linear demand, D_max = 1, d = 1")
    base = bundled("thm1")
    for k in range(-6, 7):
        ps = 0.05 * k
        s = base.with_params(p_s=ps)
        eq = solve(s)
        u1 = utilities(s, eq.p1, eq.p2)[0] if eq.type == "point" else None
        t.close(f"p1* at p_s={ps:+.2f}", 1 / 3 - ps, eq.p1, 1e-9)
        t.close(f"p2* at p_s={ps:+.2f}", 1 / 3 + ps, eq.p2, 1e-9)
        t.close(f"U1* at p_s={ps:+.2f}", 1 / 9, u1, 1e-9)
    rep = analysis.profitability_report(base)
    t.check("verdict", "not profitable", rep.verdict, rep.verdict == "not profitable")
    t.close("numeric dU1*/dp_s", 0.0, rep.numeric_derivative, 1e-8)
    _oracle_rows(t, base, solve(base))
    return t


def _reproduce_pwl(name: str, title: str, case: str, p_star: float, p_theta: float) -> Table:
    t = Table(title)
    s = bundled(name)
    eq = solve(s, "printed")
    t.check("case (printed analysis)", case, eq.case, eq.case == case)
    t.close("p*", p_star, eq.p_star, 1e-12)
    t.close("p_theta", p_theta, s.demand.p_theta, 1e-12)
    if eq.type == "point":
        t.close("p1*", p_star / 2 - s.p_s, eq.p1, 1e-12)
        t.close("p2*", p_star / 2 + s.p_s, eq.p2, 1e-12)
    else:
        t.close("p1* lower end", 0.25 - s.p_s, eq.p1_lo, 1e-12)
        t.close("p1* upper end", 0.5 - s.p_s, eq.p1_hi, 1e-12)
    _oracle_rows(t, s, eq)
    return t


def reproduce_pwl1() -> Table:
    return _reproduce_pwl("pwl1", "PWL example 1: D_max = 2.5 D_theta = 1, d_max = 5 d_theta = 1",
                          "p*>p_θ", 2 / 3, 0.6)


def reproduce_pwl2() -> Table:
    return _reproduce_pwl("pwl2", "PWL example 2: D_max = 6 D_theta = 1, d_max = 6 d_theta = 1",
                          "p*<p_θ", 2 / 3, 5 / 6)


def reproduce_pwl3() -> Table:
    return _reproduce_pwl("pwl3", "PWL example 3: D_max = 4 D_theta = 1, d_max = 5 d_theta = 1, p_s = 1/8",
                          "p*=p_θ", 0.75, 0.75)


def reproduce_smooth() -> Table:
    t = Table("Smooth convex demand: D_max = 1, p_max = 1, alpha = 2")
    s = bundled("smooth")
    eq = solve(s)
    t.close("p1*", 0.25, eq.p1, 1e-12)
    t.close("p2*", 0.25, eq.p2, 1e-12)
    model = s.demand
    p = eq.p_star
    t.close("2 D(p*) + p* D'(p*)", 0.0, 2 * model.demand(p) + p * model.slope(p)[1], 1e-12)
    t.close("U1*", 1 / 16, utilities(s, eq.p1, eq.p2)[0], 1e-12)
    _oracle_rows(t, s, eq)
    rep = analysis.profitability_report(bundled("smooth_split"))
    t.close("smooth split dU1*/dp_s", 0.09375, rep.analytic_derivative, 1e-12)
    t.check("smooth split verdict", "profitable", rep.verdict, rep.verdict == "profitable")
    return t


def reproduce_transit() -> Table:
    t = Table("Eyeball ISPs with transit: delta = phi = 0.5, alpha = 1, p_max = 1, p_t = 0.2")
    s = bundled("transit")
    eq = equilibrium.solve_eyeball(s, "derived", case="A")
    t.close("case A p_a*", 0.54, eq.p1, 1e-12)
    t.close("case A p_b*", 0.5, eq.p2, 1e-12)
    Da, Db = s.parts
    t.close("Phi_b D_a(p_b*)", 0.2, s.Phi_b * Da.demand(eq.p2), 1e-12)
    t.close("Phi_a D_b(p_a*)", 0.184, s.Phi_a * Db.demand(eq.p1), 1e-12)
    rep = verify_nep(s, eq.p1, eq.p2, grid_step=1e-3, epsilon=1e-5)
    t.check("verify_nep (eps 1e-5, grid 1e-3)", "pass", "pass" if rep.passed else "fail", rep.passed)
    printed = {c.case: c for c in equilibrium.transit_candidates(s, "printed")}["A"]
    t.check("printed case A FOC residual", "nonzero", printed.foc_residual, abs(printed.foc_residual) > 1e-9)
    _oracle_rows(t, s, eq)
    return t


REPRODUCE = {"thm1": reproduce_thm1, "pwl1": reproduce_pwl1, "pwl2": reproduce_pwl2,
             "pwl3": reproduce_pwl3, "smooth": reproduce_smooth, "transit": reproduce_transit}


def cmd_reproduce(args) -> int:
    table = REPRODUCE[args.target]()
    sys.stdout.write(table.render())
    return EXIT_OK if table.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidepay", description="Side-payment pricing games between ISPs and content providers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file, or @name for a bundled example")
        p.add_argument("--out", help="write output to this file instead of stdout")
        p.set_defaults(func=func)
        return p

    p = scenario_cmd("solve", cmd_solve, "closed-form equilibrium")
    p.add_argument("--mode", choices=equilibrium.MODES, default="derived")

    p = scenario_cmd("verify", cmd_verify, "check a price pair against grid deviations")
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--solution", help="JSON output of `solve` to verify instead of --p1/--p2")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--eps", type=float)

    p = scenario_cmd("oracle", cmd_oracle, "exhaustive epsilon-Nash grid search")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--all", action="store_true", help="keep zero-price and zero-demand grid points")

    p = scenario_cmd("profit", cmd_profit, "side-payment profitability report")
    p.add_argument("--mode", choices=equilibrium.MODES, default="derived")

    scenario_cmd("transit", cmd_transit, "transit-game case report")

    p = scenario_cmd("dynamics", cmd_dynamics, "integrate price dynamics, CSV output")
    p.add_argument("--init", type=pair, required=True, metavar="P1,P2")
    p.add_argument("--mode", choices=dynamics.MODES, default="best_response_relaxation")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--t-max", type=float, default=200.0)

    p = scenario_cmd("field", cmd_field, "sample the marginal-utility vector field, CSV output")
    p.add_argument("--box", type=pair, default=(0.0, 1.0), metavar="LO,HI")
    p.add_argument("--res", type=int, default=21)

    p = scenario_cmd("sweep", cmd_sweep, "re-solve over a parameter range, CSV output")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--mode", choices=equilibrium.MODES, default="derived")

    p = sub.add_parser("reproduce", help="regenerate a worked example with an expected-vs-computed table")
    p.add_argument("target", choices=sorted(REPRODUCE))
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

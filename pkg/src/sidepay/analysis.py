"""Side-payment profitability verdicts, transit-case reports and parameter sweeps."""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .equilibrium import Equilibrium, solve, transit_candidates
from .errors import SolverError, ValidationError
from .game import KINDS, Scenario, utilities
from .oracle import numeric_profit_derivative

PROFIT_TOL = 1e-9
ZERO_TOL = 1e-8


@dataclass(frozen=True)
class ProfitabilityReport:
    kind: str
    analytic_derivative: float
    numeric_derivative: Optional[float]
    printed_condition_verdict: bool
    derived_condition_verdict: bool
    consistent: bool
    verdict: str
    beneficiary: str
    isp_numeric_derivative: Optional[float] = None
    cp_numeric_derivative: Optional[float] = None
    antisymmetric: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    @property
    def profitable(self) -> bool:
        return self.verdict == "profitable"

    def to_dict(self) -> dict:
        return asdict(self)


def _sign(x: Optional[float], tol: float) -> Optional[int]:
    if x is None:
        return None
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def _printed_condition(D1: float, D2: float, d1: float, d2: float) -> bool:
    ratio = 2 * D2 / D1
    return min(ratio, 1.0) > d2 / d1 or max(ratio, 1.0) < d2 / d1


def profitability_report(s: Scenario, mode: str = "derived") -> ProfitabilityReport:
    """Derivative of equilibrium revenue in ``p_s`` at ``p_s = 0``, three ways.

    For ``split_linear_content`` the report is oriented toward the content
    provider: the analytic and numeric derivatives are those of ``-U2*``.
    """
    if "p_s" not in s.params:
        raise ValidationError(f"{s.kind} scenarios have no side payment")
    base = s.with_params(p_s=0.0)
    eq = solve(base, mode)
    if eq.type == "none" and not eq.alternatives:
        raise SolverError(f"no interior equilibrium at p_s = 0: {eq.reason}")
    P = base.params
    kind = s.kind
    notes: List[str] = []
    beneficiary = "ISP"
    if kind in ("communal_linear", "smooth_communal", "pwl_communal"):
        analytic = 0.0
        printed = False
    elif kind == "split_linear_bandwidth":
        D1, D2, d1, d2 = P["D_max_1"], P["D_max_2"], P["d_1"], P["d_2"]
        analytic = 2 * d1 / 9 * (1 - d1 / d2) * (2 * D1 / d1 - D2 / d2)
        printed = _printed_condition(D1, D2, d1, d2)
    elif kind == "split_linear_content":
        D1, D2, d1, d2 = P["D_max_1"], P["D_max_2"], P["d_1"], P["d_2"]
        analytic = 2 * d2 / 9 * (1 - d2 / d1) * (2 * D2 / d2 - D1 / d1)
        printed = _printed_condition(D2, D1, d2, d1)
        beneficiary = "content provider"
        notes.append("analytic and numeric derivatives are of -U2* (index-swapped expression)")
    elif kind == "smooth_split":
        D1, D2, a = P["D_max_1"], P["D_max_2"], P["alpha"]
        analytic = D1 * (a / (2 + a)) ** a * (D2 - D1) * (1 + a) / (D2 * (2 + a))
        printed = D2 > D1
    else:
        raise ValidationError(f"no profitability analysis for kind {kind!r}")

    numeric: Optional[float] = None
    isp = cp = None
    try:
        isp = numeric_profit_derivative(base, player=1, mode=mode)
        cp = numeric_profit_derivative(base, player=2, mode=mode)
        numeric = -cp if kind == "split_linear_content" else isp
    except SolverError as exc:
        notes.append(f"numeric derivative unavailable: {exc}")

    antisymmetric = None
    if kind == "split_linear_content" and numeric is not None:
        s1, s2 = _sign(isp, ZERO_TOL), _sign(cp, ZERO_TOL)
        antisymmetric = s1 == -s2

    derived = analytic > PROFIT_TOL
    signs = {_sign(analytic, PROFIT_TOL) > 0, printed}
    if numeric is not None:
        signs.add(_sign(numeric, ZERO_TOL) > 0)
    return ProfitabilityReport(
        kind=kind, analytic_derivative=analytic, numeric_derivative=numeric,
        printed_condition_verdict=bool(printed), derived_condition_verdict=derived,
        consistent=len(signs) == 1, verdict="profitable" if derived else "not profitable",
        beneficiary=beneficiary, isp_numeric_derivative=isp, cp_numeric_derivative=cp,
        antisymmetric=antisymmetric, notes=notes)


@dataclass(frozen=True)
class TransitCase:
    case: str
    derived_candidate: tuple
    printed_candidate: tuple
    flow_to_a: float
    consistent: bool
    printed_foc_residual: float
    printed_bound: float
    printed_bound_holds: bool
    derived_lower_bound: float
    derived_upper_bound: float
    derived_bound_holds: bool
    printed_requirement: str
    printed_requirement_holds: bool


@dataclass(frozen=True)
class TransitCaseReport:
    delta: float
    phi: float
    cases: Dict[str, TransitCase]
    consistent_case: Optional[str]
    summary: str
    warnings: List[str]

    def to_dict(self) -> dict:
        return asdict(self)


def transit_case_report(s: Scenario) -> TransitCaseReport:
    """Both flow-direction cases of the transit game, printed and re-derived.

    The case inequality is evaluated directly at each candidate. Bounds on
    ``p_t/p_max`` are listed next to it: the printed upper bound and the
    lower bound that the case inequality actually implies, plus the interior
    upper bound.
    """
    if s.kind != "eyeball_transit":
        raise ValidationError(f"expected an eyeball_transit scenario, got {s.kind!r}")
    a, pm, pt = s.alpha, s.p_max, s.p_t
    delta, phi = s.delta, s.phi
    Phi_a, Phi_b = s.Phi_a, s.Phi_b
    derived = {c.case: c for c in transit_candidates(s, "derived")}
    printed = {c.case: c for c in transit_candidates(s, "printed")}
    x = pt / pm
    cases = {}
    for case in ("A", "B"):
        if case == "A":
            ratio, coef_printed, coef_derived = phi / delta, Phi_b * delta, Phi_a * delta
            requirement, req_holds = "phi < delta", phi < delta
        else:
            ratio, coef_printed, coef_derived = delta / phi, Phi_a / delta, Phi_b / delta
            requirement, req_holds = "phi > delta", phi > delta
        shrink = 1 - ratio ** (1 / a)
        printed_bound = min(1 / (1 + a), shrink / coef_printed)
        lower = shrink / coef_derived
        upper = min(1 / (1 + a), 1 / coef_derived)
        d, p = derived[case], printed[case]
        cases[case] = TransitCase(
            case=case, derived_candidate=(d.p_a, d.p_b), printed_candidate=(p.p_a, p.p_b),
            flow_to_a=d.flow_to_a, consistent=bool(d.consistent and d.interior),
            printed_foc_residual=p.foc_residual, printed_bound=printed_bound,
            printed_bound_holds=x < printed_bound, derived_lower_bound=lower,
            derived_upper_bound=upper, derived_bound_holds=lower < x < upper,
            printed_requirement=requirement, printed_requirement_holds=req_holds)
    ok = [c for c in ("A", "B") if cases[c].consistent]
    if len(ok) == 1:
        consistent_case, summary = ok[0], f"case {ok[0]} consistent"
    elif ok:
        consistent_case, summary = None, "both cases A and B consistent"
    elif all(cases[c].flow_to_a == 0 for c in cases):
        consistent_case, summary = None, "balanced flow: no strict case holds"
    else:
        consistent_case, summary = None, "no case consistent"
    warnings = sorted({w for c in derived.values() for w in c.warnings})
    return TransitCaseReport(delta, phi, cases, consistent_case, summary, warnings)


SWEEP_COLUMNS = ("type", "case", "p1", "p2", "U1", "U2", "reason")


def sweep_values(start: float, stop: float, step: float) -> np.ndarray:
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValidationError("sweep bounds and step must be finite")
    if step <= 0:
        raise ValidationError(f"sweep step must be > 0, got {step}")
    if stop < start:
        raise ValidationError(f"sweep needs from <= to, got {start} > {stop}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1)


def sweep(s: Scenario, param: str, start: float, stop: float, step: float,
          mode: str = "derived") -> List[dict]:
    """Re-solve the scenario for each value of ``param``; one row per value.

    Segments are reported at their midpoint. Values that make the scenario invalid
    or leave no equilibrium produce ``type = "none"`` rows with a reason.
    """
    if param not in KINDS[s.kind]:
        raise ValidationError(f"unknown parameter {param!r} for kind {s.kind!r}; "
                              f"expected one of {list(KINDS[s.kind])}")
    rows = []
    for value in sweep_values(start, stop, step):
        row = {param: float(value), "type": "none", "case": "", "p1": None, "p2": None,
               "U1": None, "U2": None, "reason": ""}
        try:
            sv = s.with_params(**{param: float(value)})
            eq = solve(sv, mode)
        except (ValidationError, SolverError) as exc:
            row["reason"] = str(exc)
            rows.append(row)
            continue
        row["type"], row["case"] = eq.type, eq.case or ""
        if eq.type == "none":
            row["reason"] = eq.reason or ""
        else:
            if eq.type == "segment":
                p1 = 0.5 * (eq.p1_lo + eq.p1_hi)
                p2 = eq.p_sum - p1
            else:
                p1, p2 = eq.p1, eq.p2
            u1, u2 = utilities(sv, p1, p2)
            row.update(p1=p1, p2=p2, U1=u1, U2=u2)
        rows.append(row)
    return rows


def sweep_csv(rows: List[dict], param: str, out=None) -> str:
    buf = io.StringIO()
    header = (param,) + SWEEP_COLUMNS
    buf.write(",".join(header) + "\n")
    for row in rows:
        cells = []
        for key in header:
            v = row[key]
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append("%.12g" % v)
            else:
                text = str(v)
                cells.append('"' + text.replace('"', '""') + '"' if ("," in text or '"' in text) else text)
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text

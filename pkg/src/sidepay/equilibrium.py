"""Closed-form interior Nash equilibria for every scenario kind, plus grid verification.

Two scenario kinds carry a ``mode``:

``pwl_communal``
    ``"printed"`` applies the published three-case classification (steep-line
    equilibrium labelled ``p*>p_θ``, the ``2 D_θ / 3 d_θ`` equilibrium labelled
    ``p*<p_θ`` and the kink segment). ``"derived"`` solves the max-of-lines demand
    directly: one candidate per linear piece, kept only if it lies on its piece and
    survives a global best-reply check. A convex kink can never host an
    equilibrium, so no segment is produced in derived mode.

``eyeball_transit``
    ``"printed"`` uses the published cross-term cache fraction (the opponent's);
    ``"derived"`` uses the coefficient obtained by differentiating the utilities (the
    own one).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from . import game
from .errors import SolverError, ValidationError
from .game import Scenario, best_reply, utilities, utility_gradient

MODES = ("printed", "derived")
_MODE_ALIASES = {"as_printed": "printed", "as_derived": "derived"}


def _mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class Equilibrium:
    """An interior equilibrium: a point, an open segment on ``p1 + p2 = p_sum``, or none."""

    type: str
    case: str = ""
    p1: Optional[float] = None
    p2: Optional[float] = None
    p_sum: Optional[float] = None
    p1_lo: Optional[float] = None
    p1_hi: Optional[float] = None
    reason: str = ""
    warnings: Tuple[str, ...] = ()
    alternatives: Tuple["Equilibrium", ...] = field(default=(), compare=False)

    @classmethod
    def point(cls, p1, p2, case, warnings=()):
        return cls("point", case=case, p1=float(p1), p2=float(p2), warnings=tuple(warnings))

    @classmethod
    def segment(cls, p_sum, p1_lo, p1_hi, case):
        if not p1_lo < p1_hi:
            raise ValueError("segment interval must be nonempty")
        return cls("segment", case=case, p_sum=float(p_sum), p1_lo=float(p1_lo), p1_hi=float(p1_hi))

    @classmethod
    def none(cls, reason, alternatives=(), warnings=()):
        return cls("none", reason=reason, alternatives=tuple(alternatives), warnings=tuple(warnings))

    @property
    def p_star(self) -> Optional[float]:
        if self.type == "point":
            return self.p1 + self.p2
        return self.p_sum

    def contains(self, p1: float, p2: float) -> bool:
        """Strict membership test for a segment (open interval, no tolerance)."""
        if self.type != "segment":
            raise ValueError("contains() applies to segments only")
        return p1 + p2 == self.p_sum and self.p1_lo < p1 < self.p1_hi

    def samples(self, n: int = 10) -> List[game.PricePoint]:
        """``n`` equally spaced interior points (segment) or the point itself."""
        if self.type == "point":
            return [game.PricePoint(self.p1, self.p2)]
        if self.type == "segment":
            xs = np.linspace(self.p1_lo, self.p1_hi, n + 2)[1:-1]
            return [game.PricePoint(float(x), self.p_sum - float(x)) for x in xs]
        return []

    def to_dict(self) -> dict:
        if self.type == "point":
            doc = {"type": "point", "p1": self.p1, "p2": self.p2, "p_star": self.p_star, "case": self.case}
        elif self.type == "segment":
            doc = {"type": "segment", "p_sum": self.p_sum, "p1_lo": self.p1_lo, "p1_hi": self.p1_hi,
                   "case": self.case}
        else:
            doc = {"type": "none", "reason": self.reason}
            if self.alternatives:
                doc["alternatives"] = [a.to_dict() for a in self.alternatives]
        if self.warnings:
            doc["warnings"] = list(self.warnings)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Equilibrium":
        kind = doc.get("type")
        try:
            if kind == "point":
                return cls.point(doc["p1"], doc["p2"], doc.get("case", ""), doc.get("warnings", ()))
            if kind == "segment":
                return cls.segment(doc["p_sum"], doc["p1_lo"], doc["p1_hi"], doc.get("case", ""))
            if kind == "none":
                alternatives = [cls.from_dict(a) for a in doc.get("alternatives", ())]
                return cls.none(doc.get("reason", ""), alternatives, doc.get("warnings", ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed equilibrium document: {exc}") from exc
        raise ValidationError(f"type: unknown equilibrium type {kind!r}")


def _symmetric_split(p_star: float, p_s: float, case: str) -> Equilibrium:
    return Equilibrium.point(p_star / 2 - p_s, p_star / 2 + p_s, case)


def solve_communal_linear(s: Scenario) -> Equilibrium:
    bound = s.D_max / (3 * s.d)
    if not abs(s.p_s) < bound:
        return Equilibrium.none(f"|p_s| >= D_max/(3d): |{s.p_s:.12g}| >= {bound:.12g}")
    return Equilibrium.point(bound - s.p_s, bound + s.p_s, "interior")


def solve_split_linear(s: Scenario) -> Equilibrium:
    """Interior equilibrium of the split linear game under either side-payment factoring."""
    if s.kind not in game.SPLIT_LINEAR_KINDS:
        raise ValidationError(f"expected a split_linear_* scenario, got {s.kind!r}")
    D1, D2, d1, d2, ps = s.D_max_1, s.D_max_2, s.d_1, s.d_2, s.p_s
    delta1, delta2 = D1 / d1, D2 / d2
    if s.kind == "split_linear_bandwidth":
        p_star = (delta1 - ps + delta2 + (d1 / d2) * ps) / 3
        p1 = delta1 - p_star - ps
        p2 = p_star - p1
        case = "bandwidth"
    else:
        # bandwidth formulas with providers swapped and the payment reversed
        p_star = (delta2 + ps + delta1 - (d2 / d1) * ps) / 3
        p2 = delta2 - p_star + ps
        p1 = p_star - p2
        case = "content"
    failed = []
    if not p1 > 0:
        failed.append(f"p1* = {p1:.12g} <= 0")
    if not p2 > 0:
        failed.append(f"p2* = {p2:.12g} <= 0")
    if not D1 - d1 * p_star > 0:
        failed.append("D1(p*) <= 0")
    if not D2 - d2 * p_star > 0:
        failed.append("D2(p*) <= 0")
    if failed:
        return Equilibrium.none("no interior equilibrium: " + ", ".join(failed))
    return _globally_checked(s, Equilibrium.point(p1, p2, case))


def pwl_printed_cases(s: Scenario):
    """Evaluate the three published case conditions; returns ``(label, result_or_None, why)``."""
    m = s.parts[0]
    Dm, Dt, dm, dt, ps = m.D_max, m.D_theta, m.d_max, m.d_theta, s.p_s
    pt = m.p_theta
    out = []

    p_star = 2 * Dm / (3 * dm)
    if 3 * Dt > Dm and abs(ps) < p_star / 2:
        out.append(("p*>p_θ", _symmetric_split(p_star, ps, "p*>p_θ"), ""))
    else:
        why = "3 D_theta <= D_max" if not 3 * Dt > Dm else f"|p_s| >= p*/2 = {p_star / 2:.12g}"
        out.append(("p*>p_θ", None, why))

    p_star = 2 * Dt / (3 * dt)
    if p_star < pt and abs(ps) < p_star / 2:
        out.append(("p*<p_θ", _symmetric_split(p_star, ps, "p*<p_θ"), ""))
    else:
        why = (f"2 D_theta/(3 d_theta) = {p_star:.12g} >= p_theta = {pt:.12g}" if not p_star < pt
               else f"|p_s| >= p*/2 = {p_star / 2:.12g}")
        out.append(("p*<p_θ", None, why))

    lo = max(Dt / dm - ps, 2 * pt - Dt / dt - ps, 0.0)
    hi = min((Dm - 2 * Dt) / dm - ps, Dt / dt - pt - ps, pt)
    if lo < hi:
        out.append(("p*=p_θ", Equilibrium.segment(pt, lo, hi, "p*=p_θ"), ""))
    else:
        out.append(("p*=p_θ", None, f"empty kink interval: {lo:.12g} >= {hi:.12g}"))
    return out


def _is_mutual_best_reply(s: Scenario, p1: float, p2: float, rtol: float = 1e-12) -> bool:
    u1, u2 = utilities(s, p1, p2)
    b1 = best_reply(s, 1, p2)[1]
    b2 = best_reply(s, 2, p1)[1]
    scale = max(1.0, abs(u1), abs(u2))
    return b1 - u1 <= rtol * scale and b2 - u2 <= rtol * scale


def _globally_checked(s: Scenario, eq: Equilibrium, rtol: float = 1e-9) -> Equilibrium:
    """Keep a first-order point only if it survives global deviations.

    A side payment can push one player's revenue below zero at the stationary
    point; that player then does better by pricing its demand away.
    """
    u = utilities(s, eq.p1, eq.p2)
    scale = max(1.0, abs(u[0]), abs(u[1]))
    for player, other in ((1, eq.p2), (2, eq.p1)):
        price, best = best_reply(s, player, other)
        if best - u[player - 1] > rtol * scale:
            return Equilibrium.none(
                f"first-order point ({eq.p1:.12g}, {eq.p2:.12g}) is not an equilibrium: player {player} "
                f"earns {u[player - 1]:.12g} there but {best:.12g} at price {price:.12g}")
    return eq


def pwl_derived_equilibria(s: Scenario) -> List[Equilibrium]:
    """All interior equilibria of the max-of-lines demand game."""
    m = s.parts[0]
    ps = s.p_s
    found = []
    for label, intercept, slope, on_piece in (
            ("p*<p_θ", m.D_max, m.d_max, lambda p: p < m.p_theta),
            ("p*>p_θ", m.D_hat_theta, m.d_theta, lambda p: m.p_theta < p < m.p_max)):
        p_star = 2 * intercept / (3 * slope)
        if not (on_piece(p_star) and abs(ps) < p_star / 2):
            continue
        eq = _symmetric_split(p_star, ps, label)
        if _is_mutual_best_reply(s, eq.p1, eq.p2):
            found.append(eq)
    return found


def solve_pwl_communal(s: Scenario, mode: str = "printed") -> Equilibrium:
    if s.kind != "pwl_communal":
        raise ValidationError(f"expected a pwl_communal scenario, got {s.kind!r}")
    if _mode(mode) == "printed":
        cases = pwl_printed_cases(s)
        hits = [(label, result) for label, result, _ in cases if result is not None]
        if hits:
            label, result = hits[0]
            if len(hits) > 1:
                # the printed case conditions can overlap; keep the first, flag the rest
                others = ", ".join(other for other, _ in hits[1:])
                result = dataclasses.replace(
                    result, warnings=result.warnings + (f"printed cases overlap: {label} reported, {others} also hold",))
            return result
        return Equilibrium.none("; ".join(f"case {label}: {why}" for label, _, why in cases))
    found = pwl_derived_equilibria(s)
    if len(found) == 1:
        return found[0]
    if not found:
        return Equilibrium.none("no piece yields an interior equilibrium that survives global deviations")
    return Equilibrium.none(f"{len(found)} interior equilibria", alternatives=found)


def _smooth_residual(model, p: float) -> float:
    return 2 * model.demand(p) + p * model.slope(p)[1]


def smooth_root(model) -> float:
    """Root of ``2 D(p) + p D'(p)`` on ``(0, p_max)`` by bracketed root finding."""
    # the residual is positive at 0 and vanishes at p_max when alpha > 1, so walk
    # the upper end toward p_max until it turns negative
    for k in range(1, 53):
        hi = model.p_max * (1 - 2.0 ** -k)
        if _smooth_residual(model, hi) < 0:
            return brentq(lambda p: _smooth_residual(model, p), 0.0, hi,
                          xtol=1e-15, rtol=4 * np.finfo(float).eps)
    raise SolverError("could not bracket the root of 2D + pD'")


def _foc_residual(s: Scenario, p1: float, p2: float) -> float:
    (l1, r1), (l2, r2) = utility_gradient(s, p1, p2)
    return max(abs(l1), abs(r1), abs(l2), abs(r2))


def solve_smooth(s: Scenario, tol: float = 1e-10, max_iter: int = 10_000) -> Equilibrium:
    if s.kind == "smooth_communal":
        model = s.parts[0]
        p_star = 2 * model.p_max / (2 + model.alpha)
        root = smooth_root(model)
        if abs(root - p_star) > 1e-12 * max(1.0, p_star):
            raise SolverError(f"closed form p* = {p_star!r} disagrees with bracketed root {root!r}")
        if not abs(s.p_s) < p_star / 2:
            return Equilibrium.none(f"|p_s| >= p*/2 = {p_star / 2:.12g}")
        return _symmetric_split(p_star, s.p_s, "interior")
    if s.kind != "smooth_split":
        raise ValidationError(f"expected a smooth_* scenario, got {s.kind!r}")
    return _solve_smooth_split(s, tol, max_iter)


def _solve_smooth_split(s: Scenario, tol: float, max_iter: int) -> Equilibrium:
    """Damped Jacobi iteration on the two first-order conditions.

    Each sweep moves both prices toward the root of their own first-order condition
    given the opponent's current price; the step is halved whenever the residual
    grows.
    """
    a, pm, ps = s.alpha, s.p_max, s.p_s
    ratio = s.D_max_1 / s.D_max_2

    def foc_roots(p1, p2):
        return (pm - p2 - a * ps) / (a + 1), (pm - p1 + a * ratio * ps) / (a + 1)

    def merit(p):
        # distance to the fixed point of the joint best-response map
        return float(np.hypot(*(np.array(foc_roots(*p)) - p)))

    def residual(p):
        return _foc_residual(s, *p) / max(s.D_max_1, s.D_max_2)

    p = np.array([pm / (2 + a), pm / (2 + a)])
    gap = merit(p)
    step = 1.0
    moved = math.inf
    for _ in range(max_iter):
        if moved <= 1e-15 * pm and residual(p) <= tol:
            break
        target = np.array(foc_roots(*p))
        trial = p + step * (target - p)
        if not (0 <= trial[0] <= pm and 0 <= trial[1] <= pm and trial.sum() <= pm):
            return Equilibrium.none("iteration left the price box [0, p_max]^2")
        trial_gap = merit(trial)
        if trial_gap > gap:
            step /= 2
            if step < 1e-12:
                raise SolverError(f"damped iteration stalled with FOC residual {residual(p):.3e}")
            continue
        moved = float(np.max(np.abs(trial - p)))
        p, gap = trial, trial_gap
    else:
        raise SolverError(f"no convergence after {max_iter} iterations, FOC residual {residual(p):.3e}")
    p1, p2 = float(p[0]), float(p[1])
    if not (p1 > 0 and p2 > 0 and p1 + p2 < pm):
        return Equilibrium.none(f"equilibrium ({p1:.12g}, {p2:.12g}) is not interior")
    return _globally_checked(s, Equilibrium.point(p1, p2, "interior"))


@dataclass(frozen=True)
class TransitCandidate:
    """One closed-form candidate of the transit game (case A or B, one mode)."""

    case: str
    mode: str
    p_a: float
    p_b: float
    flow_to_a: float
    consistent: bool
    interior: bool
    foc_residual: float
    warnings: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {"case": self.case, "mode": self.mode, "p_a": self.p_a, "p_b": self.p_b,
                "flow_to_a": self.flow_to_a, "consistent": self.consistent, "interior": self.interior,
                "foc_residual": self.foc_residual, "warnings": list(self.warnings)}


def transit_candidates(s: Scenario, mode: str = "derived") -> List[TransitCandidate]:
    """Case A (net transit revenue to ISP a) and case B (to ISP b) candidates.

    The case inequality is checked by evaluating both flows at the candidate.
    """
    if s.kind != "eyeball_transit":
        raise ValidationError(f"expected an eyeball_transit scenario, got {s.kind!r}")
    mode = _mode(mode)
    a, pm, pt, delta = s.alpha, s.p_max, s.p_t, s.delta
    base = pm / (1 + a)
    coeff_a = s.Phi_a if mode == "derived" else s.Phi_b
    coeff_b = s.Phi_b if mode == "derived" else s.Phi_a
    Da, Db = s.parts
    out = []
    for case, p_a, p_b in (("A", base + a * coeff_a * delta * pt / (1 + a), base),
                           ("B", base, base + a * coeff_b / delta * pt / (1 + a))):
        flow = s.Phi_b * Da.demand(p_b) - s.Phi_a * Db.demand(p_a)
        consistent = flow > 0 if case == "A" else flow < 0
        interior = 0 < p_a < pm and 0 < p_b < pm
        warnings = []
        if not pt < min(p_a, p_b):
            warnings.append(f"p_t = {pt:.12g} is not below min(p_a, p_b) = {min(p_a, p_b):.12g}")
        if not delta < 1:
            warnings.append(f"delta = {delta:.12g} >= 1 (ISP a is assumed to have the larger demand)")
        out.append(TransitCandidate(case, mode, p_a, p_b, flow, consistent, interior,
                                    _foc_residual(s, p_a, p_b), tuple(warnings)))
    return out


def solve_eyeball(s: Scenario, mode: str = "derived", case: Optional[str] = None) -> Equilibrium:
    """Transit-game equilibrium.

    With ``case=None`` the unique consistent case is returned; if both or neither
    case is consistent the result is ``none`` and names them. ``case="A"`` or
    ``"B"`` returns that case's candidate whenever it is consistent.
    """
    cands = transit_candidates(s, mode)
    if case is not None and case not in ("A", "B"):
        raise ValidationError(f"case must be 'A' or 'B', got {case!r}")

    def as_eq(c: TransitCandidate) -> Equilibrium:
        return Equilibrium.point(c.p_a, c.p_b, c.case, c.warnings)

    ok = [c for c in cands if c.consistent and c.interior and (case is None or c.case == case)]
    if len(ok) == 1:
        return as_eq(ok[0])
    if not ok:
        if all(c.flow_to_a == 0 for c in cands):
            return Equilibrium.none("balanced flow: net transit is zero at the candidate, no strict case holds")
        details = ", ".join(f"case {c.case}: flow_to_a = {c.flow_to_a:.12g}, interior = {c.interior}"
                            for c in cands if case is None or c.case == case)
        return Equilibrium.none("no consistent case: " + details)
    return Equilibrium.none("both cases A and B are consistent", alternatives=[as_eq(c) for c in ok])


def solve(s: Scenario, mode: str = "derived") -> Equilibrium:
    """Dispatch to the closed-form solver for the scenario's kind."""
    kind = s.kind
    if kind == "communal_linear":
        return solve_communal_linear(s)
    if kind in game.SPLIT_LINEAR_KINDS:
        return solve_split_linear(s)
    if kind == "pwl_communal":
        return solve_pwl_communal(s, mode)
    if kind in ("smooth_communal", "smooth_split"):
        return solve_smooth(s)
    return solve_eyeball(s, mode)


@dataclass(frozen=True)
class VerificationReport:
    p1: float
    p2: float
    grid_step: float
    epsilon: float
    gain_1: float
    gain_2: float
    best_deviation_1: float
    best_deviation_2: float
    gradient_1: Tuple[float, float]
    gradient_2: Tuple[float, float]
    foc_ok: bool
    passed: bool

    @property
    def quantization(self) -> float:
        """Largest distance from any price in range to the nearest grid price."""
        return self.grid_step / 2

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "passed": self.passed, "grid_step": self.grid_step,
                "quantization": self.quantization, "epsilon": self.epsilon,
                "gain_1": self.gain_1, "gain_2": self.gain_2,
                "best_deviation_1": self.best_deviation_1, "best_deviation_2": self.best_deviation_2,
                "dU1_dp1": list(self.gradient_1), "dU2_dp2": list(self.gradient_2), "foc_ok": self.foc_ok}


def _foc_ok(grad: Tuple[float, float], tol: float) -> bool:
    left, right = grad
    if abs(left) <= tol and abs(right) <= tol:
        return True
    return left >= -tol and right <= tol


def verify_nep(s: Scenario, p1: float, p2: float, grid_step: Optional[float] = None,
               epsilon: Optional[float] = None, foc_tol: float = 1e-9) -> VerificationReport:
    """Check that neither player gains more than ``epsilon`` by a unilateral grid deviation.

    The deviation grid spans ``[0, ceiling]`` where ceiling is the scenario's
    zero-demand price. Defaults: step ``1e-3 * ceiling``; epsilon ``1e-6`` times the
    largest absolute utility met on the deviation lines.
    """
    ceiling = s.ceiling
    step = grid_step if grid_step is not None else 1e-3 * ceiling
    if not step > 0:
        raise ValidationError(f"grid_step must be > 0, got {step}")
    if epsilon is not None and not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    n = int(math.floor(ceiling / step + 1e-9))
    if n > 10_000_000:
        raise ValidationError(f"deviation grid too fine: {n} points")
    grid = step * np.arange(n + 1)
    u1, u2 = utilities(s, p1, p2)
    dev1 = utilities(s, grid, np.full_like(grid, p2))[0]
    dev2 = utilities(s, np.full_like(grid, p1), grid)[1]
    if epsilon is None:
        epsilon = 1e-6 * max(np.max(np.abs(dev1)), np.max(np.abs(dev2)), abs(u1), abs(u2), 1e-300)
    i1, i2 = int(np.argmax(dev1)), int(np.argmax(dev2))
    gain1, gain2 = float(dev1[i1] - u1), float(dev2[i2] - u2)
    g1, g2 = utility_gradient(s, p1, p2)
    foc = _foc_ok(g1, foc_tol) and _foc_ok(g2, foc_tol)
    return VerificationReport(float(p1), float(p2), float(step), float(epsilon), gain1, gain2,
                              float(grid[i1]), float(grid[i2]), tuple(g1), tuple(g2), bool(foc),
                              bool(gain1 <= epsilon and gain2 <= epsilon))

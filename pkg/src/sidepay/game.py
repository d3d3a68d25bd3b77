"""Game scenarios: player utilities, one-sided marginal utilities and exact best replies.

Player 1 is the access ISP (ISP ``a`` in the transit game) and player 2 the content
provider (ISP ``b``). Utilities are evaluated with zero-clamped demand so that any
nonnegative price pair is a legal input.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, NamedTuple, Tuple

import numpy as np

from .demand import (
    LinearCommunalDemand,
    PwlConvexDemand,
    SmoothConvexDemand,
    SplitLinearDemand,
)
from .errors import ValidationError

KINDS: Dict[str, Tuple[str, ...]] = {
    "communal_linear": ("D_max", "d", "p_s"),
    "split_linear_bandwidth": ("D_max_1", "D_max_2", "d_1", "d_2", "p_s"),
    "split_linear_content": ("D_max_1", "D_max_2", "d_1", "d_2", "p_s"),
    "pwl_communal": ("D_max", "D_theta", "d_max", "d_theta", "p_s"),
    "smooth_communal": ("D_max", "p_max", "alpha", "p_s"),
    "smooth_split": ("D_max_1", "D_max_2", "p_max", "alpha", "p_s"),
    "eyeball_transit": ("D_max_a", "D_max_b", "p_max", "alpha", "Phi_a", "Phi_b", "p_t"),
}

COMMUNAL_KINDS = ("communal_linear", "pwl_communal", "smooth_communal")
SPLIT_LINEAR_KINDS = ("split_linear_bandwidth", "split_linear_content")


class PricePoint(NamedTuple):
    p1: float
    p2: float


@dataclass(frozen=True)
class Scenario:
    """A complete game instance: a scenario kind plus its numeric parameters.

    Parameters are reachable as attributes, e.g. ``s.p_s`` or ``s.Phi_a``.
    """

    kind: str
    params: Mapping[str, float]
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind: unknown scenario kind {self.kind!r}; expected one of {sorted(KINDS)}")
        expected = set(KINDS[self.kind])
        given = set(self.params)
        if given - expected:
            raise ValidationError(f"params: unknown keys {sorted(given - expected)} for kind {self.kind!r}")
        if expected - given:
            raise ValidationError(f"params: missing keys {sorted(expected - given)} for kind {self.kind!r}")
        clean = {}
        for key in KINDS[self.kind]:
            value = self.params[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"params.{key}: must be a finite number, got {value!r}")
            clean[key] = float(value)
        object.__setattr__(self, "params", clean)
        if self.kind == "eyeball_transit":
            for key in ("Phi_a", "Phi_b"):
                if not 0 < clean[key] <= 1:
                    raise ValidationError(f"params.{key}: cache-miss fraction must lie in (0, 1], got {clean[key]}")
            if clean["p_t"] < 0:
                raise ValidationError(f"params.p_t: transit price must be >= 0, got {clean['p_t']}")
        # builds and validates the demand model(s)
        object.__setattr__(self, "_parts", self._build_parts())
        object.__setattr__(self, "_ceiling", max(part.zero_price for part in self._parts))

    def __getattr__(self, name):
        if name.startswith("_") or name in ("params", "kind", "notes"):
            raise AttributeError(name)
        try:
            return self.params[name]
        except KeyError:
            raise AttributeError(f"{self.kind} scenario has no parameter {name!r}") from None

    def _build_parts(self):
        p = self.params
        kind = self.kind
        if kind == "communal_linear":
            m = LinearCommunalDemand(p["D_max"], p["d"])
            return m, m
        if kind in SPLIT_LINEAR_KINDS:
            return SplitLinearDemand(p["D_max_1"], p["D_max_2"], p["d_1"], p["d_2"]).parts
        if kind == "pwl_communal":
            m = PwlConvexDemand(p["D_max"], p["D_theta"], p["d_max"], p["d_theta"])
            return m, m
        if kind == "smooth_communal":
            m = SmoothConvexDemand(p["D_max"], p["p_max"], p["alpha"])
            return m, m
        if kind == "smooth_split":
            return (SmoothConvexDemand(p["D_max_1"], p["p_max"], p["alpha"]),
                    SmoothConvexDemand(p["D_max_2"], p["p_max"], p["alpha"]))
        return (SmoothConvexDemand(p["D_max_a"], p["p_max"], p["alpha"]),
                SmoothConvexDemand(p["D_max_b"], p["p_max"], p["alpha"]))

    @property
    def parts(self):
        """Per-provider demand models (the same object twice for communal demand)."""
        return self._parts

    @property
    def demand(self):
        """The scenario's demand model in its natural family form."""
        if self.kind in COMMUNAL_KINDS:
            return self._parts[0]
        if self.kind in SPLIT_LINEAR_KINDS:
            p = self.params
            return SplitLinearDemand(p["D_max_1"], p["D_max_2"], p["d_1"], p["d_2"])
        return self._parts

    @property
    def ceiling(self) -> float:
        """Largest price worth considering: where the relevant demand reaches zero."""
        return self._ceiling

    @property
    def delta(self) -> float:
        return self.params["D_max_b"] / self.params["D_max_a"]

    @property
    def phi(self) -> float:
        return self.params["Phi_b"] / self.params["Phi_a"]

    def with_params(self, **changes: float) -> "Scenario":
        unknown = set(changes) - set(KINDS[self.kind])
        if unknown:
            raise ValidationError(f"unknown parameter(s) {sorted(unknown)} for kind {self.kind!r}")
        return Scenario(self.kind, {**self.params, **changes}, self.notes)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "params": dict(self.params)}
        if self.notes:
            doc["notes"] = self.notes
        return doc


def scenario_from_dict(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ValidationError("$: scenario document must be a JSON object")
    extra = set(doc) - {"kind", "params", "notes"}
    if extra:
        raise ValidationError(f"$: unknown top-level keys {sorted(extra)}")
    if "kind" not in doc or not isinstance(doc["kind"], str):
        raise ValidationError("kind: missing or not a string")
    if "params" not in doc or not isinstance(doc["params"], dict):
        raise ValidationError("params: missing or not an object")
    notes = doc.get("notes", "")
    if not isinstance(notes, str):
        raise ValidationError("notes: must be a string")
    return Scenario(doc["kind"], doc["params"], notes)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read scenario file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return scenario_from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _check_prices(p1, p2):
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    if not ((a >= 0).all() and (b >= 0).all()):
        raise ValidationError(f"prices must be >= 0, got ({p1!r}, {p2!r})")
    return a, b


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def utilities(s: Scenario, p1, p2):
    """Revenue rates ``(U1, U2)`` at prices ``(p1, p2)``; broadcasts over arrays."""
    p1, p2 = _check_prices(p1, p2)
    kind = s.kind
    one, two = s.parts
    if kind in COMMUNAL_KINDS:
        D = one.demand(p1 + p2)
        u1 = (p1 + s.p_s) * D
        u2 = (p2 - s.p_s) * D
    elif kind in ("split_linear_bandwidth", "smooth_split"):
        D1, D2 = one.demand(p1 + p2), two.demand(p1 + p2)
        u1 = (p1 + s.p_s) * D1
        u2 = p2 * D2 - s.p_s * D1
    elif kind == "split_linear_content":
        D1, D2 = one.demand(p1 + p2), two.demand(p1 + p2)
        u1 = p1 * D1 + s.p_s * D2
        u2 = (p2 - s.p_s) * D2
    else:
        pa, pb = p1, p2
        flow = s.Phi_b * one.demand(pb) - s.Phi_a * two.demand(pa)
        u1 = one.demand(pa) * pa + np.maximum(flow, 0.0) * s.p_t
        u2 = two.demand(pb) * pb + np.maximum(-flow, 0.0) * s.p_t
    return _out(np.asarray(u1, dtype=float)), _out(np.asarray(u2, dtype=float))


def utility_gradient(s: Scenario, p1, p2):
    """One-sided own-price marginal utilities ``((dU1 left, right), (dU2 left, right))``."""
    p1, p2 = _check_prices(p1, p2)
    kind = s.kind
    one, two = s.parts
    ps = s.params.get("p_s", 0.0)
    grads = []
    if kind == "eyeball_transit":
        pa, pb = p1, p2
        Da_a, Db_a = one.demand(pa), two.demand(pa)
        Da_b, Db_b = one.demand(pb), two.demand(pb)
        flow_a = s.Phi_b * Da_b - s.Phi_a * Db_a   # transit owed to ISP a when positive
        flow_b = -flow_a
        for own_model, cross_model, own_price, own_demand, Phi, flow in (
                (one, two, pa, Da_a, s.Phi_a, flow_a),
                (two, one, pb, Db_b, s.Phi_b, flow_b)):
            own_slope = own_model.slope(own_price)
            cross_slope = cross_model.slope(own_price)
            sides = []
            for side in (0, 1):
                base = own_slope[side] * own_price + own_demand
                transit = -Phi * cross_slope[side] * s.p_t
                # the positive part switches on as the own price rises
                active = (flow > 0) if side == 0 else (flow > 0) | ((flow == 0) & (transit > 0))
                sides.append(_out(base + np.where(active, transit, 0.0)))
            grads.append(tuple(sides))
        return tuple(grads)

    p = p1 + p2
    D1, D2 = one.demand(p), two.demand(p)
    S1, S2 = one.slope(p), two.slope(p)
    for side in (0, 1):
        s1, s2 = S1[side], S2[side]
        if kind in COMMUNAL_KINDS:
            g1 = D1 + (p1 + ps) * s1
            g2 = D1 + (p2 - ps) * s1
        elif kind in ("split_linear_bandwidth", "smooth_split"):
            g1 = D1 + (p1 + ps) * s1
            g2 = D2 + p2 * s2 - ps * s1
        else:
            g1 = D1 + p1 * s1 + ps * s2
            g2 = D2 + (p2 - ps) * s2
        grads.append((_out(np.asarray(g1, dtype=float)), _out(np.asarray(g2, dtype=float))))
    (l1, l2), (r1, r2) = grads
    return (l1, r1), (l2, r2)


def demand_positive(s: Scenario, p1, p2):
    """Whether every demand entering the utilities is strictly positive."""
    p1, p2 = _check_prices(p1, p2)
    one, two = s.parts
    if s.kind == "eyeball_transit":
        ok = (np.asarray(one.demand(p1)) > 0) & (np.asarray(two.demand(p2)) > 0)
    else:
        ok = (np.asarray(one.demand(p1 + p2)) > 0) & (np.asarray(two.demand(p1 + p2)) > 0)
    return _out(ok) if np.ndim(ok) else bool(ok)


def _reply_candidates(s: Scenario, player: int, q: float):
    """Prices at which a player's global best reply to opponent price ``q`` can sit:
    interval ends, non-smooth points and the stationary point of every smooth piece."""
    kind = s.kind
    P = s.params
    c = P.get("p_s", 0.0) * (1 if player == 1 else -1)
    out = [0.0, s.ceiling]
    if kind in ("communal_linear", "pwl_communal"):
        model = s.parts[0]
        if kind == "communal_linear":
            pieces, breaks = [(model.D_max, model.d)], [model.zero_price]
        else:
            pieces = [(model.D_max, model.d_max), (model.D_hat_theta, model.d_theta)]
            breaks = [model.p_theta, model.p_max]
        out += [(A / slope - q - c) / 2 for A, slope in pieces]
        out += [b - q for b in breaks]
    elif kind == "smooth_communal":
        a, pm = P["alpha"], P["p_max"]
        out += [(pm - q - a * c) / (a + 1), pm - q]
    elif kind in SPLIT_LINEAR_KINDS:
        D1, D2, d1, d2, ps = P["D_max_1"], P["D_max_2"], P["d_1"], P["d_2"], P["p_s"]
        delta1, delta2 = D1 / d1, D2 / d2
        out += [delta1 - q, delta2 - q]
        if kind == "split_linear_bandwidth":
            if player == 1:
                out += [(delta1 - q - ps) / 2]
            else:
                out += [(D2 - d2 * q + ps * d1) / (2 * d2), (delta2 - q) / 2]
        else:
            if player == 1:
                out += [(D1 - d1 * q - ps * d2) / (2 * d1), (delta1 - q) / 2]
            else:
                out += [(delta2 - q + ps) / 2]
    elif kind == "smooth_split":
        a, pm, ps = P["alpha"], P["p_max"], P["p_s"]
        ratio = P["D_max_1"] / P["D_max_2"]
        if player == 1:
            out += [(pm - q - a * ps) / (a + 1)]
        else:
            out += [(pm - q + a * ratio * ps) / (a + 1)]
        out += [pm - q]
    else:
        a, pm, pt = P["alpha"], P["p_max"], P["p_t"]
        own, other = (s.parts[0], s.parts[1]) if player == 1 else (s.parts[1], s.parts[0])
        Phi_own, Phi_other = (P["Phi_a"], P["Phi_b"]) if player == 1 else (P["Phi_b"], P["Phi_a"])
        out += [pm / (1 + a), pm / (1 + a) + a * Phi_own * (other.D_max / own.D_max) * pt / (1 + a)]
        # own price at which the net flow changes direction
        target = Phi_other * own.demand(q) / Phi_own
        if 0 <= target <= other.D_max:
            out.append(pm * (1 - (target / other.D_max) ** (1 / a)))
    top = s.ceiling
    cand = np.array(sorted({x for x in out if 0 <= x <= top}))
    return cand


def best_reply(s: Scenario, player: int, other_price: float) -> Tuple[float, float]:
    """Exact global best reply ``(price, utility)`` of ``player`` to ``other_price``.

    Every utility in this package is piecewise smooth in the own price with a single
    stationary point per piece, so the maximum over a short candidate list is exact.
    Ties go to the lowest price.
    """
    if player not in (1, 2):
        raise ValidationError(f"player must be 1 or 2, got {player!r}")
    cand = _reply_candidates(s, player, float(other_price))
    if player == 1:
        values = utilities(s, cand, np.full_like(cand, other_price))[0]
    else:
        values = utilities(s, np.full_like(cand, other_price), cand)[1]
    i = int(np.argmax(values))
    return float(cand[i]), float(values[i])

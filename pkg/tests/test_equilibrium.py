import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sidepay.equilibrium import (
    Equilibrium,
    pwl_derived_equilibria,
    pwl_printed_cases,
    smooth_root,
    solve,
    solve_communal_linear,
    solve_eyeball,
    solve_pwl_communal,
    solve_smooth,
    solve_split_linear,
    transit_candidates,
    verify_nep,
)
from sidepay.errors import ValidationError
from sidepay.game import Scenario, utilities
from sidepay.oracle import GridSpec, find_grid_neps

THM1 = Scenario("communal_linear", {"D_max": 1, "d": 1, "p_s": 0})
PWL1 = Scenario("pwl_communal", {"D_max": 1, "D_theta": 0.4, "d_max": 1, "d_theta": 0.2, "p_s": 0})
PWL2 = Scenario("pwl_communal", {"D_max": 1, "D_theta": 1 / 6, "d_max": 1, "d_theta": 1 / 6, "p_s": 0})
PWL3 = Scenario("pwl_communal", {"D_max": 1, "D_theta": 0.25, "d_max": 1, "d_theta": 0.2, "p_s": 1 / 8})
BW = Scenario("split_linear_bandwidth", {"D_max_1": 1, "D_max_2": 1.6, "d_1": 1, "d_2": 2, "p_s": 0})
TRANSIT = Scenario("eyeball_transit", {"D_max_a": 1, "D_max_b": 0.5, "p_max": 1, "alpha": 1,
                                       "Phi_a": 0.8, "Phi_b": 0.4, "p_t": 0.2})


# communal linear -------------------------------------------------------------

def test_communal_points():
    eq = solve_communal_linear(THM1)
    assert (eq.p1, eq.p2) == pytest.approx((1 / 3, 1 / 3), abs=1e-15)
    eq = solve_communal_linear(THM1.with_params(p_s=0.1))
    assert (eq.p1, eq.p2) == pytest.approx((1 / 3 - 0.1, 1 / 3 + 0.1), abs=1e-15)


def test_communal_none_outside_bound():
    eq = solve_communal_linear(THM1.with_params(p_s=0.4))
    assert eq.type == "none"
    assert "|p_s| >= D_max/(3d)" in eq.reason


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(-0.99, 0.99))
def test_communal_revenue_independent_of_ps(D_max, d, frac):
    s = Scenario("communal_linear", {"D_max": D_max, "d": d, "p_s": frac * D_max / (3 * d)})
    eq = solve(s)
    assert abs(utilities(s, eq.p1, eq.p2)[0] - D_max ** 2 / (9 * d)) <= 1e-12 * max(1, D_max ** 2 / d)


# split linear ----------------------------------------------------------------

def test_split_bandwidth_example():
    eq = solve_split_linear(BW)
    assert (eq.p1, eq.p2, eq.p_star) == pytest.approx((0.4, 0.2, 0.6), abs=1e-15)
    assert utilities(BW, eq.p1, eq.p2)[0] == pytest.approx(0.16, abs=1e-15)


def test_split_bandwidth_boundary_is_none():
    s = Scenario("split_linear_bandwidth", {"D_max_1": 1, "D_max_2": 1, "d_1": 1, "d_2": 0.5, "p_s": 0})
    assert solve_split_linear(s).type == "none"


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["split_linear_bandwidth", "split_linear_content"]),
       st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.3, 3), st.floats(-0.2, 0.2))
def test_split_points_are_mutual_best_replies(kind, D1, D2, d1, d2, ps):
    from sidepay.game import best_reply
    s = Scenario(kind, {"D_max_1": D1, "D_max_2": D2, "d_1": d1, "d_2": d2, "p_s": ps})
    eq = solve(s)
    if eq.type != "point":
        return
    u1, u2 = utilities(s, eq.p1, eq.p2)
    assert best_reply(s, 1, eq.p2)[1] <= u1 + 1e-12 * max(1, abs(u1))
    assert best_reply(s, 2, eq.p1)[1] <= u2 + 1e-12 * max(1, abs(u2))


# piecewise linear ------------------------------------------------------------

def test_pwl_printed_examples():
    eq = solve_pwl_communal(PWL1, "printed")
    assert (eq.type, eq.case) == ("point", "p*>p_θ")
    assert (eq.p1, eq.p2) == pytest.approx((1 / 3, 1 / 3), abs=1e-15)
    eq = solve_pwl_communal(PWL2, "as_printed")
    assert (eq.type, eq.case) == ("point", "p*<p_θ")
    assert eq.p_star == pytest.approx(2 / 3, abs=1e-15)
    eq = solve_pwl_communal(PWL3, "printed")
    assert (eq.type, eq.p_sum, eq.p1_lo, eq.p1_hi) == ("segment", 0.75, 0.125, 0.375)


def test_pwl_derived_examples():
    # Mutual best replies under the max-of-lines demand, frozen from the exact
    # best-reply computation and confirmed by the grid search in test_oracle.
    eq = solve_pwl_communal(PWL1, "derived")
    assert (eq.p1, eq.p2) == pytest.approx((13 / 15, 13 / 15), abs=1e-12)
    eq = solve_pwl_communal(PWL2, "derived")
    assert eq.type == "none" and len(eq.alternatives) == 2
    assert sorted((a.p1, a.p2) for a in eq.alternatives) == pytest.approx([(1 / 3, 1 / 3), (11 / 18, 11 / 18)])
    eq = solve_pwl_communal(PWL3, "derived")
    assert (eq.p1, eq.p2) == pytest.approx((13 / 24, 19 / 24), abs=1e-12)


def test_printed_segment_samples_are_not_equilibria():
    # The segment property (samples pass, points just outside fail) does not hold:
    # every interior sample admits a profitable deviation for player 1.
    seg = solve_pwl_communal(PWL3, "printed")
    for p1, p2 in seg.samples(10):
        assert seg.contains(p1, p2) or abs(p1 + p2 - 0.75) < 1e-15
        assert not verify_nep(PWL3, p1, p2, grid_step=1e-3, epsilon=1e-6).passed


def test_printed_cases_can_overlap():
    # With d_theta/d_max = 0.5 both smooth-piece cases of the printed analysis hold.
    s = Scenario("pwl_communal", {"D_max": 1, "D_theta": 0.4, "d_max": 1, "d_theta": 0.5, "p_s": 0})
    hits = [label for label, result, _ in pwl_printed_cases(s) if result is not None]
    assert hits == ["p*>p_θ", "p*<p_θ"]


def test_segment_contains_is_strict():
    seg = Equilibrium.segment(0.75, 0.125, 0.375, "p*=p_θ")
    assert seg.contains(0.3, 0.45)
    assert not seg.contains(0.125, 0.625)
    assert not seg.contains(0.375, 0.375)
    with pytest.raises(ValueError):
        Equilibrium.segment(0.75, 0.3, 0.3, "x")


@st.composite
def pwl_scenarios(draw):
    return Scenario("pwl_communal", {"D_max": 1.0, "D_theta": draw(st.floats(0.05, 0.95)),
                                     "d_max": 1.0, "d_theta": draw(st.floats(0.05, 0.95)),
                                     "p_s": draw(st.floats(-0.1, 0.1))})


@settings(max_examples=15, deadline=None)
@given(pwl_scenarios())
def test_pwl_derived_matches_grid_search(s):
    step = 1e-3 * s.ceiling
    found = find_grid_neps(s, GridSpec(0.0, s.ceiling, step))
    for eq in pwl_derived_equilibria(s):
        assert any(g.type == "point" and abs(g.p1 - eq.p1) <= 2 * step and abs(g.p2 - eq.p2) <= 2 * step
                   for g in found), (eq, found)


# smooth ----------------------------------------------------------------------

def test_smooth_communal():
    s = Scenario("smooth_communal", {"D_max": 1, "p_max": 1, "alpha": 2, "p_s": 0})
    eq = solve_smooth(s)
    assert (eq.p1, eq.p2) == pytest.approx((0.25, 0.25), abs=1e-15)
    assert utilities(s, eq.p1, eq.p2)[0] == pytest.approx(1 / 16, abs=1e-15)
    s1 = s.with_params(alpha=1)
    assert solve_smooth(s1).p_star == pytest.approx(2 / 3, abs=1e-15)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(1, 6))
def test_smooth_root_matches_closed_form(D_max, p_max, alpha):
    s = Scenario("smooth_communal", {"D_max": D_max, "p_max": p_max, "alpha": alpha, "p_s": 0})
    model = s.demand
    p = 2 * p_max / (2 + alpha)
    assert abs(smooth_root(model) - p) <= 1e-12 * p_max
    assert abs(2 * model.demand(p) + p * model.slope(p)[1]) <= 1e-12 * D_max


@settings(max_examples=60, deadline=None)
@given(st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.5, 3), st.floats(1, 4), st.floats(-0.05, 0.05))
def test_smooth_split_matches_independent_closed_form(D1, D2, p_max, alpha, frac):
    # Eliminating p1 between the two first-order conditions gives
    # p* = (2 p_max + alpha (D1/D2 - 1) p_s) / (2 + alpha) and p1 = (p_max - p*)/alpha - p_s.
    ps = frac * p_max
    s = Scenario("smooth_split", {"D_max_1": D1, "D_max_2": D2, "p_max": p_max, "alpha": alpha, "p_s": ps})
    eq = solve_smooth(s)
    p_star = (2 * p_max + alpha * (D1 / D2 - 1) * ps) / (2 + alpha)
    p1 = (p_max - p_star) / alpha - ps
    if p1 <= 0 or p_star - p1 <= 0:
        assert eq.type == "none"
        return
    assert eq.type == "point"
    assert abs(eq.p1 - p1) <= 1e-9 * p_max
    assert abs(eq.p2 - (p_star - p1)) <= 1e-9 * p_max


# transit ---------------------------------------------------------------------

def test_transit_both_cases_consistent():
    # delta = phi here, so both flow directions are self-consistent at their own
    # candidates and both are genuine equilibria (see test_oracle).
    eq = solve_eyeball(TRANSIT, "derived")
    assert eq.type == "none" and "both" in eq.reason
    got = {a.case: (a.p1, a.p2) for a in eq.alternatives}
    assert got["A"] == pytest.approx((0.54, 0.5), abs=1e-15)
    assert got["B"] == pytest.approx((0.5, 0.58), abs=1e-15)


def test_transit_case_a():
    eq = solve_eyeball(TRANSIT, "as_derived", case="A")
    assert (eq.type, eq.case) == ("point", "A")
    assert (eq.p1, eq.p2) == pytest.approx((0.54, 0.5), abs=1e-15)
    assert verify_nep(TRANSIT, eq.p1, eq.p2, grid_step=1e-3, epsilon=1e-5).passed


def test_transit_printed_candidate():
    cand = {c.case: c for c in transit_candidates(TRANSIT, "printed")}
    assert cand["A"].p_a == pytest.approx(0.52, abs=1e-15)
    assert abs(cand["A"].foc_residual) > 1e-3
    derived = {c.case: c for c in transit_candidates(TRANSIT, "derived")}
    assert abs(derived["A"].foc_residual) < 1e-12


def test_transit_zero_price_is_balanced():
    s = TRANSIT.with_params(p_t=0.0, D_max_b=1.0, Phi_b=0.8)
    eq = solve_eyeball(s)
    assert eq.type == "none" and "balanced" in eq.reason


def test_transit_bad_case():
    with pytest.raises(ValidationError):
        solve_eyeball(TRANSIT, case="C")


# verification and serialisation ------------------------------------------------

def test_verify_communal():
    assert verify_nep(THM1, 1 / 3, 1 / 3, grid_step=1e-3, epsilon=1e-6).passed
    rep = verify_nep(THM1, 1 / 3 + 0.1, 1 / 3, grid_step=1e-3, epsilon=1e-6)
    assert not rep.passed and rep.gain_1 > 0
    assert rep.quantization == pytest.approx(5e-4)


def test_verify_printed_kink_point_fails():
    # (0.3, 0.45) lies on the printed segment but player 1 gains by moving to 0.7125.
    rep = verify_nep(PWL3, 0.3, 0.45, grid_step=1e-3, epsilon=1e-6)
    assert not rep.passed
    assert rep.best_deviation_1 == pytest.approx(0.712, abs=1e-3)


@pytest.mark.parametrize("s", [THM1, PWL1, PWL3, BW,
                               Scenario("smooth_split", {"D_max_1": 1, "D_max_2": 2, "p_max": 1, "alpha": 2, "p_s": 0}),
                               Scenario("split_linear_content", {"D_max_1": 1, "D_max_2": 1.6, "d_1": 1, "d_2": 2, "p_s": 0.05})])
def test_solver_points_pass_verification(s):
    eq = solve(s)
    assert eq.type == "point"
    assert verify_nep(s, eq.p1, eq.p2, grid_step=1e-3 * s.ceiling, epsilon=1e-6).passed


def test_equilibrium_json_round_trip():
    none = Equilibrium.none("two", [Equilibrium.point(0.1, 0.2, "A")])
    for eq in (Equilibrium.point(0.1, 0.2, "x"), Equilibrium.segment(0.75, 0.1, 0.2, "k"), none):
        back = Equilibrium.from_dict(eq.to_dict())
        assert back == eq
    assert Equilibrium.from_dict(none.to_dict()).alternatives[0].p2 == 0.2
    assert Equilibrium.point(0.1, 0.2, "x").to_dict() == {"type": "point", "p1": 0.1, "p2": 0.2,
                                                          "p_star": pytest.approx(0.3), "case": "x"}
    with pytest.raises(ValidationError):
        Equilibrium.from_dict({"type": "blob"})


def test_printed_pwl_case_overlap_is_flagged():
    s = Scenario("pwl_communal", {"D_max": 1, "D_theta": 0.4, "d_max": 1, "d_theta": 0.5, "p_s": 0})
    eq = solve(s, "printed")
    assert eq.case == "p*>p_θ"
    assert any("p*<p_θ" in w for w in eq.warnings)

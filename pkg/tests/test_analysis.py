import csv
import io

import pytest

from sidepay.analysis import profitability_report, sweep, sweep_csv, sweep_values, transit_case_report
from sidepay.errors import SolverError, ValidationError
from sidepay.game import Scenario

THM1 = Scenario("communal_linear", {"D_max": 1, "d": 1, "p_s": 0})
BANDWIDTH = Scenario("split_linear_bandwidth", {"D_max_1": 1, "D_max_2": 1.6, "d_1": 1, "d_2": 2, "p_s": 0})
CONTENT = Scenario("split_linear_content", {"D_max_1": 1, "D_max_2": 1.6, "d_1": 1, "d_2": 2, "p_s": 0})
SMOOTH_SPLIT = Scenario("smooth_split", {"D_max_1": 1, "D_max_2": 2, "p_max": 1, "alpha": 2, "p_s": 0})
PWL = Scenario("pwl_communal", {"D_max": 1, "D_theta": 0.25, "d_max": 1, "d_theta": 0.2, "p_s": 0})
TRANSIT = Scenario("eyeball_transit", {"D_max_a": 1, "D_max_b": 0.5, "p_max": 1, "alpha": 1,
                                       "Phi_a": 0.8, "Phi_b": 0.4, "p_t": 0.2})


def test_communal_is_not_profitable():
    r = profitability_report(THM1)
    assert r.analytic_derivative == 0 and r.numeric_derivative == pytest.approx(0, abs=1e-10)
    assert r.verdict == "not profitable" and r.consistent


def test_bandwidth_report():
    r = profitability_report(BANDWIDTH)
    assert r.analytic_derivative == pytest.approx(2 / 15, abs=1e-15)
    assert r.numeric_derivative == pytest.approx(2 / 15, abs=1e-8)
    assert r.profitable and r.derived_condition_verdict
    # the printed condition says no here; the derivative says yes
    assert not r.printed_condition_verdict and not r.consistent


def test_equal_slopes_give_zero_derivative():
    r = profitability_report(BANDWIDTH.with_params(d_2=1))
    assert r.analytic_derivative == 0
    assert r.numeric_derivative == pytest.approx(0, abs=1e-8)
    assert not r.profitable


def test_smooth_split_report_and_flip():
    r = profitability_report(SMOOTH_SPLIT)
    assert r.analytic_derivative == pytest.approx(0.09375, abs=1e-15)
    assert r.numeric_derivative == pytest.approx(0.09375, abs=1e-7)
    assert r.profitable and r.consistent
    flipped = profitability_report(SMOOTH_SPLIT.with_params(D_max_1=2, D_max_2=1))
    assert flipped.analytic_derivative < 0 and not flipped.profitable


def test_content_report_is_cp_oriented():
    r = profitability_report(CONTENT)
    assert r.beneficiary == "content provider"
    assert r.numeric_derivative == pytest.approx(-r.cp_numeric_derivative)
    assert r.analytic_derivative == pytest.approx(r.numeric_derivative, abs=1e-8)


def test_content_antisymmetry_can_fail():
    # both players gain from a small side payment here
    s = CONTENT.with_params(D_max_1=1, D_max_2=2, d_1=1, d_2=2)
    r = profitability_report(s)
    assert r.isp_numeric_derivative > 0 and r.cp_numeric_derivative > 0
    assert r.antisymmetric is False


def test_pwl_report():
    r = profitability_report(PWL)
    assert r.analytic_derivative == 0 and not r.profitable


def test_report_without_equilibrium():
    s = BANDWIDTH.with_params(D_max_2=0.05, d_2=1)
    with pytest.raises(SolverError):
        profitability_report(s)


def test_report_rejects_transit():
    with pytest.raises(ValidationError):
        profitability_report(TRANSIT)


def test_transit_both_cases_consistent():
    r = transit_case_report(TRANSIT)
    assert r.summary == "both cases A and B consistent" and r.consistent_case is None
    assert r.cases["A"].derived_candidate == pytest.approx((0.54, 0.5))
    assert r.cases["B"].derived_candidate == pytest.approx((0.5, 0.58))
    for c in r.cases.values():
        assert c.derived_bound_holds and not c.printed_requirement_holds


def test_transit_without_transit_price():
    r = transit_case_report(TRANSIT.with_params(p_t=0))
    assert r.summary == "balanced flow: no strict case holds"


def test_transit_case_requirement_is_not_sufficient():
    r = transit_case_report(TRANSIT.with_params(Phi_b=0.6))
    assert r.phi > r.delta
    assert r.cases["B"].printed_requirement_holds and not r.cases["B"].consistent
    assert r.summary == "case A consistent"


def test_transit_report_rejects_other_kinds():
    with pytest.raises(ValidationError):
        transit_case_report(THM1)


def test_sweep_communal_revenue_is_flat():
    rows = sweep(THM1, "p_s", -0.2, 0.2, 0.1)
    assert len(rows) == 5
    for row in rows:
        assert row["type"] == "point"
        assert row["U1"] == pytest.approx(1 / 9, abs=1e-15)


def test_sweep_printed_pwl_rows_are_segments():
    rows = sweep(PWL, "p_s", 0, 0.2, 0.1, mode="printed")
    assert [r["type"] for r in rows] == ["segment"] * 3
    assert [r["p1"] + r["p2"] for r in rows] == pytest.approx([0.75] * 3)


def test_sweep_reports_invalid_values():
    rows = sweep(THM1, "d", -1, 1, 1)
    assert rows[0]["type"] == "none" and "d" in rows[0]["reason"]
    assert rows[-1]["type"] == "point"


def test_sweep_single_value():
    assert sweep_values(0.3, 0.3, 0.1).tolist() == [0.3]


@pytest.mark.parametrize("args", [(0, 1, 0), (1, 0, 0.1), (0, float("nan"), 0.1)])
def test_sweep_values_validation(args):
    with pytest.raises(ValidationError):
        sweep_values(*args)


def test_sweep_unknown_param():
    with pytest.raises(ValidationError):
        sweep(THM1, "alpha", 0, 1, 0.5)


def test_sweep_csv(tmp_path):
    rows = sweep(THM1, "p_s", 0, 0.4, 0.2)
    out = tmp_path / "s.csv"
    text = sweep_csv(rows, "p_s", out)
    assert out.read_text() == text
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == ["p_s", "type", "case", "p1", "p2", "U1", "U2", "reason"]
    assert parsed[0]["p1"] == "0.333333333333"
    assert parsed[-1]["type"] == "none" and parsed[-1]["p1"] == "" and parsed[-1]["reason"]

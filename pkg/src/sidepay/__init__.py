"""Equilibrium pricing games with side payments between access ISPs and content providers."""

from .analysis import profitability_report, sweep, transit_case_report
from .demand import (
    LinearCommunalDemand,
    PwlConvexDemand,
    SmoothConvexDemand,
    SplitLinearDemand,
    calibrate_smooth,
    demand_slope,
    derive_pwl_constants,
    eval_demand,
)
from .dynamics import integrate, sample_field
from .equilibrium import Equilibrium, solve, verify_nep
from .errors import CalibrationError, SidepayError, SolverError, ValidationError
from .game import PricePoint, Scenario, best_reply, load_scenario, utilities, utility_gradient
from .oracle import GridSpec, find_grid_neps, numeric_profit_derivative

__version__ = "0.1.0"

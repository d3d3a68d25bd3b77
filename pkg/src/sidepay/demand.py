"""Demand-response models.

Four families are supported:

* :class:`LinearCommunalDemand` -- ``D(p) = D_max - d p`` shared by both providers,
* :class:`SplitLinearDemand` -- one linear demand per provider, both driven by the
  total price ``p1 + p2``,
* :class:`PwlConvexDemand` -- the convex maximum of a steep and a flat line that meet
  at ``(p_theta, D_theta)``,
* :class:`SmoothConvexDemand` -- ``D(p) = D_max (1 - p/p_max)**alpha``.

All formulas are clamped at zero demand. Evaluation works on scalars and on numpy
arrays; scalar inputs give Python floats back.

Slopes are always returned as a ``(left, right)`` pair of one-sided derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import CalibrationError, ValidationError

ArrayLike = Union[float, np.ndarray]

# Relative tolerance under which a total price counts as sitting on a kink.
KINK_RTOL = 1e-12


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise ValidationError(f"{name} must be a finite number > 0, got {value!r}")


def _check_price(p: ArrayLike) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if not (arr >= 0).all():
        raise ValidationError(f"prices must be >= 0, got {p!r}")
    return arr


def _out(x: np.ndarray) -> ArrayLike:
    return float(x) if np.ndim(x) == 0 else x


def _at(p: np.ndarray, point: float) -> np.ndarray:
    return np.abs(p - point) <= KINK_RTOL * max(1.0, abs(point))


@dataclass(frozen=True)
class LinearCommunalDemand:
    D_max: float
    d: float

    def __post_init__(self):
        _check_positive(D_max=self.D_max, d=self.d)

    @property
    def zero_price(self) -> float:
        return self.D_max / self.d

    def demand(self, p):
        p = _check_price(p)
        return _out(np.maximum(self.D_max - self.d * p, 0.0))

    def slope(self, p):
        p = _check_price(p)
        zero = self.zero_price
        at_zero = _at(p, zero)
        inside = (p < zero) & ~at_zero
        left = np.where(inside | at_zero, -self.d, 0.0)
        right = np.where(inside, -self.d, 0.0)
        return _out(left), _out(right)


@dataclass(frozen=True)
class SplitLinearDemand:
    """Per-provider linear demands coupled through the total price."""

    D_max_1: float
    D_max_2: float
    d_1: float
    d_2: float

    def __post_init__(self):
        _check_positive(D_max_1=self.D_max_1, D_max_2=self.D_max_2, d_1=self.d_1, d_2=self.d_2)

    @property
    def parts(self) -> Tuple[LinearCommunalDemand, LinearCommunalDemand]:
        return LinearCommunalDemand(self.D_max_1, self.d_1), LinearCommunalDemand(self.D_max_2, self.d_2)

    @property
    def zero_price(self) -> float:
        return max(part.zero_price for part in self.parts)

    def demand(self, p):
        one, two = self.parts
        return one.demand(p), two.demand(p)

    def slope(self, p):
        one, two = self.parts
        return one.slope(p), two.slope(p)


def derive_pwl_constants(D_max: float, D_theta: float, d_max: float, d_theta: float) -> Tuple[float, float, float]:
    """Return ``(D_hat_theta, p_theta, p_max)`` for the convex piecewise-linear model.

    ``D_hat_theta`` is the zero-price intercept of the flat line, ``p_theta`` the kink
    price where both lines give ``D_theta`` and ``p_max`` the price where demand
    reaches zero.
    """
    _check_positive(D_max=D_max, D_theta=D_theta, d_max=d_max, d_theta=d_theta)
    if not D_theta < D_max:
        raise ValidationError(f"need D_theta < D_max, got D_theta={D_theta} >= D_max={D_max}")
    if not d_theta < d_max:
        raise ValidationError(f"need d_theta < d_max, got d_theta={d_theta} >= d_max={d_max}")
    D_hat = D_theta + (D_max - D_theta) * d_theta / d_max
    p_theta = (D_max - D_theta) / d_max
    p_max = p_theta + D_theta / d_theta
    return D_hat, p_theta, p_max


@dataclass(frozen=True)
class PwlConvexDemand:
    D_max: float
    D_theta: float
    d_max: float
    d_theta: float

    def __post_init__(self):
        derive_pwl_constants(self.D_max, self.D_theta, self.d_max, self.d_theta)

    @property
    def D_hat_theta(self) -> float:
        return derive_pwl_constants(self.D_max, self.D_theta, self.d_max, self.d_theta)[0]

    @property
    def p_theta(self) -> float:
        return (self.D_max - self.D_theta) / self.d_max

    @property
    def p_max(self) -> float:
        return self.p_theta + self.D_theta / self.d_theta

    @property
    def zero_price(self) -> float:
        return self.p_max

    def steep_line(self, p):
        return self.D_max - self.d_max * np.asarray(p, dtype=float)

    def flat_line(self, p):
        return self.D_hat_theta - self.d_theta * np.asarray(p, dtype=float)

    def demand(self, p):
        p = _check_price(p)
        raw = np.maximum(self.steep_line(p), self.flat_line(p))
        return _out(np.maximum(raw, 0.0))

    def slope(self, p):
        p = _check_price(p)
        p_theta, p_max = self.p_theta, self.p_max
        kink, clamp = _at(p, p_theta), _at(p, p_max)
        steep = (p < p_theta) & ~kink
        flat = (p > p_theta) & (p < p_max) & ~kink & ~clamp
        left = np.where(steep | kink, -self.d_max, np.where(flat | clamp, -self.d_theta, 0.0))
        right = np.where(steep, -self.d_max, np.where(flat | kink, -self.d_theta, 0.0))
        return _out(left), _out(right)


@dataclass(frozen=True)
class SmoothConvexDemand:
    D_max: float
    p_max: float
    alpha: float

    def __post_init__(self):
        _check_positive(D_max=self.D_max, p_max=self.p_max, alpha=self.alpha)
        if self.alpha < 1:
            raise ValidationError(f"alpha must be >= 1, got {self.alpha}")

    @property
    def zero_price(self) -> float:
        return self.p_max

    def demand(self, p):
        p = _check_price(p)
        return _out(self.D_max * np.clip(1.0 - p / self.p_max, 0.0, None) ** self.alpha)

    def slope(self, p):
        p = _check_price(p)
        clamp = _at(p, self.p_max)
        base = np.clip(1.0 - p / self.p_max, 0.0, None)
        if self.alpha == 1:
            inner = np.full_like(base, -self.D_max / self.p_max)
        else:
            inner = -self.D_max * self.alpha / self.p_max * base ** (self.alpha - 1)
        inside = (p < self.p_max) & ~clamp
        left = np.where(inside | clamp, inner, 0.0)
        right = np.where(inside, inner, 0.0)
        return _out(left), _out(right)


DemandModel = Union[LinearCommunalDemand, SplitLinearDemand, PwlConvexDemand, SmoothConvexDemand]


def eval_demand(model: DemandModel, p):
    """Demand at total price ``p`` (a pair of demands for :class:`SplitLinearDemand`)."""
    return model.demand(p)


def demand_slope(model: DemandModel, p):
    """One-sided slopes ``(left, right)`` of the demand at total price ``p``."""
    return model.slope(p)


def calibrate_smooth(D_max: float, D_theta: float, d_max: float, d_theta: float,
                     rtol: float = 1e-10) -> SmoothConvexDemand:
    """Fit ``(alpha, p_max)`` so the smooth model has slope ``-d_max`` at zero price
    and slope ``-d_theta`` where demand equals ``D_theta``.

    With ``r = ln(d_theta/d_max) / ln(D_theta/D_max)`` the solution is
    ``alpha = 1/(1 - r)`` and ``p_max = alpha D_max / d_max``; it exists with
    ``alpha >= 1`` only when ``d_theta/d_max > D_theta/D_max``. Both slope conditions
    are re-checked numerically before the model is returned.
    """
    _check_positive(D_max=D_max, D_theta=D_theta, d_max=d_max, d_theta=d_theta)
    if not D_theta < D_max:
        raise CalibrationError(f"calibration infeasible: need D_theta < D_max ({D_theta} >= {D_max})")
    if not d_theta < d_max:
        raise CalibrationError(f"calibration infeasible: need d_theta < d_max ({d_theta} >= {d_max})")
    if not d_theta / d_max > D_theta / D_max:
        raise CalibrationError(
            "calibration infeasible: need d_theta/d_max > D_theta/D_max "
            f"({d_theta / d_max} <= {D_theta / D_max})")

    r = math.log(d_theta / d_max) / math.log(D_theta / D_max)
    if not r < 1:
        # the ratios agree to rounding: alpha would be infinite
        raise CalibrationError(
            "calibration infeasible: need d_theta/d_max > D_theta/D_max "
            f"(ratios equal to rounding, r = {r})")
    alpha = 1.0 / (1.0 - r)
    model = SmoothConvexDemand(D_max=D_max, p_max=alpha * D_max / d_max, alpha=alpha)

    p_theta = model.p_max * (1.0 - (D_theta / D_max) ** (1.0 / alpha))
    checks = {
        "D'(0) = -d_max": (model.slope(0.0)[1], -d_max),
        "D'(p_theta) = -d_theta": (model.slope(p_theta)[1], -d_theta),
        "D(p_theta) = D_theta": (model.demand(p_theta), D_theta),
    }
    for label, (got, want) in checks.items():
        if abs(got - want) > rtol * abs(want):
            raise CalibrationError(f"calibration residual too large for {label}: got {got}, want {want}")
    return model

"""Continuous-time price adjustment (explicit Euler) and gradient vector fields.

Three right-hand sides are available:

* ``printed``: ``dp_k/dt = dU_k/dp_k - p_k``
* ``gradient``: ``dp_k/dt = dU_k/dp_k``
* ``best_response_relaxation``: ``dp_k/dt = BR_k(p_other) - p_k``

Marginal utilities are always the right-side values, which matters only on kinks.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .game import PricePoint, Scenario, best_reply, utilities, utility_gradient

MODES = ("printed", "gradient", "best_response_relaxation")
STOP_DISPLACEMENT = 1e-10
VANISH_TOL = 1e-12


def _fmt(x: float) -> str:
    return "%.12g" % x


def _write_csv(header: Sequence[str], columns: Sequence[np.ndarray], out=None) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(_fmt(float(v)) for v in row) + "\n")
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    stopped_early: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def points(self):
        return [PricePoint(float(a), float(b)) for a, b in zip(self.p1, self.p2)]

    @property
    def final(self) -> PricePoint:
        return PricePoint(float(self.p1[-1]), float(self.p2[-1]))

    def to_csv(self, out=None) -> str:
        return _write_csv(("t", "p1", "p2", "U1", "U2"),
                          (self.times, self.p1, self.p2, self.U1, self.U2), out)


def _velocity(s: Scenario, mode: str, p1: float, p2: float) -> Tuple[float, float]:
    if mode == "best_response_relaxation":
        return best_reply(s, 1, p2)[0] - p1, best_reply(s, 2, p1)[0] - p2
    (_, g1), (_, g2) = utility_gradient(s, p1, p2)
    if mode == "gradient":
        return g1, g2
    return g1 - p1, g2 - p2


def integrate(s: Scenario, init, mode: str = "best_response_relaxation", dt: float = 0.01,
              t_max: float = 200.0) -> Trajectory:
    """Euler-integrate the chosen dynamics from ``init`` until ``t_max``.

    Prices are clamped at zero after each step. Integration stops as soon as a step
    moves the state by less than ``1e-10`` (Euclidean norm).
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if not (math.isfinite(dt) and dt > 0):
        raise ValidationError(f"dt must be > 0, got {dt}")
    if not (math.isfinite(t_max) and t_max >= dt):
        raise ValidationError(f"t_max must be >= dt, got t_max={t_max}, dt={dt}")
    p1, p2 = (float(v) for v in init)
    ceiling = s.ceiling
    for name, v in (("p1", p1), ("p2", p2)):
        if not (0 <= v <= ceiling):
            raise ValidationError(f"init {name}={v} outside [0, {ceiling}]")

    n_steps = int(math.floor(t_max / dt + 1e-9))
    times, xs, ys = [0.0], [p1], [p2]
    stopped = False
    for k in range(1, n_steps + 1):
        v1, v2 = _velocity(s, mode, p1, p2)
        n1 = max(p1 + dt * v1, 0.0)
        n2 = max(p2 + dt * v2, 0.0)
        moved = math.hypot(n1 - p1, n2 - p2)
        p1, p2 = n1, n2
        times.append(k * dt)
        xs.append(p1)
        ys.append(p2)
        if moved < STOP_DISPLACEMENT:
            stopped = True
            break
    x, y = np.array(xs), np.array(ys)
    u1, u2 = utilities(s, x, y)
    return Trajectory(np.array(times), x, y, np.asarray(u1), np.asarray(u2), stopped)


@dataclass(frozen=True)
class VectorField:
    """Own-price marginal utilities on a rectangular grid, ``p1`` as the outer loop."""

    p1: np.ndarray
    p2: np.ndarray
    dU1_dp1: np.ndarray
    dU2_dp2: np.ndarray
    left1: np.ndarray
    left2: np.ndarray
    resolution: int

    def __len__(self):
        return len(self.p1)

    def vanishing(self, tol: float = VANISH_TOL) -> np.ndarray:
        """Nodes where both players' one-sided marginals bracket zero."""
        return ((self.left1 >= -tol) & (self.dU1_dp1 <= tol)
                & (self.left2 >= -tol) & (self.dU2_dp2 <= tol))

    def to_csv(self, out=None) -> str:
        return _write_csv(("p1", "p2", "dU1_dp1", "dU2_dp2"),
                          (self.p1, self.p2, self.dU1_dp1, self.dU2_dp2), out)


def sample_field(s: Scenario, box=(0.0, 1.0), resolution: int = 21,
                 box2: Optional[Tuple[float, float]] = None) -> VectorField:
    """Evaluate the marginal-utility field on ``resolution x resolution`` nodes.

    ``box`` gives ``(lo, hi)`` for ``p1`` and, unless ``box2`` is passed, for ``p2`` too.
    """
    if int(resolution) != resolution or resolution < 2:
        raise ValidationError(f"resolution must be an integer >= 2, got {resolution}")
    resolution = int(resolution)
    axes = []
    for lo, hi in (box, box2 or box):
        if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo < hi):
            raise ValidationError(f"box needs finite 0 <= lo < hi, got ({lo}, {hi})")
        axes.append(np.linspace(lo, hi, resolution))
    g1, g2 = np.meshgrid(axes[0], axes[1], indexing="ij")
    p1, p2 = g1.ravel(), g2.ravel()
    (l1, r1), (l2, r2) = utility_gradient(s, p1, p2)
    return VectorField(p1, p2, np.asarray(r1), np.asarray(r2), np.asarray(l1), np.asarray(l2), resolution)

"""Brute-force checks that do not share code paths with the closed-form solvers.

Grid best responses, an exhaustive epsilon-Nash scan of a price grid, and central
finite differences of equilibrium revenue in the side payment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import ndimage

from .equilibrium import solve
from .errors import SolverError, ValidationError
from .game import Scenario, demand_positive, utilities

MAX_GRID_POINTS = 10_000_000
MAX_GRID_CELLS = 100_000_000
_CHUNK_CELLS = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValidationError(f"grid needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValidationError(f"grid step must be > 0, got {self.step}")
        if (self.hi - self.lo) / self.step > MAX_GRID_POINTS:
            raise ValidationError(f"grid too fine: more than {MAX_GRID_POINTS} points")

    @classmethod
    def for_scenario(cls, s: Scenario, step: Optional[float] = None) -> "GridSpec":
        return cls(0.0, s.ceiling, step if step is not None else 1e-3 * s.ceiling)

    def points(self) -> np.ndarray:
        n = int(math.floor((self.hi - self.lo) / self.step + 1e-9))
        return self.lo + self.step * np.arange(n + 1)


def best_response(s: Scenario, player: int, opponent_price: float, grid: GridSpec) -> float:
    """Grid price maximizing the player's utility; ties go to the lowest price."""
    xs = grid.points()
    other = np.full_like(xs, opponent_price)
    if player == 1:
        values = utilities(s, xs, other)[0]
    elif player == 2:
        values = utilities(s, other, xs)[1]
    else:
        raise ValidationError(f"player must be 1 or 2, got {player!r}")
    return float(xs[int(np.argmax(values))])


@dataclass(frozen=True)
class GridNep:
    """A connected run of epsilon-Nash grid points, summarised as a point or a segment."""

    type: str
    p1: float
    p2: float
    size: int
    p_sum: Optional[float] = None
    p1_lo: Optional[float] = None
    p1_hi: Optional[float] = None

    def to_dict(self) -> dict:
        if self.type == "segment":
            return {"type": "segment", "p_sum": self.p_sum, "p1_lo": self.p1_lo, "p1_hi": self.p1_hi,
                    "size": self.size}
        return {"type": "point", "p1": self.p1, "p2": self.p2, "size": self.size}


def _chunks(n: int, m: int):
    rows = max(1, _CHUNK_CELLS // max(m, 1))
    for start in range(0, n, rows):
        yield slice(start, min(n, start + rows))


def epsilon_nep_mask(s: Scenario, grid: GridSpec, epsilon: Optional[float] = None):
    """Boolean matrix ``mask[i, j]``: is ``(x[i], x[j])`` an epsilon-Nash grid point?

    Returns ``(x, mask, epsilon)``. The default epsilon is ``1e-6`` times the largest
    absolute utility over the grid.
    """
    x = grid.points()
    n = len(x)
    if n * n > MAX_GRID_CELLS:
        raise ValidationError(f"grid has {n * n} cells, above the limit of {MAX_GRID_CELLS}")
    best1 = np.full(n, -np.inf)   # best U1 over p1, per p2 column
    best2 = np.full(n, -np.inf)   # best U2 over p2, per p1 row
    scale = 0.0
    for rows in _chunks(n, n):
        u1, u2 = utilities(s, x[rows, None], x[None, :])
        best1 = np.maximum(best1, u1.max(axis=0))
        best2[rows] = u2.max(axis=1)
        scale = max(scale, float(np.abs(u1).max()), float(np.abs(u2).max()))
    if epsilon is None:
        epsilon = 1e-6 * scale
    mask = np.zeros((n, n), dtype=bool)
    for rows in _chunks(n, n):
        u1, u2 = utilities(s, x[rows, None], x[None, :])
        mask[rows] = (best1[None, :] - u1 <= epsilon) & (best2[rows, None] - u2 <= epsilon)
    return x, mask, epsilon


def summarize_runs(x: np.ndarray, mask: np.ndarray, step: float) -> List[GridNep]:
    """Group epsilon-Nash grid points into 8-connected runs.

    A run at least ten steps long in ``p1`` whose points keep ``p1 + p2`` within
    two steps is reported as a segment; anything else as its centroid.
    """
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    out = []
    for k in range(1, count + 1):
        i, j = np.nonzero(labels == k)
        p1, p2 = x[i], x[j]
        sums = p1 + p2
        if p1.max() - p1.min() >= 10 * step and sums.max() - sums.min() <= 2 * step + 1e-12:
            out.append(GridNep("segment", float(p1.mean()), float(p2.mean()), len(i),
                               float(sums.mean()), float(p1.min()), float(p1.max())))
        else:
            out.append(GridNep("point", float(p1.mean()), float(p2.mean()), len(i)))
    out.sort(key=lambda r: (r.p1, r.p2))
    return out


def find_grid_neps(s: Scenario, grid: Optional[GridSpec] = None,
                   epsilon: Optional[float] = None, interior_only: bool = True) -> List[GridNep]:
    """Exhaustive epsilon-Nash search over ``grid x grid`` (default: ``[0, ceiling]``,
    step ``1e-3 * ceiling``).

    With ``interior_only`` grid points with a zero price or a zero demand are
    dropped; otherwise both players pricing demand away shows up as a trivial run.
    """
    grid = grid or GridSpec.for_scenario(s)
    x, mask, _ = epsilon_nep_mask(s, grid, epsilon)
    if interior_only:
        mask &= (x[:, None] > 0) & (x[None, :] > 0)
        mask &= demand_positive(s, x[:, None], x[None, :])
    return summarize_runs(x, mask, grid.step)


def numeric_profit_derivative(s: Scenario, h: Optional[float] = None, player: int = 1,
                              mode: str = "derived") -> float:
    """Central difference of a player's equilibrium revenue in ``p_s`` around ``p_s = 0``.

    The equilibrium is re-solved at ``p_s = -h`` and ``p_s = +h``; ``h`` defaults to
    ``1e-4 * p*`` with ``p*`` the equilibrium price sum at ``p_s = 0``.
    """
    if "p_s" not in s.params:
        raise ValidationError(f"{s.kind} scenarios have no side payment")

    def equilibrium_utility(ps: float, side: str) -> float:
        eq = solve(s.with_params(p_s=ps), mode)
        if eq.type != "point":
            raise SolverError(f"no interior point equilibrium at p_s = {ps:.6g} ({side} side): "
                              f"{eq.reason or eq.type}")
        return utilities(s.with_params(p_s=ps), eq.p1, eq.p2)[player - 1]

    if h is None:
        center = solve(s.with_params(p_s=0.0), mode)
        if center.type != "point":
            raise SolverError(f"no interior point equilibrium at p_s = 0: {center.reason or center.type}")
        h = 1e-4 * center.p_star
    return (equilibrium_utility(h, "+h") - equilibrium_utility(-h, "-h")) / (2 * h)

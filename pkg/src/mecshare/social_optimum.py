"""Cooperative benchmark: welfare-maximising role assignment.

The cooperative configurations considered are the same threshold family as
the equilibrium: type ``(w, c)`` caches iff ``w > p + s + c - psi`` and
``c < psi``, requests iff ``w > p + s`` and ``c >= psi``.  Welfare sums the
realised ED payoffs plus the revenue share paid out for served requests:

    W(psi) = I * [ int_A (w - p - s - c) + int_R (w - p - s)
                   + (eta p - s) * min(r, B a) ]

Both integrals are piecewise polynomials in ``psi`` on the unit square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cp_optimizer import RHO, profit_from_shares
from .equilibrium import solve_equilibrium
from .market_model import MarketParams, MarketShares, unit_margin

__all__ = [
    "WelfareResult",
    "threshold_regions",
    "welfare_at",
    "welfare_curve",
    "solve_social_optimum",
    "welfare_at_ne",
]

GRID_POINTS = 2001


@dataclass(frozen=True)
class WelfareResult:
    eta: float
    psi_so: float
    welfare: float
    shares: MarketShares
    capacity_binding: bool
    cp_profit: float
    other_local_maxima: list[float] = field(default_factory=list)


def threshold_regions(psi, params: MarketParams):
    """Areas and payoff integrals of the threshold assignment.

    Returns ``(a, r, agent_value, requester_value)``; works elementwise on
    arrays.  Agent columns ``c < psi - q`` are full height, columns up to
    ``psi`` start at ``w = q + c - psi``.
    """
    psi = np.asarray(psi, dtype=float)
    q = params.entry_cost
    m = params.demand_mass
    c1 = np.clip(psi - q, 0.0, 1.0)
    c2 = np.clip(psi, 0.0, 1.0)
    a = c1 + (m + psi) * (c2 - c1) - 0.5 * (c2 * c2 - c1 * c1)
    agent_value = 0.5 * ((1.0 - 2.0 * q) * c1 - c1 * c1) + 0.5 * (
        ((m - c1) ** 3 - (m - c2) ** 3) / 3.0 - psi * psi * (c2 - c1))
    r = (1.0 - c2) * m
    requester_value = 0.5 * (1.0 - c2) * m * m
    return a, r, agent_value, requester_value


def welfare_curve(psi, eta: float, params: MarketParams):
    """Vectorised :func:`welfare_at`."""
    g = unit_margin(eta, params)
    a, r, va, vr = threshold_regions(psi, params)
    return params.I * (va + vr + g * np.minimum(r, params.B * a))


def welfare_at(psi: float, eta: float, params: MarketParams) -> float:
    """Total ED welfare when roles follow the ``psi`` threshold rule.

    Raises:
        InfeasibleEta: ``eta`` outside ``[s/p, 1]``.
    """
    return float(welfare_curve(psi, eta, params))


def _golden_refine(f, lo: float, hi: float, tol: float = 1e-12):
    d = (1.0 - RHO) * (hi - lo)
    x1, x2 = lo + d, hi - d
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 > f2:
            lo = x2
            x2, f2 = x1, f1
            x1 = lo + (1.0 - RHO) * (hi - lo)
            f1 = f(x1)
        else:
            hi = x1
            x1, f1 = x2, f2
            x2 = hi - (1.0 - RHO) * (hi - lo)
            f2 = f(x2)
        if x2 >= x1:        # bracket at rounding resolution
            break
    x = 0.5 * (lo + hi)
    return x, f(x)


def solve_social_optimum(eta: float, params: MarketParams,
                         grid_points: int = GRID_POINTS) -> WelfareResult:
    """Globally maximise :func:`welfare_at` over ``psi in [0, (p - s) B]``.

    A uniform grid locates the best cell and golden section refines it on the
    two neighbouring cells.  On exact ties the smaller ``psi`` is kept.
    Other strict grid-local maxima are reported.

    Raises:
        InfeasibleEta: ``eta`` outside ``[s/p, 1]``.
    """
    top = params.psi_max
    grid = np.linspace(0.0, top, grid_points)
    vals = welfare_curve(grid, eta, params)
    j = int(np.argmax(vals))
    best_psi, best_w = float(grid[j]), float(vals[j])
    lo = float(grid[max(j - 1, 0)])
    hi = float(grid[min(j + 1, grid_points - 1)])
    x, fx = _golden_refine(lambda t: welfare_at(t, eta, params), lo, hi)
    if fx > best_w:
        best_psi, best_w = x, fx

    interior = (vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])
    peaks = [float(grid[i + 1]) for i in np.flatnonzero(interior)]
    if grid_points > 1 and vals[-1] > vals[-2]:
        peaks.append(float(grid[-1]))
    others = [t for t in peaks if abs(t - best_psi) > 2.0 * top / (grid_points - 1)]

    a, r, _, _ = threshold_regions(best_psi, params)
    a, r = float(a), float(r)
    shares = MarketShares(a=a, r=r, n=1.0 - a - r)
    return WelfareResult(eta=eta, psi_so=best_psi, welfare=best_w, shares=shares,
                         capacity_binding=bool(r >= params.B * a),
                         cp_profit=profit_from_shares(eta, a, r, params),
                         other_local_maxima=others)


def welfare_at_ne(eta: float, params: MarketParams) -> float:
    """Welfare of the non-cooperative equilibrium at ``eta``."""
    psi = solve_equilibrium(eta, params).psi_star
    return welfare_at(psi, eta, params)

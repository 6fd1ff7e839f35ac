"""Stage-I: the content provider's profit and its optimal sharing ratio.

Profit is piecewise in eta.  Below ``eta0`` requesters outnumber what the
agents can serve and the cloud covers the overflow (``UNDERSUPPLIED``); from
``eta0`` on every requester is served by an agent (``OVERSUPPLIED``).  Each
piece is searched by golden section and the kink itself is always evaluated.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import compute_thresholds, solve_equilibrium
from .errors import InvalidTolerance
from .kernels import solve_psi_many
from .market_model import MarketParams, MarketShares, region_areas_array

__all__ = [
    "Branch",
    "ProfitPoint",
    "OptimizerResult",
    "profit_from_shares",
    "cp_profit",
    "nonmec_profit",
    "golden_section_max",
    "iteration_bound",
    "optimize_eta",
    "profit_curve",
    "profit_grid",
]

log = logging.getLogger(__name__)

RHO = (3.0 - math.sqrt(5.0)) / 2.0
# Points per segment for the unimodality audit, and for the fallback scan.
_AUDIT_POINTS = 257
_FALLBACK_POINTS = 4097


class Branch(enum.Enum):
    UNDERSUPPLIED = "undersupplied"
    OVERSUPPLIED = "oversupplied"


@dataclass(frozen=True)
class ProfitPoint:
    eta: float
    profit: float
    branch: Branch
    psi: float
    shares: MarketShares


@dataclass(frozen=True)
class OptimizerResult:
    eta_opt: float
    profit_opt: float
    branch: Branch
    iterations_per_segment: list[int]
    bound_k: int
    epsilon: float
    eta0: float
    segments: list[tuple[float, float]]
    fallback_segments: list[int] = field(default_factory=list)


def profit_from_shares(eta: float, a: float, r: float, params: MarketParams,
                       branch: Branch | None = None) -> float:
    """Total CP profit for given agent and requester measures.

    Without an explicit ``branch`` the overflow formula is used iff
    ``r > B a``.
    """
    p, s_cd, B, I = params.p, params.s_cd, params.B, params.I
    if branch is None:
        branch = Branch.UNDERSUPPLIED if r > B * a else Branch.OVERSUPPLIED
    if branch is Branch.UNDERSUPPLIED:
        return I * ((p - s_cd) * a + (1.0 - eta) * p * B * a + (r - B * a) * (p - s_cd))
    return I * ((p - s_cd) * a + (1.0 - eta) * p * r)


def _branch_at(eta: float, eta0: float) -> Branch:
    return Branch.UNDERSUPPLIED if eta < eta0 else Branch.OVERSUPPLIED


def cp_profit(eta: float, params: MarketParams, eta0: float | None = None) -> ProfitPoint:
    """CP profit at the Stage-II equilibrium induced by ``eta``.

    Raises:
        InfeasibleEta: ``eta`` outside ``[s/p, 1]``.
    """
    if eta0 is None:
        eta0 = compute_thresholds(params).eta0
    eq = solve_equilibrium(eta, params)
    a, r = eq.shares.a, eq.shares.r
    # With no agents there is nothing to oversupply, whatever eta0 says.
    branch = _branch_at(eta, eta0) if a > 0.0 else Branch.UNDERSUPPLIED
    return ProfitPoint(eta=eta, profit=profit_from_shares(eta, a, r, params, branch),
                       branch=branch, psi=eq.psi_star, shares=eq.shares)


def nonmec_profit(params: MarketParams) -> float:
    """Profit when every requesting ED is served from the cloud."""
    return params.I * (params.p - params.s_cd) * params.demand_mass


def profit_curve(etas, params: MarketParams, backend: str | None = None):
    """Vectorised profit over an eta array.

    Returns ``(profit, psi, undersupplied)`` arrays shaped like ``etas``.
    """
    etas = np.asarray(etas, dtype=float)
    eta0 = compute_thresholds(params).eta0
    psi = solve_psi_many(etas, params, backend=backend)
    a, r = region_areas_array(psi, params)
    p, s_cd, B, I = params.p, params.s_cd, params.B, params.I
    under = (etas < eta0) | (a <= 0.0)
    v_under = I * ((p - s_cd) * a + (1.0 - etas) * p * B * a + (r - B * a) * (p - s_cd))
    v_over = I * ((p - s_cd) * a + (1.0 - etas) * p * r)
    return np.where(under, v_under, v_over), psi, under


def profit_grid(params: MarketParams, eta_grid) -> list[ProfitPoint]:
    """:func:`cp_profit` at every grid point, in input order."""
    eta0 = compute_thresholds(params).eta0
    return [cp_profit(float(e), params, eta0) for e in eta_grid]


def golden_section_max(f, lo: float, hi: float, epsilon: float):
    """Maximise a unimodal ``f`` on ``[lo, hi]``.

    Shrinks the bracket by ``1 - rho`` per iteration and stops once it is at
    most ``2 epsilon`` wide, so the returned midpoint is within ``epsilon``
    of every point still in the bracket.

    Returns ``(x, f(x), iterations)``.
    """
    if hi - lo <= 2.0 * epsilon:
        x = 0.5 * (lo + hi)
        return x, f(x), 0
    d = (1.0 - RHO) * (hi - lo)
    x1, x2 = lo + d, hi - d          # x2 < x1
    f1, f2 = f(x1), f(x2)
    it = 0
    while hi - lo > 2.0 * epsilon:
        it += 1
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
    x = 0.5 * (lo + hi)
    return x, f(x), it


def iteration_bound(params: MarketParams, epsilon: float) -> int:
    """Worst-case golden-section iteration count over all search segments."""
    if not epsilon > 0.0:
        raise InvalidTolerance(f"epsilon must be positive, got {epsilon}")
    th = compute_thresholds(params)
    Bp = params.B * params.p
    etamin = params.eta_min
    L = max(th.psi1 / Bp, th.psi2 / Bp,
            1.0 - th.psi1 / Bp - etamin, 1.0 - th.psi2 / Bp - etamin)
    if L <= epsilon:
        return 0
    return max(0, math.floor(math.log(L / epsilon) / math.log(1.0 / (1.0 - RHO))))


def _strict_local_maxima(values, tol: float = 1e-9) -> int:
    """Number of interior-or-edge peaks after ignoring steps below ``tol``."""
    v = np.asarray(values, dtype=float)
    scale = tol * max(1.0, float(np.max(np.abs(v))))
    diffs = np.diff(v)
    signs = np.sign(np.where(np.abs(diffs) <= scale, 0.0, diffs))
    signs = signs[signs != 0]
    if signs.size == 0:
        return 1
    # A peak is an up-run followed by a down-run; a leading down-run is a
    # peak at the left edge.
    peaks = int(np.sum((signs[:-1] > 0) & (signs[1:] < 0)))
    if signs[0] < 0:
        peaks += 1
    if signs[-1] > 0:
        peaks += 1
    return peaks


def optimize_eta(params: MarketParams, epsilon: float = 1e-4,
                 audit: bool = True) -> OptimizerResult:
    """Profit-maximising sharing ratio.

    ``[s/p, 1]`` is split at ``eta0``; each piece is searched by golden
    section.  The segment maximisers, ``eta0`` and both ends are compared.
    With ``audit`` set, a coarse grid checks each segment for a single peak;
    a failing segment is scanned densely instead and a warning is logged.

    Raises:
        InvalidTolerance: unless ``0 < epsilon <= 0.1``.
    """
    if not (0.0 < epsilon <= 0.1):
        raise InvalidTolerance(f"epsilon must lie in (0, 0.1], got {epsilon}")
    th = compute_thresholds(params)
    bound_k = iteration_bound(params, epsilon)
    lo = params.eta_min
    kink = min(th.eta0, 1.0)
    segments = [(lo, kink)]
    if kink < 1.0:
        segments.append((kink, 1.0))

    def value(eta: float) -> float:
        return cp_profit(eta, params, th.eta0).profit

    candidates: list[tuple[float, float]] = [(lo, value(lo)), (1.0, value(1.0))]
    if kink < 1.0:
        candidates.append((kink, value(kink)))
    iterations: list[int] = []
    fallback: list[int] = []
    for k, (a, b) in enumerate(segments):
        if b <= a:
            iterations.append(0)
            continue
        if audit:
            grid = np.linspace(a, b, _AUDIT_POINTS)
            vals, _, _ = profit_curve(grid, params)
            if _strict_local_maxima(vals) > 1:
                log.warning("profit not unimodal on [%.6g, %.6g]; "
                            "using a dense scan", a, b)
                fallback.append(k)
                grid = np.linspace(a, b, _FALLBACK_POINTS)
                vals, _, _ = profit_curve(grid, params)
                j = int(np.argmax(vals))
                sub_lo = grid[max(j - 1, 0)]
                sub_hi = grid[min(j + 1, grid.size - 1)]
                x, fx, it = golden_section_max(value, sub_lo, sub_hi, epsilon)
                iterations.append(it)
                candidates.append((x, fx))
                candidates.append((float(grid[j]), float(vals[j])))
                continue
        x, fx, it = golden_section_max(value, a, b, epsilon)
        iterations.append(it)
        candidates.append((x, fx))

    # Ties keep the earliest candidate, so the no-sharing end wins a draw.
    eta_opt, profit_opt = candidates[0]
    for x, fx in candidates[1:]:
        if fx > profit_opt:
            eta_opt, profit_opt = x, fx
    return OptimizerResult(eta_opt=eta_opt, profit_opt=profit_opt,
                           branch=cp_profit(eta_opt, params, th.eta0).branch,
                           iterations_per_segment=iterations, bound_k=bound_k,
                           epsilon=epsilon, eta0=th.eta0, segments=segments,
                           fallback_segments=fallback)

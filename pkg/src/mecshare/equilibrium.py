"""Stage-II equilibrium of the ED role-selection game.

The equilibrium benefit is the unique root of ``theta``.  Which analytic
form the root takes depends on the capacity regime (``B`` against
``b_crit``) and on which of three eta bands the sharing ratio falls in:

* linear bands: the root is ``(eta p - s) B`` in closed form;
* the low-benefit ratio band: a cubic, increasing on its bracket;
* the high-benefit ratio band: an upward parabola, negative at 0.

Polynomial roots are found by bracketed bisection.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import NumericalFailure
from .market_model import (
    MarketParams,
    MarketShares,
    psi1_threshold,
    psi2_threshold,
    shares_from_benefit,
    benefit_map,
    theta,
    unit_margin,
)

__all__ = [
    "CapacityCase",
    "Thresholds",
    "RegimeClassification",
    "EquilibriumResult",
    "compute_thresholds",
    "regime_bands",
    "classify",
    "theta_tilde",
    "solve_equilibrium",
    "verify_fixed_point",
]

# Endpoint slack when a bracket edge is itself the root up to rounding.
_EDGE_TOL = 1e-12


class CapacityCase(enum.Enum):
    HIGH = "high"   # B > b_crit
    LOW = "low"     # B <= b_crit


@dataclass(frozen=True)
class Thresholds:
    psi1: float
    psi2: float
    b_crit: float
    eta0: float
    eta_min: float

    def capacity_case(self, B: float) -> CapacityCase:
        return CapacityCase.HIGH if B > self.b_crit else CapacityCase.LOW


@dataclass(frozen=True)
class RegimeClassification:
    """Which closed-form band an eta falls in.

    ``form`` is ``"linear"``, ``"cubic"`` or ``"quadratic"``;
    ``band_edges`` are the two interior eta cut points of the regime.
    """

    capacity_case: CapacityCase
    eta_band: int
    predicted_interval: tuple[float, float]
    form: str
    band_edges: tuple[float, float]


@dataclass(frozen=True)
class EquilibriumResult:
    eta: float
    psi_star: float
    regime: RegimeClassification
    shares: MarketShares
    residual: float


def _case2_ratio_gap(psi: float, params: MarketParams) -> float:
    m = params.demand_mass
    a = 0.5 * psi * psi + m * psi
    r = (1.0 - psi) * m
    return r - params.B * a


def compute_thresholds(params: MarketParams) -> Thresholds:
    """Capacity-saturation thresholds and the CP profit kink ``eta0``."""
    m = params.demand_mass
    psi1 = psi1_threshold(params)
    psi2 = psi2_threshold(params)
    if abs(_case2_ratio_gap(psi2, params)) > 1e-9:
        raise NumericalFailure(f"psi2={psi2} does not satisfy r/a = B")
    b_crit = 2.0 * m * m / (1.0 - m * m)
    B, p, s = params.B, params.p, params.s
    if B <= b_crit:
        eta0 = psi1 / (B * p) + s / p
    else:
        eta0 = psi2 / (B * p) + s / p
    return Thresholds(psi1=psi1, psi2=psi2, b_crit=b_crit, eta0=eta0,
                      eta_min=s / p)


def regime_bands(params: MarketParams, thresholds: Thresholds | None = None):
    """Capacity case, the two eta cut points, and ``(interval, form)`` per band."""
    th = thresholds or compute_thresholds(params)
    p, s, B = params.p, params.s, params.B
    q = params.entry_cost
    m = params.demand_mass
    top = params.psi_max
    case = th.capacity_case(B)
    if case is CapacityCase.HIGH:
        e1 = th.psi2 / (B * p) + s / p
        e2 = q * q * (2.0 - q) / (2.0 * p * m * m) + s / p
        bands = (
            ((0.0, th.psi2), "linear"),
            ((th.psi2, q), "cubic"),
            ((q, top), "quadratic"),
        )
    else:
        e1 = q / (B * p) + s / p
        e2 = th.psi1 / (B * p) + s / p
        bands = (
            ((0.0, q), "linear"),
            ((q, th.psi1), "linear"),
            ((th.psi1, top), "quadratic"),
        )
    return case, (e1, e2), bands


def classify(eta: float, params: MarketParams,
             thresholds: Thresholds | None = None) -> RegimeClassification:
    """Locate ``eta`` in the existence-and-uniqueness bands.

    Bands are closed on the left and open on the right, the last one also
    closed at ``eta = 1``.  At shared edges both neighbouring bands give the
    same equilibrium, so the choice only affects which formula is used.

    Raises:
        InfeasibleEta: if ``eta`` is outside ``[s/p, 1]``.
    """
    unit_margin(eta, params)
    case, (e1, e2), bands = regime_bands(params, thresholds)
    if eta < e1:
        k = 0
    elif eta < e2:
        k = 1
    else:
        k = 2
    interval, form = bands[k]
    return RegimeClassification(capacity_case=case, eta_band=k + 1,
                                predicted_interval=interval, form=form,
                                band_edges=(e1, e2))


def theta_tilde(psi: float, eta: float, params: MarketParams, form: str) -> float:
    """``psi * a(psi) - (eta p - s) * r(psi)`` expanded for one area case.

    Shares its zeros with ``theta`` on the ratio branches; ``form`` selects
    the low-benefit cubic or the high-benefit quadratic expansion.
    """
    g = unit_margin(eta, params)
    m = params.demand_mass
    q = params.entry_cost
    gm = g * m
    if form == "cubic":
        return ((0.5 * psi + m) * psi + gm) * psi - gm
    if form == "quadratic":
        return (psi + gm - 0.5 * q * q) * psi - gm
    raise ValueError(f"no polynomial form {form!r}")


def _bisect(f, lo: float, hi: float) -> float:
    flo = f(lo)
    fhi = f(hi)
    if flo > 0.0:
        if flo <= _EDGE_TOL:
            return lo
        raise NumericalFailure(f"no sign change on [{lo}, {hi}]: f(lo)={flo}")
    if fhi < 0.0:
        if fhi >= -_EDGE_TOL:
            return hi
        raise NumericalFailure(f"no sign change on [{lo}, {hi}]: f(hi)={fhi}")
    # Halve until the bracket cannot shrink further in double precision.
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if fm < 0.0:
            lo = mid
        else:
            hi = mid


def solve_equilibrium(eta: float, params: MarketParams) -> EquilibriumResult:
    """Unique equilibrium sharing benefit for a given sharing ratio.

    Raises:
        InfeasibleEta: ``eta`` outside ``[s/p, 1]``.
        NumericalFailure: the predicted bracket holds no root.
    """
    regime = classify(eta, params)
    g = unit_margin(eta, params)
    if regime.form == "linear":
        psi = g * params.B
    else:
        lo, hi = regime.predicted_interval
        # Area formulas stop at psi = 1, and the root never exceeds it.
        hi = min(hi, 1.0)
        form = regime.form
        psi = _bisect(lambda x: theta_tilde(x, eta, params, form), lo, hi)
    residual = abs(theta(psi, eta, params))
    return EquilibriumResult(eta=eta, psi_star=psi, regime=regime,
                             shares=shares_from_benefit(psi, params),
                             residual=residual)


def verify_fixed_point(result: EquilibriumResult | float, eta: float,
                       params: MarketParams, tol: float = 1e-8) -> bool:
    """True iff the benefit reproduces itself under the benefit map."""
    psi = result.psi_star if isinstance(result, EquilibriumResult) else float(result)
    return math.fabs(psi - benefit_map(psi, eta, params)) <= tol

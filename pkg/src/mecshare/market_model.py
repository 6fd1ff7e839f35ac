"""Exogenous market constants, ED payoffs and the sharing-benefit map.

Edge-device types ``(w, c)`` are uniform on the unit square.  Given a
sharing benefit ``psi`` every type picks a role, and the three role regions
have closed-form areas.  Throughout, ``q = p + s`` is the valuation an ED
needs before requesting is worthwhile, and ``m = 1 - p - s`` is the mass of
valuations above it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleEta, InvalidParameters

__all__ = [
    "MarketParams",
    "MarketShares",
    "Role",
    "payoff_agent",
    "payoff_requester",
    "best_response",
    "region_areas",
    "region_areas_array",
    "shares_from_benefit",
    "unit_margin",
    "benefit_map",
    "theta",
    "theta_array",
    "psi1_threshold",
    "psi2_threshold",
]


@dataclass(frozen=True)
class MarketParams:
    """Market constants.

    Attributes:
        p: Content price per request.
        s: ED transmission cost (upload and download unified).
        s_cd: CP cloud delivery cost per request.
        B: Requesters one agent can serve.
        I: Number of EDs.
    """

    p: float = 0.5
    s: float = 0.1
    s_cd: float = 0.4
    B: float = 2.0
    I: int = 1000

    def __post_init__(self):
        p, s, s_cd, B = self.p, self.s, self.s_cd, self.B
        for name in ("p", "s", "s_cd", "B"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameters(f"{name} must be finite")
        if not 0.0 < s < s_cd <= p:
            raise InvalidParameters(
                f"need 0 < s < s_cd <= p, got s={s}, s_cd={s_cd}, p={p}")
        if not 0.0 < p + s < 1.0:
            raise InvalidParameters(f"need 0 < p + s < 1, got p + s = {p + s}")
        if not B > 0.0:
            raise InvalidParameters(f"need B > 0, got B={B}")
        if int(self.I) != self.I or self.I < 1:
            raise InvalidParameters(f"need integer I >= 1, got I={self.I}")

    @property
    def entry_cost(self) -> float:
        """p + s, the valuation at which requesting breaks even."""
        return self.p + self.s

    @property
    def demand_mass(self) -> float:
        """1 - p - s, the measure of ED valuations above the entry cost."""
        return 1.0 - self.p - self.s

    @property
    def eta_min(self) -> float:
        return self.s / self.p

    @property
    def psi_max(self) -> float:
        """Largest attainable sharing benefit, (p - s) * B."""
        return (self.p - self.s) * self.B

    def replace(self, **changes) -> "MarketParams":
        fields = dict(p=self.p, s=self.s, s_cd=self.s_cd, B=self.B, I=self.I)
        fields.update(changes)
        return MarketParams(**fields)

    def as_dict(self) -> dict:
        return dict(p=self.p, s=self.s, s_cd=self.s_cd, B=self.B, I=self.I)


class Role(enum.IntEnum):
    """ED role.  The integer order is also the tie-break preference."""

    AGENT = 0
    REQUESTER = 1
    ALIEN = 2


@dataclass(frozen=True)
class MarketShares:
    """Measures of agents ``a``, requesters ``r`` and aliens ``n``."""

    a: float
    r: float
    n: float

    @property
    def ratio(self) -> float:
        """Requesters per agent, ``inf`` when there are no agents."""
        return self.r / self.a if self.a > 0.0 else math.inf


def payoff_agent(w: float, c: float, params: MarketParams, psi: float) -> float:
    return w - params.p - params.s - c + psi


def payoff_requester(w: float, params: MarketParams) -> float:
    return w - params.p - params.s


def best_response(w: float, c: float, params: MarketParams, psi: float) -> Role:
    """Role with the highest payoff; ties go Agent > Requester > Alien."""
    pa = payoff_agent(w, c, params, psi)
    pr = payoff_requester(w, params)
    if pa >= pr and pa >= 0.0:
        return Role.AGENT
    if pr >= 0.0:
        return Role.REQUESTER
    return Role.ALIEN


def region_areas(psi: float, params: MarketParams) -> tuple[float, float]:
    """Agent and requester areas ``(a, r)`` for a scalar benefit.

    Low benefit (``psi <= p + s``) and high benefit (``p + s < psi <= 1``)
    use their own closed forms; above 1 every caching cost is covered, no
    requesters remain and only the corner ``w < p + s + c - psi`` abstains.
    """
    q = params.entry_cost
    m = params.demand_mass
    if psi <= q:
        return 0.5 * psi * psi + m * psi, (1.0 - psi) * m
    if psi <= 1.0:
        return psi - 0.5 * q * q, (1.0 - psi) * m
    corner = max(0.0, 1.0 + q - psi)
    return 1.0 - 0.5 * corner * corner, 0.0


def region_areas_array(psi, params: MarketParams):
    """Vectorised :func:`region_areas` over an array of benefits."""
    psi = np.asarray(psi, dtype=float)
    q = params.entry_cost
    m = params.demand_mass
    low = 0.5 * psi * psi + m * psi
    high = psi - 0.5 * q * q
    corner = np.maximum(0.0, 1.0 + q - psi)
    sat = 1.0 - 0.5 * corner * corner
    a = np.where(psi <= q, low, np.where(psi <= 1.0, high, sat))
    r = np.where(psi <= 1.0, (1.0 - psi) * m, 0.0)
    return a, r


def shares_from_benefit(psi: float, params: MarketParams) -> MarketShares:
    a, r = region_areas(psi, params)
    return MarketShares(a=a, r=r, n=1.0 - a - r)


def unit_margin(eta: float, params: MarketParams) -> float:
    """Agent's net gain per served requester, ``eta * p - s``.

    Raises:
        InfeasibleEta: if ``eta`` lies outside ``[s/p, 1]``.
    """
    if not math.isfinite(eta) or eta < params.eta_min or eta > 1.0:
        raise InfeasibleEta(
            f"eta={eta} outside the feasible range [s/p, 1] = "
            f"[{params.eta_min:.12g}, 1]")
    # eta == s/p can leave a negative rounding residue.
    return max(0.0, eta * params.p - params.s)


def benefit_map(psi: float, eta: float, params: MarketParams) -> float:
    """Sharing benefit induced when every ED best-responds to ``psi``.

    With no agents the capped value ``(eta p - s) * B`` is returned, i.e. the
    benefit the first entrant would collect.
    """
    g = unit_margin(eta, params)
    a, r = region_areas(psi, params)
    if a <= 0.0:
        return g * params.B
    return g * min(r / a, params.B)


def psi1_threshold(params: MarketParams) -> float:
    """High-benefit benefit level at which requesters exactly fill capacity."""
    m = params.demand_mass
    q = params.entry_cost
    B = params.B
    return (m + 0.5 * B * q * q) / (m + B)


def psi2_threshold(params: MarketParams) -> float:
    """Low-benefit benefit level at which requesters exactly fill capacity."""
    m = params.demand_mass
    k = 1.0 + 1.0 / params.B
    return -m * k + math.sqrt(m * k * k + 2.0 / params.B) * math.sqrt(m)


def theta(psi: float, eta: float, params: MarketParams) -> float:
    """Fixed-point residual ``psi - benefit(psi)`` with explicit branches.

    The linear form ``psi - (eta p - s) B`` applies while requesters exceed
    capacity; the ratio form ``psi - (eta p - s) r/a`` once the benefit has
    passed the saturation threshold of its case.
    """
    g = unit_margin(eta, params)
    if psi <= params.entry_cost:
        ratio_form = psi >= psi2_threshold(params)
    else:
        ratio_form = psi >= psi1_threshold(params)
    if not ratio_form:
        return psi - g * params.B
    a, r = region_areas(psi, params)
    return psi - g * r / a


def theta_array(psi, eta: float, params: MarketParams):
    """Vectorised residual via ``min(r/a, B)``; used for dense scans."""
    g = unit_margin(eta, params)
    psi = np.asarray(psi, dtype=float)
    a, r = region_areas_array(psi, params)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a > 0.0, r / np.where(a > 0.0, a, 1.0), np.inf)
    return psi - g * np.minimum(ratio, params.B)

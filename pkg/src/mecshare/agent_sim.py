"""Discrete-population check of the non-atomic equilibrium.

``I`` EDs with sampled types play asynchronous best responses.  Each ED, when
visited, compares its role payoffs with its own effect on the benefit taken
into account: as an agent it would split the served demand with the current
agents.  An epoch visits everyone once in a fresh random order.
"""
from __future__ import annotations

import math
import os
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cp_optimizer import profit_from_shares
from .market_model import MarketParams, Role, unit_margin

__all__ = [
    "RNG_ALGORITHM",
    "EdAgent",
    "Population",
    "SimResult",
    "ReplicationStats",
    "sample_population",
    "empirical_benefit",
    "run_dynamics",
    "one_deviation_audit",
    "replicate",
]

RNG_ALGORITHM = "numpy.random.PCG64"

# sampler(rng, n) -> (w, c)
Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent type and visiting-order generators for one seed."""
    types_ss, order_ss = np.random.SeedSequence(int(seed) % 2**64).spawn(2)
    return (np.random.Generator(np.random.PCG64(types_ss)),
            np.random.Generator(np.random.PCG64(order_ss)))


@dataclass(frozen=True)
class EdAgent:
    w: float
    c: float
    role: Role


@dataclass
class Population:
    """Types as parallel arrays; ``roles`` holds :class:`Role` codes."""

    w: np.ndarray
    c: np.ndarray
    roles: np.ndarray
    seed: int

    @classmethod
    def from_arrays(cls, w, c, seed: int = 0, roles=None) -> "Population":
        w = np.ascontiguousarray(w, dtype=np.float64)
        c = np.ascontiguousarray(c, dtype=np.float64)
        if w.shape != c.shape or w.ndim != 1:
            raise ValueError("w and c must be 1-D arrays of equal length")
        if roles is None:
            roles = np.full(w.size, Role.ALIEN, dtype=np.int8)
        return cls(w=w, c=c, roles=np.ascontiguousarray(roles, dtype=np.int8),
                   seed=int(seed))

    @property
    def size(self) -> int:
        return int(self.w.size)

    @property
    def agents(self) -> list[EdAgent]:
        return [EdAgent(float(w), float(c), Role(int(r)))
                for w, c, r in zip(self.w, self.c, self.roles)]

    def counts(self) -> tuple[int, int]:
        """Number of agents and requesters."""
        return (int(np.count_nonzero(self.roles == Role.AGENT)),
                int(np.count_nonzero(self.roles == Role.REQUESTER)))

    def copy(self) -> "Population":
        return Population(self.w.copy(), self.c.copy(), self.roles.copy(), self.seed)


@dataclass(frozen=True)
class SimResult:
    converged: bool
    epochs: int
    n_agents: int
    n_requesters: int
    frac_agents: float
    frac_requesters: float
    frac_aliens: float
    psi_hat: float
    welfare: float
    cp_profit: float
    roles: np.ndarray = field(repr=False)


def sample_population(params: MarketParams, seed: int,
                      sampler: Sampler | None = None) -> Population:
    """``I`` i.i.d. types, uniform on the unit square unless ``sampler`` is given.

    Every ED starts as an Alien.
    """
    rng, _ = _streams(seed)
    if sampler is None:
        w = rng.random(params.I)
        c = rng.random(params.I)
    else:
        w, c = sampler(rng, params.I)
    return Population.from_arrays(w, c, seed=seed)


def _benefit(n_agents: int, n_requesters: int, margin: float, B: float) -> float:
    if n_agents == 0:
        return margin * B
    return margin * min(n_requesters, B * n_agents) / n_agents


def empirical_benefit(pop: Population, eta: float, params: MarketParams) -> float:
    """Per-agent benefit from the current role counts.

    With no agents the entry value ``(eta p - s) B`` is returned.
    """
    g = unit_margin(eta, params)
    na, nr = pop.counts()
    return _benefit(na, nr, g, params.B)


def _aggregate(pop: Population, eta: float, params: MarketParams,
               converged: bool, epochs: int) -> SimResult:
    g = unit_margin(eta, params)
    q = params.p + params.s
    roles = pop.roles
    na, nr = pop.counts()
    n = pop.size
    is_a = roles == Role.AGENT
    is_r = roles == Role.REQUESTER
    shared = g * min(nr, params.B * na)
    welfare = (float(np.sum(pop.w[is_a] - q - pop.c[is_a]))
               + float(np.sum(pop.w[is_r] - q)) + shared)
    # Per-ED welfare scaled to the market size, comparable with the continuum.
    welfare *= params.I / n
    return SimResult(
        converged=converged, epochs=epochs, n_agents=na, n_requesters=nr,
        frac_agents=na / n, frac_requesters=nr / n, frac_aliens=(n - na - nr) / n,
        psi_hat=_benefit(na, nr, g, params.B), welfare=welfare,
        cp_profit=profit_from_shares(eta, na / n, nr / n, params),
        roles=roles.copy())


def run_dynamics(pop: Population, eta: float, params: MarketParams,
                 max_epochs: int = 1000, backend: str | None = None) -> SimResult:
    """Asynchronous best-response dynamics from the population's current roles.

    Works on a copy; ``pop`` is left unchanged.  The visiting order is drawn
    from the population seed's order stream.  Hitting ``max_epochs`` with
    switches still happening gives ``converged=False``.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be at least 1")
    g = unit_margin(eta, params)
    work = pop.copy()
    _, rng = _streams(pop.seed)
    counts = np.array(work.counts(), dtype=np.int64)
    q = params.p + params.s
    converged = False
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        order = rng.permutation(work.size).astype(np.int64)
        switches = kernels.dynamics_epoch(work.w, work.c, work.roles, order,
                                          g, q, float(params.B), counts,
                                          backend=backend)
        if switches == 0:
            converged = True
            break
    return _aggregate(work, eta, params, converged, epochs)


def one_deviation_audit(pop: Population | SimResult, eta: float,
                        params: MarketParams, tol: float = 1e-12,
                        w=None, c=None) -> bool:
    """True iff no ED gains more than ``tol`` by switching role alone.

    Uses the same own-impact payoff as the dynamics.  A :class:`SimResult`
    needs the type arrays via ``w`` and ``c``.
    """
    if isinstance(pop, SimResult):
        roles = pop.roles
    else:
        roles, w, c = pop.roles, pop.w, pop.c
    g = unit_margin(eta, params)
    q = params.p + params.s
    B = float(params.B)
    na = np.count_nonzero(roles == Role.AGENT)
    nr = np.count_nonzero(roles == Role.REQUESTER)
    na_o = na - (roles == Role.AGENT)
    nr_o = nr - (roles == Role.REQUESTER)
    k = na_o + 1
    served = np.minimum(nr_o.astype(float), B * k)
    pay = np.stack([w - q - c + g * served / k,   # agent
                    w - q,                        # requester
                    np.zeros_like(w)])            # alien
    current = np.take_along_axis(pay, roles.astype(np.intp)[None, :], 0)[0]
    return bool(np.all(current >= pay.max(axis=0) - tol))


@dataclass(frozen=True)
class ReplicationStats:
    n_runs: int
    n_not_converged: int
    audit_failures: int
    means: dict
    std_errors: dict
    rng: str = RNG_ALGORITHM


_FIELDS = ("frac_agents", "frac_requesters", "frac_aliens", "psi_hat",
           "welfare", "cp_profit", "epochs")


def _one_run(args):
    params, eta, seed, max_epochs, audit, sampler, backend = args
    pop = sample_population(params, seed, sampler)
    res = run_dynamics(pop, eta, params, max_epochs, backend=backend)
    ok = one_deviation_audit(res, eta, params, w=pop.w, c=pop.c) if (
        audit and res.converged) else True
    return tuple(float(getattr(res, f)) for f in _FIELDS), res.converged, ok


def replicate(params: MarketParams, eta: float, n_runs: int, base_seed: int = 0,
              max_epochs: int = 1000, workers: int = 1, audit: bool = True,
              sampler: Sampler | None = None,
              backend: str | None = None) -> ReplicationStats:
    """Independent runs with seeds ``base_seed .. base_seed + n_runs - 1``.

    Results are collected in seed order, so the aggregates do not depend on
    ``workers``.  Non-converged runs stay in the averages and are counted.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    unit_margin(eta, params)
    jobs = [(params, eta, base_seed + k, max_epochs, audit, sampler, backend)
            for k in range(n_runs)]
    workers = max(1, min(int(workers), n_runs, os.cpu_count() or 1))
    if workers == 1:
        out = [_one_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_one_run, jobs, chunksize=max(1, n_runs // (4 * workers))))
    values = np.array([o[0] for o in out])
    not_conv = sum(1 for o in out if not o[1])
    audit_fail = sum(1 for o in out if not o[2])
    means = {f: float(np.mean(values[:, i])) for i, f in enumerate(_FIELDS)}
    if n_runs > 1:
        se = {f: float(np.std(values[:, i], ddof=1) / math.sqrt(n_runs))
              for i, f in enumerate(_FIELDS)}
    else:
        se = {f: 0.0 for f in _FIELDS}
    return ReplicationStats(n_runs=n_runs, n_not_converged=not_conv,
                            audit_failures=audit_fail, means=means, std_errors=se)

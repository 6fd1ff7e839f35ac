"""Solver and simulator for revenue-sharing incentives in crowdsourced edge caching."""
from .market_model import MarketParams, MarketShares, Role
from .equilibrium import solve_equilibrium, compute_thresholds, classify
from .cp_optimizer import cp_profit, nonmec_profit, optimize_eta
from .social_optimum import solve_social_optimum, welfare_at, welfare_at_ne

__version__ = "0.1.0"

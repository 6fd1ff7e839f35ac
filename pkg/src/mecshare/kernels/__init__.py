"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension ``_ckernels`` is used when it was built; otherwise, or
when the environment variable ``MECSHARE_KERNELS=python`` is set, the numpy
implementation in ``_pykernels`` is selected.  Both produce bitwise-identical
results.
"""
from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels
from ..equilibrium import regime_bands
from ..errors import InfeasibleEta, NumericalFailure
from ..market_model import MarketParams

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if os.environ.get("MECSHARE_KERNELS", "").lower() == "python" or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_FORM_CODE = {"linear": 0, "cubic": 1, "quadratic": 2}


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend(name: str | None = None) -> ModuleType:
    name = name or BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; "
                         f"have {available_backends()}") from None


def band_table(params: MarketParams):
    """Per-band ``(lo, hi, form_code)`` arrays and the two eta cut points."""
    _, (e1, e2), bands = regime_bands(params)
    lo = [interval[0] for interval, _ in bands]
    hi = [interval[1] for interval, _ in bands]
    forms = [form for _, form in bands]
    codes = np.array([_FORM_CODE[f] for f in forms], dtype=np.intc)
    return (np.array(lo, dtype=float), np.array(hi, dtype=float), codes,
            e1, e2)


def solve_psi_many(etas, params: MarketParams, backend: str | None = None):
    """Equilibrium sharing benefit for each entry of ``etas``.

    Raises:
        InfeasibleEta: if any eta is outside ``[s/p, 1]``.
        NumericalFailure: if a polynomial band had no bracketed root.
    """
    etas = np.ascontiguousarray(etas, dtype=np.float64)
    if etas.size and (not np.all(np.isfinite(etas))
                      or etas.min() < params.eta_min or etas.max() > 1.0):
        raise InfeasibleEta(
            f"eta grid leaves the feasible range [s/p, 1] = "
            f"[{params.eta_min:.12g}, 1]")
    lo, hi, codes, e1, e2 = band_table(params)
    impl = get_backend(backend)
    flat = etas.reshape(-1)
    out = np.asarray(impl.solve_psi_many(flat, params.p, params.s, params.B,
                                         lo, hi, codes, e1, e2))
    if np.isnan(out).any():
        raise NumericalFailure("equilibrium bracket without sign change")
    return out.reshape(etas.shape)


def dynamics_epoch(w, c, roles, order, margin, q, B, counts,
                   backend: str | None = None) -> int:
    """One asynchronous best-response epoch; mutates ``roles`` and ``counts``."""
    return int(get_backend(backend).dynamics_epoch(w, c, roles, order,
                                                    margin, q, B, counts))

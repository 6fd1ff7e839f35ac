import numpy as np
import pytest
from hypothesis import strategies as st

from mecshare import MarketParams

DEFAULT = MarketParams()


@pytest.fixture
def params():
    return DEFAULT


@st.composite
def market_params(draw, B_min=0.2, B_max=3.0):
    p = draw(st.floats(0.4, 0.6))
    s = draw(st.floats(0.05, 0.2))
    frac = draw(st.floats(0.01, 1.0))
    s_cd = s + frac * (p - s)
    B = draw(st.floats(B_min, B_max))
    return MarketParams(p=p, s=s, s_cd=s_cd, B=B, I=1000)


@st.composite
def params_and_eta(draw):
    prm = draw(market_params())
    t = draw(st.floats(0.0, 1.0))
    return prm, prm.eta_min + t * (1.0 - prm.eta_min)


def random_params(rng, n, B_range=(0.2, 3.0)):
    """Draws from the acceptance ranges."""
    out = []
    for _ in range(n):
        p = rng.uniform(0.4, 0.6)
        s = rng.uniform(0.05, 0.2)
        s_cd = s + rng.uniform(1e-6, 1.0) * (p - s)
        B = rng.uniform(*B_range)
        out.append(MarketParams(p=p, s=s, s_cd=min(s_cd, p), B=B, I=1000))
    return out

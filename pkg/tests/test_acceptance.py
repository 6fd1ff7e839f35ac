"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so the outcome is visible in the ``pytest -v`` log.
"""
import json
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from mecshare import MarketParams
from mecshare.agent_sim import replicate
from mecshare.cli import COMMANDS, run
from mecshare.cp_optimizer import cp_profit, optimize_eta, profit_curve
from mecshare.equilibrium import compute_thresholds, solve_equilibrium
from mecshare.market_model import region_areas, theta, theta_array
from mecshare.social_optimum import solve_social_optimum, welfare_at, welfare_at_ne
from mecshare.cp_optimizer import iteration_bound, nonmec_profit


@pytest.fixture
def report(capsys):
    def _report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return _report


def _draw(rng):
    p = rng.uniform(0.4, 0.6)
    s = rng.uniform(0.05, 0.2)
    s_cd = p - rng.uniform(0.0, 1.0) * (p - s)     # (s, p]
    if s_cd <= s:
        s_cd = p
    return MarketParams(p=p, s=s, s_cd=s_cd, B=rng.uniform(0.2, 3.0), I=1000)


def test_criterion_1_fixed_point(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_res = worst_loc = 0.0
    failures = []
    for k in range(1000):
        prm = _draw(rng)
        eta = rng.uniform(prm.eta_min, 1.0)
        eq = solve_equilibrium(eta, prm)
        res = abs(theta(eq.psi_star, eta, prm))
        lo, hi = eq.regime.predicted_interval
        inside = lo - 1e-9 <= eq.psi_star <= hi + 1e-9
        psi = np.linspace(0.0, prm.psi_max, 100_000)
        f = theta_array(psi, eta, prm)
        sign = np.sign(f)
        changes = np.flatnonzero(sign[:-1] * sign[1:] < 0)
        zeros = np.flatnonzero(f == 0.0)
        if changes.size == 1:
            loc = psi[changes[0]]
            roots = 1
        elif changes.size == 0 and zeros.size:
            loc = psi[zeros[0]]
            roots = 1
        else:
            loc, roots = np.nan, changes.size
        dist = abs(loc - eq.psi_star)
        worst_res = max(worst_res, res)
        worst_loc = max(worst_loc, dist) if np.isfinite(dist) else np.inf
        if not (res <= 1e-8 and inside and roots == 1 and dist <= 1e-4):
            failures.append((k, prm, eta))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 10.0
    report(1, ok, f"1000 draws, max |theta|={worst_res:.2e}, max scan offset="
                  f"{worst_loc:.2e}, failures={len(failures)}, {elapsed:.2f}s")
    assert ok, failures[:3]


def test_criterion_2_worked_equilibrium(report):
    prm = MarketParams(p=0.5, s=0.1, s_cd=0.4, B=2.0, I=1000)
    eq = solve_equilibrium(0.4, prm)
    profit = cp_profit(0.4, prm).profit
    sh = eq.shares
    ok = (abs(eq.psi_star - 0.2) <= 1e-9
          and max(abs(sh.a - 0.1), abs(sh.r - 0.32), abs(sh.n - 0.58)) <= 1e-9
          and abs(profit - 82.0) <= 1e-6)
    report(2, ok, f"psi*={eq.psi_star:.12g}, shares=({sh.a:.12g}, {sh.r:.12g}, "
                  f"{sh.n:.12g}), profit={profit:.12g}")
    assert ok


def test_criterion_3_optimizer_vs_grid(report):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst_rel, bound_ok, fails = 0.0, True, 0
    for _ in range(200):
        prm = _draw(rng)
        res = optimize_eta(prm, 1e-4)
        grid = np.append(np.arange(prm.eta_min, 1.0, 1e-4), 1.0)
        v, _, _ = profit_curve(grid, prm)
        rel = abs(res.profit_opt - v.max()) / abs(v.max())
        worst_rel = max(worst_rel, rel)
        fails += rel > 1e-3
        bound_ok &= all(k <= res.bound_k for k in res.iterations_per_segment)
    k_default = iteration_bound(MarketParams(), 1e-4)
    elapsed = time.perf_counter() - t0
    ok = fails == 0 and bound_ok and k_default == 17 and elapsed < 60.0
    report(3, ok, f"200 draws, max rel. gap={worst_rel:.2e}, iterations within "
                  f"bound={bound_ok}, default K={k_default}, {elapsed:.2f}s")
    assert ok


def test_criterion_4_capacity_met_at_eta0(report):
    rng = np.random.default_rng(11)
    worst, n, tries = 0.0, 0, 0
    while n < 100:
        tries += 1
        prm = _draw(rng)
        eta0 = compute_thresholds(prm).eta0
        if eta0 > 1.0:          # kink outside the feasible ratios
            continue
        a, r = region_areas(solve_equilibrium(eta0, prm).psi_star, prm)
        worst = max(worst, abs(r / a - prm.B))
        n += 1
    ok = worst <= 1e-6
    report(4, ok, f"100 draws with eta0 <= 1 ({tries} sampled), "
                  f"max |r/a - B|={worst:.2e}")
    assert ok


def test_criterion_5_ne_below_so(report):
    etas_n = 81
    worst_gap = np.inf
    monotone = True
    cells = 0
    for s in (0.05, 0.1, 0.15, 0.2):
        for B in (1.0, 1.5, 2.0):
            for p in (0.4, 0.5, 0.6):
                prm = MarketParams(p=p, s=s, s_cd=0.4, B=B, I=1000)
                etas = np.linspace(prm.eta_min, 1.0, etas_n)
                so = np.array([solve_social_optimum(float(e), prm).welfare for e in etas])
                ne = np.array([welfare_at_ne(float(e), prm) for e in etas])
                worst_gap = min(worst_gap, float(np.min(so - ne)))
                monotone &= bool(np.all(np.diff(so) >= -1e-9) and np.all(np.diff(ne) >= -1e-9))
                cells += etas_n
    ok = worst_gap >= -1e-9 and monotone
    report(5, ok, f"{cells} cells, min(W_so - W_ne)={worst_gap:.3e}, "
                  f"both nondecreasing in eta={monotone}")
    assert ok


def test_criterion_6_simulation_agreement(report):
    prm = MarketParams(p=0.5, s=0.1, s_cd=0.4, B=2.0, I=1000)
    t0 = time.perf_counter()
    st = replicate(prm, 0.4, 1000, base_seed=0)
    elapsed = time.perf_counter() - t0
    fa, fa_se = st.means["frac_agents"], st.std_errors["frac_agents"]
    cp, cp_se = st.means["cp_profit"], st.std_errors["cp_profit"]
    ok = (abs(fa - 0.1) <= 3 * fa_se and abs(cp - 82.0) <= 3 * cp_se
          and st.audit_failures == 0 and elapsed < 300.0)
    report(6, ok, f"frac_agents={fa:.5f}+-{fa_se:.5f}, cp_profit={cp:.4f}+-{cp_se:.4f}, "
                  f"not converged={st.n_not_converged}, audit failures="
                  f"{st.audit_failures}, {elapsed:.2f}s")
    assert ok


def test_criterion_7_headline_ratios(report):
    s_values = np.round(np.arange(0.05, 0.2 + 1e-9, 0.01), 10)
    p_ratio, w_ratio = [], []
    for s in s_values:
        prm = MarketParams(p=0.5, s=float(s), s_cd=0.4, B=2.0, I=1000)
        opt = optimize_eta(prm, 1e-4)
        v0 = nonmec_profit(prm)
        w0 = welfare_at(0.0, prm.eta_min, prm)
        p_ratio.append((opt.profit_opt - v0) / v0)
        w_ratio.append((welfare_at_ne(opt.eta_opt, prm) - w0) / w0)
    rho_p = spearmanr(s_values, p_ratio).statistic
    rho_w = spearmanr(s_values, w_ratio).statistic
    pmax, wmax = max(p_ratio), max(w_ratio)
    checks = {
        "profit max in [0.9, 1.5]": 0.9 <= pmax <= 1.5,
        "profit decreasing in s": rho_p < 0,
        "welfare max in [0.3, 0.7]": 0.3 <= wmax <= 0.7,
        "welfare increasing in s": rho_w > 0,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(7, ok, f"max profit ratio={pmax:.4f} (spearman {rho_p:+.3f}), "
                  f"max welfare ratio={wmax:.4f} (spearman {rho_w:+.3f}); "
                  f"failed: {failed or 'none'}")
    assert ok, failed


def _det_configs(tmp_path):
    base = {"params": {"p": 0.5, "s": 0.1, "s_cd": 0.4, "B": 2.0, "I": 1000}}
    grid = {"min": None, "max": 1.0, "steps": 21}
    cfgs = {
        "equilibrium": base | {"eta_grid": grid},
        "optimize": base | {"eta_grid": grid},
        "social-optimum": base | {"eta_grid": grid},
        "simulate": base | {"eta": 0.4, "sim": {"n_runs": 50, "base_seed": 1}},
        "sweep": base | {"sweep_variable": "s", "sweep_values": [0.05, 0.1, 0.2],
                         "eta_grid": grid},
        "compare-nonmec": base | {"sweep_variable": "s",
                                  "sweep_values": [0.05, 0.1, 0.15, 0.2]},
    }
    paths = {}
    for name, cfg in cfgs.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        paths[name] = str(path)
    return paths


def test_criterion_8_determinism(tmp_path, report):
    paths = _det_configs(tmp_path)
    assert set(paths) == set(COMMANDS)
    mismatched = []
    for name, cfg in paths.items():
        for fmt in ("csv", "json"):
            dirs = [tmp_path / f"{name}-{fmt}-{k}" for k in range(2)]
            for d in dirs:
                assert run([name, "--config", cfg, "--out", str(d), "--format", fmt]) == 0
            first = sorted(p.name for p in dirs[0].iterdir())
            second = sorted(p.name for p in dirs[1].iterdir())
            if first != second or any((dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()
                                      for f in first):
                mismatched.append(f"{name}/{fmt}")
    ok = not mismatched
    report(8, ok, f"{len(paths)} subcommands x 2 formats rerun, "
                  f"mismatches: {mismatched or 'none'}")
    assert ok

"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the batch equilibrium solver on a dense eta grid and a full run of the
best-response dynamics, then checks that both backends return identical bits.
"""
import argparse
import time

import numpy as np

from mecshare import MarketParams, kernels
from mecshare.agent_sim import sample_population


def _best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_solver(backend, params, etas, repeat):
    return _best_of(lambda: kernels.solve_psi_many(etas, params, backend=backend), repeat)


def bench_dynamics(backend, params, eta, repeat, epochs=5):
    pop = sample_population(params, seed=0)
    margin = eta * params.p - params.s

    def go():
        roles = pop.roles.copy()
        counts = np.zeros(2, dtype=np.int64)
        rng = np.random.default_rng(0)
        for _ in range(epochs):
            order = rng.permutation(pop.size).astype(np.int64)
            kernels.dynamics_epoch(pop.w, pop.c, roles, order, margin,
                                   params.p + params.s, params.B, counts,
                                   backend=backend)
        return roles
    return _best_of(go, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--grid", type=int, default=100_001)
    ap.add_argument("--population", type=int, default=100_000)
    args = ap.parse_args()

    params = MarketParams()
    etas = np.linspace(params.eta_min, 1.0, args.grid)
    big = params.replace(I=args.population)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")

    results = {}
    for name in backends:
        t_solve, psi = bench_solver(name, params, etas, args.repeat)
        t_dyn, roles = bench_dynamics(name, big, 0.7, args.repeat)
        results[name] = (psi, roles)
        print(f"{name:>7}: solve {args.grid} etas {t_solve * 1e3:9.2f} ms   "
              f"5 epochs x {args.population} EDs {t_dyn * 1e3:9.2f} ms")
    if len(results) == 2:
        (pa, ra), (pb, rb) = results.values()
        same = np.array_equal(pa, pb) and np.array_equal(ra, rb)
        print(f"bitwise identical: {same}")


if __name__ == "__main__":
    main()

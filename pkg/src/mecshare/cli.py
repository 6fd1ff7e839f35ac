"""Command-line front end.

Each subcommand reads a JSON scenario (see :mod:`mecshare.config`), runs the
matching solver and writes ``<out>/<subcommand>.csv`` (or ``.json``) plus
``<out>/meta.json``.  Output is byte-for-byte reproducible for a given
config and flags.

Exit codes: 0 success, 2 configuration error, 3 infeasible sharing ratio,
4 numerical or convergence failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__, kernels
from .agent_sim import RNG_ALGORITHM, replicate
from .config import ConfigError, ScenarioConfig, SimSettings, load_config
from .cp_optimizer import cp_profit, nonmec_profit, optimize_eta, profit_grid
from .equilibrium import compute_thresholds, solve_equilibrium
from .errors import InfeasibleEta, InvalidParameters, InvalidTolerance, NumericalFailure
from .market_model import MarketParams
from .social_optimum import solve_social_optimum, welfare_at, welfare_at_ne

log = logging.getLogger("mecshare")

SCHEMA_VERSION = 1
PARAM_COLUMNS = ["p", "s", "s_cd", "B", "I"]
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4


class ConvergenceFailure(RuntimeError):
    pass


@dataclass
class Table:
    columns: list[str]
    rows: list[dict]


# -- formatting ---------------------------------------------------------------

def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "undefined"
        return format(value, ".12g")
    return str(value)


def _json_cell(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _schema_line(name: str) -> str:
    return f"# schema: mecshare/{name}/v{SCHEMA_VERSION}"


def write_csv(path: Path, name: str, table: Table) -> None:
    lines = [_schema_line(name), ",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(_csv_cell(row.get(c)) for c in table.columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _json_table(name: str, table: Table) -> dict:
    return {"schema": f"mecshare/{name}/v{SCHEMA_VERSION}",
            "columns": table.columns,
            "rows": [{c: _json_cell(row.get(c)) for c in table.columns}
                     for row in table.rows]}


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8", newline="\n")


def _param_cells(params: MarketParams) -> dict:
    return {"p": params.p, "s": params.s, "s_cd": params.s_cd, "B": params.B,
            "I": params.I}


# -- config helpers -------------------------------------------------------------

def _require_no_sweep(cfg: ScenarioConfig, command: str) -> None:
    if cfg.sweep_variable is not None:
        raise ConfigError(f"{command} does not take sweep_variable/sweep_values")


def _single_etas(cfg: ScenarioConfig, command: str) -> list[float]:
    if cfg.eta is not None:
        return [cfg.eta]
    if cfg.eta_grid is not None:
        return [float(e) for e in cfg.eta_grid.values(cfg.params)]
    raise ConfigError(f"{command} needs eta or eta_grid")


def _ratio(new: float, base: float, what: str) -> float:
    if base == 0.0:
        log.warning("%s baseline is zero; increase ratio undefined", what)
        return math.nan
    return (new - base) / base


# -- subcommands ----------------------------------------------------------------

def cmd_equilibrium(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    _require_no_sweep(cfg, "equilibrium")
    cols = PARAM_COLUMNS + ["eta", "psi_star", "a", "r", "n", "residual",
                            "capacity_case", "eta_band", "form",
                            "interval_lo", "interval_hi"]
    rows = []
    for eta in _single_etas(cfg, "equilibrium"):
        eq = solve_equilibrium(eta, cfg.params)
        lo, hi = eq.regime.predicted_interval
        rows.append(_param_cells(cfg.params) | {
            "eta": eta, "psi_star": eq.psi_star, "a": eq.shares.a,
            "r": eq.shares.r, "n": eq.shares.n, "residual": eq.residual,
            "capacity_case": eq.regime.capacity_case.value,
            "eta_band": eq.regime.eta_band, "form": eq.regime.form,
            "interval_lo": lo, "interval_hi": hi})
    return {"equilibrium": Table(cols, rows)}


def cmd_optimize(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    _require_no_sweep(cfg, "optimize")
    if cfg.eta is not None:
        raise ConfigError("optimize searches eta itself; drop the eta key")
    params = cfg.params
    res = optimize_eta(params, opts.epsilon)
    cols = PARAM_COLUMNS + ["epsilon", "eta_opt", "profit_opt", "branch", "eta0",
                            "iterations", "bound_k", "nonmec_profit"]
    row = _param_cells(params) | {
        "epsilon": opts.epsilon, "eta_opt": res.eta_opt,
        "profit_opt": res.profit_opt, "branch": res.branch.value,
        "eta0": res.eta0,
        "iterations": ";".join(str(k) for k in res.iterations_per_segment),
        "bound_k": res.bound_k, "nonmec_profit": nonmec_profit(params)}
    out = {"optimize": Table(cols, [row])}
    if cfg.eta_grid is not None:
        curve_cols = PARAM_COLUMNS + ["eta", "profit", "branch", "psi_star", "a", "r"]
        curve = [_param_cells(params) | {
                     "eta": pt.eta, "profit": pt.profit, "branch": pt.branch.value,
                     "psi_star": pt.psi, "a": pt.shares.a, "r": pt.shares.r}
                 for pt in profit_grid(params, cfg.eta_grid.values(params))]
        out["optimize_curve"] = Table(curve_cols, curve)
    return out


_SO_COLUMNS = ["psi_so", "welfare_so", "a_so", "r_so", "n_so",
               "capacity_binding", "cp_profit_so"]


def _so_cells(eta: float, params: MarketParams) -> dict:
    so = solve_social_optimum(eta, params)
    return {"psi_so": so.psi_so, "welfare_so": so.welfare, "a_so": so.shares.a,
            "r_so": so.shares.r, "n_so": so.shares.n,
            "capacity_binding": so.capacity_binding, "cp_profit_so": so.cp_profit,
            "other_local_maxima": ";".join(format(x, ".12g")
                                           for x in so.other_local_maxima)}


def cmd_social_optimum(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    _require_no_sweep(cfg, "social-optimum")
    params = cfg.params
    cols = PARAM_COLUMNS + ["eta"] + _SO_COLUMNS + [
        "psi_ne", "welfare_ne", "cp_profit_ne", "efficiency_loss",
        "other_local_maxima"]
    rows = []
    for eta in _single_etas(cfg, "social-optimum"):
        so = _so_cells(eta, params)
        psi_ne = solve_equilibrium(eta, params).psi_star
        w_ne = welfare_at(psi_ne, eta, params)
        rows.append(_param_cells(params) | {"eta": eta} | so | {
            "psi_ne": psi_ne, "welfare_ne": w_ne,
            "cp_profit_ne": cp_profit(eta, params).profit,
            "efficiency_loss": so["welfare_so"] - w_ne})
    return {"social-optimum": Table(cols, rows)}


def cmd_simulate(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    _require_no_sweep(cfg, "simulate")
    if cfg.eta is None:
        raise ConfigError("simulate needs a single eta")
    sim = cfg.sim or SimSettings()
    if opts.seed is not None:
        sim = replace(sim, base_seed=opts.seed)
    params, eta = cfg.params, cfg.eta
    stats = replicate(params, eta, sim.n_runs, sim.base_seed, sim.max_epochs,
                      workers=opts.workers)
    if stats.n_not_converged == stats.n_runs:
        raise ConvergenceFailure(
            f"none of {stats.n_runs} runs converged within {sim.max_epochs} epochs")
    eq = solve_equilibrium(eta, params)
    analytic = {"frac_agents": eq.shares.a, "frac_requesters": eq.shares.r,
                "frac_aliens": eq.shares.n, "psi_hat": eq.psi_star,
                "welfare": welfare_at(eq.psi_star, eta, params),
                "cp_profit": cp_profit(eta, params).profit, "epochs": None}
    cols = PARAM_COLUMNS + ["eta", "n_runs", "base_seed", "max_epochs",
                            "n_not_converged", "audit_failures", "quantity",
                            "analytic", "mean", "std_error"]
    base = _param_cells(params) | {
        "eta": eta, "n_runs": sim.n_runs, "base_seed": sim.base_seed,
        "max_epochs": sim.max_epochs, "n_not_converged": stats.n_not_converged,
        "audit_failures": stats.audit_failures}
    rows = [base | {"quantity": k, "analytic": analytic[k],
                    "mean": stats.means[k], "std_error": stats.std_errors[k]}
            for k in stats.means]
    return {"simulate": Table(cols, rows)}


def _sweep_cell(args) -> list[dict]:
    var, value, params, etas = args
    rows = []
    for eta in etas:
        eq = solve_equilibrium(eta, params)
        pt = cp_profit(eta, params)
        rows.append({"sweep_variable": var, "sweep_value": value}
                    | _param_cells(params) | {
                        "eta": eta, "psi_ne": eq.psi_star, "a_ne": eq.shares.a,
                        "r_ne": eq.shares.r, "n_ne": eq.shares.n,
                        "welfare_ne": welfare_at(eq.psi_star, eta, params),
                        "cp_profit_ne": pt.profit, "branch_ne": pt.branch.value}
                    | _so_cells(eta, params))
    return rows


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


def cmd_sweep(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    if cfg.sweep_variable is None:
        raise ConfigError("sweep needs sweep_variable and sweep_values")
    if cfg.eta is not None:
        raise ConfigError("sweep takes eta_grid, not eta")
    var = cfg.sweep_variable
    if var == "eta":
        if cfg.eta_grid is not None:
            raise ConfigError("an eta sweep takes its values from sweep_values")
        jobs = [(var, None, cfg.params, list(cfg.sweep_values))]
    else:
        if cfg.eta_grid is None:
            raise ConfigError("sweep needs eta_grid")
        jobs = []
        for v in cfg.sweep_values:
            params = cfg.cell_params(v)
            jobs.append((var, v, params, [float(e) for e in cfg.eta_grid.values(params)]))
    rows = [row for chunk in _map(_sweep_cell, jobs, opts.workers) for row in chunk]
    cols = (["sweep_variable", "sweep_value"] + PARAM_COLUMNS
            + ["eta", "psi_ne", "a_ne", "r_ne", "n_ne", "welfare_ne",
               "cp_profit_ne", "branch_ne"] + _SO_COLUMNS)
    return {"sweep": Table(cols, rows)}


def _compare_cell(args) -> dict:
    var, value, params, epsilon = args
    opt = optimize_eta(params, epsilon)
    v_nonmec = nonmec_profit(params)
    w_nonmec = welfare_at(0.0, params.eta_min, params)
    w_ne = welfare_at_ne(opt.eta_opt, params)
    return ({"sweep_variable": var, "sweep_value": value} | _param_cells(params) | {
        "eta_opt": opt.eta_opt, "V_nonmec": v_nonmec, "V_opt": opt.profit_opt,
        "profit_increase_ratio": _ratio(opt.profit_opt, v_nonmec, "profit"),
        "W_nonmec": w_nonmec, "W_ne_at_opt": w_ne,
        "welfare_increase_ratio": _ratio(w_ne, w_nonmec, "welfare")})


def cmd_compare_nonmec(cfg: ScenarioConfig, opts) -> dict[str, Table]:
    if cfg.sweep_variable is None or cfg.sweep_variable == "eta":
        raise ConfigError("compare-nonmec needs a parameter sweep (s, B or p)")
    if cfg.eta is not None or cfg.eta_grid is not None:
        raise ConfigError("compare-nonmec optimises eta; drop eta/eta_grid")
    jobs = [(cfg.sweep_variable, v, cfg.cell_params(v), opts.epsilon)
            for v in cfg.sweep_values]
    rows = _map(_compare_cell, jobs, opts.workers)
    cols = (["sweep_variable", "sweep_value"] + PARAM_COLUMNS
            + ["eta_opt", "V_nonmec", "V_opt", "profit_increase_ratio",
               "W_nonmec", "W_ne_at_opt", "welfare_increase_ratio"])
    return {"compare-nonmec": Table(cols, rows)}


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "optimize": cmd_optimize,
    "social-optimum": cmd_social_optimum,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare-nonmec": cmd_compare_nonmec,
}


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecshare",
        description="Equilibrium, revenue-sharing optimisation and simulation "
                    "for crowdsourced edge caching markets.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON scenario file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--format", choices=("csv", "json"),
                       help="output format (overrides the config)")
        p.add_argument("--seed", type=int, help="base seed for simulate")
        p.add_argument("--epsilon", type=float, default=1e-4,
                       help="golden-section tolerance (default 1e-4)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for sweeps and replications")
    return parser


def _write_outputs(command: str, tables: dict[str, Table], cfg: ScenarioConfig,
                   opts, out_dir: Path, fmt: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        for name, table in tables.items():
            write_csv(out_dir / f"{name}.csv", name, table)
    else:
        names = list(tables)
        doc = _json_table(names[0], tables[names[0]])
        for name in names[1:]:
            doc[name.removeprefix(command + "_").removeprefix(command)] = \
                _json_table(name, tables[name])
        write_json(out_dir / f"{command}.json", doc)
    meta = {
        "tool": "mecshare",
        "version": __version__,
        "subcommand": command,
        "schema_version": SCHEMA_VERSION,
        "config": cfg.as_dict(),
        "options": {"epsilon": opts.epsilon, "seed": opts.seed,
                    "format": fmt},
        "rng": RNG_ALGORITHM,
        "kernel_backend": kernels.BACKEND,
        "files": sorted(f"{n}.{fmt}" for n in tables) if fmt == "csv"
        else [f"{command}.json"],
    }
    write_json(out_dir / "meta.json", meta)


def run(argv: list[str] | None = None) -> int:
    opts = build_parser().parse_args(argv)
    try:
        cfg = load_config(opts.config)
        if opts.workers < 1:
            raise ConfigError("--workers must be at least 1")
        fmt = opts.format or cfg.output_format
        out_dir = Path(opts.out or cfg.output_directory or ".")
        tables = COMMANDS[opts.command](cfg, opts)
        _write_outputs(opts.command, tables, cfg, opts, out_dir, fmt)
    except (ConfigError, InvalidParameters, InvalidTolerance) as exc:
        print(f"mecshare: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleEta as exc:
        print(f"mecshare: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalFailure, ConvergenceFailure) as exc:
        print(f"mecshare: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    logging.basicConfig(level=logging.WARNING, format="mecshare: %(message)s")
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

"""Command-line simulator.

Exit codes: 0 success, 1 configuration error, 2 hard solver failure,
3 invariant violation reported by ``verify``.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from . import verify as verify_mod
from .baselines import solve_fixed_direction, solve_nonrobust
from .conic import NUMERICAL_FAILURE, ProblemOptions, assemble, dump_problem, kkt_diagnostics, solve
from .experiments import (ConfigError, ExperimentConfig, SweepPoint, aggregate, config_from_dict,
                          evaluate, ExperimentRecord, generate_scenario, load_config, run_points,
                          sweep_points, write_csv)
from .geometry import aod_from_geometry, uav_position, user_position, watts_to_dbm
from .uncertainty import AoDUncertainty, LocationUncertainty, Scenario

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        n_theta, n_dirs = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected THETAxDIRS, e.g. 101x64, got {text!r}")
    if n_theta < 1 or n_dirs < 1:
        raise argparse.ArgumentTypeError("grid sizes must be positive")
    return n_theta, n_dirs


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML config file (built-in defaults otherwise)")
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--schemes", help="comma-separated subset of proposed,zf,mrt,nonrobust")
    p.add_argument("--drop-c1", action="store_true", help="drop per-antenna caps in every scheme")
    p.add_argument("--oracle-grid", type=_parse_grid, metavar="THETAxDIRS")
    p.add_argument("--mismatch", action="store_true", help="sample true locations outside the disk")
    p.add_argument("--jobs", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavbeam", description="Robust UAV beamforming and positioning.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve one scenario and print diagnostics")
    _common(p)
    p.add_argument("--index", type=int, default=0, help="realization index when no [scenario] is given")
    p.add_argument("--scheme", default="proposed", choices=["proposed", "zf", "mrt", "nonrobust"])
    for name, kind in (("sweep-rho", "rho"), ("sweep-sinr", "sinr"), ("sweep-radius", "radius")):
        p = sub.add_parser(name, help=f"Monte-Carlo sweep over {kind}")
        _common(p)
        p.add_argument("--timing", action="store_true", help="include solve_time column")
        p.add_argument("--summary", action="store_true", help="print aggregated rows to stderr")
        p.set_defaults(sweep=kind)
    p = sub.add_parser("verify", help="run the invariant checks")
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    p = sub.add_parser("dump-problem", help="serialize the conic program as JSON")
    _common(p)
    p.add_argument("--index", type=int, default=0)
    return ap


def _load(args) -> tuple[ExperimentConfig, dict | None]:
    over = dict(seed=args.seed, realizations=args.realizations, jobs=args.jobs)
    if args.schemes:
        over["schemes"] = [s.strip() for s in args.schemes.split(",") if s.strip()]
    if args.drop_c1:
        over["drop_c1_everywhere"] = True
    if args.mismatch:
        over["mismatch"] = True
    if args.oracle_grid:
        over["oracle_theta"], over["oracle_dirs"] = args.oracle_grid
    explicit = None
    if args.config:
        from .experiments import tomllib
        cfg = load_config(args.config, **over)
        with open(args.config, "rb") as fh:
            explicit = tomllib.load(fh).get("scenario")
    else:
        cfg = config_from_dict({}, **over)
    return cfg, explicit


def scenario_from_table(table: dict, cfg: ExperimentConfig, point: SweepPoint) -> Scenario:
    """Explicit scenario: ``uav_xy``, ``users`` and optional ``theta_bar``, ``rho`` / ``alpha``, ``radius``."""
    try:
        uav_xy = tuple(float(v) for v in table["uav_xy"])
        users = [tuple(float(v) for v in u) for u in table["users"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"[scenario]: needs uav_xy = [x, y] and users = [[x, y], ...] ({exc})") from exc
    unknown = set(table) - {"uav_xy", "users", "theta_bar", "rho", "alpha", "radius"}
    if unknown:
        raise ConfigError(f"[scenario]: unknown field(s) {sorted(unknown)}")
    if len(users) != cfg.n_users:
        raise ConfigError(f"[scenario]: {len(users)} users but n_users = {cfg.n_users}")
    uav = uav_position(uav_xy, cfg.altitude)
    theta = table.get("theta_bar") or [aod_from_geometry(uav, user_position(u)) for u in users]
    if "alpha" in table:
        alpha = [float(a) for a in table["alpha"]]
    else:
        rho = float(table.get("rho", point.rho))
        alpha = [rho * abs(t) for t in theta]
    radius = float(table.get("radius", point.radius))
    try:
        return Scenario(uav_xy, tuple(AoDUncertainty(float(t), a) for t, a in zip(theta, alpha)),
                        tuple(LocationUncertainty(u, radius) for u in users))
    except ValueError as exc:
        raise ConfigError(f"[scenario]: {exc}") from exc


def _scenario(cfg, explicit, index):
    point = cfg.base_point()
    if explicit is not None:
        return scenario_from_table(explicit, cfg, point), point
    return generate_scenario(cfg, point, index), point


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def cmd_solve(args) -> int:
    cfg, explicit = _load(args)
    scenario, point = _scenario(cfg, explicit, args.index)
    params = cfg.params(point)
    include_c1 = not cfg.drop_c1_everywhere
    kkt = None
    tau = None
    if args.scheme == "proposed":
        problem = assemble(scenario, params, ProblemOptions(include_c1=include_c1, c2a_form=cfg.c2a_form))
        sol, rep = solve(problem)
        if sol.optimal:
            kkt = kkt_diagnostics(problem, sol, rep)
    elif args.scheme == "nonrobust":
        if scenario.truth is None:
            raise ConfigError("nonrobust needs a generated scenario (true realization unknown)")
        res = solve_nonrobust(scenario, params, include_c1=include_c1)
        sol, rep, tau = res.solution, res.report, res.tau
    else:
        sol, rep = solve_fixed_direction(args.scheme, scenario, params, include_c1=False)
    out = _open_out(args.out)
    pr = lambda *a: print(*a, file=out)
    pr(f"scheme          {args.scheme}")
    pr(f"status          {sol.status}")
    pr(f"iterations      {rep.iterations}")
    pr(f"solve_time_s    {rep.solve_time:.3f}")
    if sol.optimal:
        power = sol.objective if tau is None else tau * float(np.sum(np.abs(sol.w) ** 2))
        pr(f"total_power_w   {power:.9e}")
        pr(f"total_power_dbm {watts_to_dbm(power):.6f}")
        pr(f"uav_xy_m        {sol.position[0]:.6f} {sol.position[1]:.6f}")
        pr(f"duality_gap     {sol.duality_gap:.3e}")
        pr(f"max_residual    {sol.max_residual:.3e}")
        pr("rank_ratio      " + " ".join(f"{r:.3e}" for r in np.atleast_1d(sol.rank_ratio)))
        pr("user_power_w    " + " ".join(f"{float(np.sum(np.abs(w) ** 2)):.6e}" for w in sol.w))
        if tau is not None:
            pr(f"tau             {tau:.9g}")
        else:
            rec = ExperimentRecord(args.scheme, point.rho, point.sinr_db, point.radius, point.n_antennas,
                                   args.index, sol.status)
            if scenario.truth is not None:
                evaluate(cfg, scenario, params, sol.w, sol.position, rec)
            else:
                _margins_only(cfg, scenario, params, sol, rec)
            pr(f"lin_margin_db   {rec.lin_margin_db:.6f}")
            pr(f"nl_margin_db    {rec.nl_worst_margin_db:.6f}")
            if scenario.truth is not None:
                pr(f"nl_pass         {int(rec.nl_pass)}")
        if kkt is not None and kkt.available:
            pr(f"kkt_pass        {int(kkt.passes())}")
            pr("nu_max          " + " ".join(f"{v:.9f}" for v in kkt.nu_max))
    if out is not sys.stdout:
        out.close()
    return EXIT_SOLVER if sol.status == NUMERICAL_FAILURE else EXIT_OK


def _margins_only(cfg, scenario, params, sol, rec):
    from .uncertainty import worst_case_sinr_oracle
    from .experiments import _margin_db
    grid = dict(n_theta=cfg.oracle_theta, n_dirs=cfg.oracle_dirs)
    for model, attr in (("linearized", "lin_margin_db"), ("nonlinear", "nl_worst_margin_db")):
        s = worst_case_sinr_oracle(sol.w, sol.position, scenario.aod, scenario.loc, params, model, **grid)
        setattr(rec, attr, _margin_db(s, params.gamma_req))


def cmd_sweep(args) -> int:
    cfg, _ = _load(args)
    records = run_points(cfg, sweep_points(cfg, args.sweep))
    out = _open_out(args.out)
    write_csv(records, out, timing=args.timing)
    if out is not sys.stdout:
        out.close()
    if args.summary:
        for row in aggregate(records):
            print(f"{row.scheme:10s} rho={row.rho:<5g} sinr={row.sinr_db:<4g}dB D={row.radius:<4g}m "
                  f"N={row.n_antennas} ok={row.n_success}/{row.count} infeas={row.n_infeasible} "
                  f"outage={row.n_outage} mean={row.mean_power_dbm:.3f} dBm pass={row.nl_pass_rate:.2f}",
                  file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_mod.run_checks(quick=args.quick)
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY


def cmd_dump(args) -> int:
    cfg, explicit = _load(args)
    scenario, point = _scenario(cfg, explicit, args.index)
    problem = assemble(scenario, cfg.params(point),
                       ProblemOptions(include_c1=not cfg.drop_c1_everywhere, c2a_form=cfg.c2a_form))
    out = _open_out(args.out)
    out.write(dump_problem(problem))
    out.write("\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"solve": cmd_solve, "verify": cmd_verify, "dump-problem": cmd_dump}
    handler = cmd_sweep if hasattr(args, "sweep") else handlers[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

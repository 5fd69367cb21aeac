"""Command-line entry point: ``hetnet-spectrum <command> [options]``.

Every command reads an optional JSON config (``--config``) and applies flag
overrides on top. Exit codes: 0 success, 1 config error, 2 infeasible at
every requested load, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .optimizer import LPFailure
from .queuesim import compare_bound
from .topology import (
    TopologyError,
    build_efficiency_table,
    deployment_from_dict,
    deployment_to_dict,
    table_from_dict,
    table_to_dict,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--scenario", type=Path,
                        help="scenario JSON written by 'gen' (skips the random drop)")
    common.add_argument("--area", type=float, nargs=2, metavar=("WIDTH", "HEIGHT"))
    common.add_argument("--spacing", type=float)
    common.add_argument("--num-bts", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--pathloss-exp", type=float)
    common.add_argument("--tx-psd", type=float)
    common.add_argument("--noise-psd", type=float)
    common.add_argument("--log-base", choices=["natural", "base2"])
    common.add_argument("--traffic-mode", choices=["uniform", "proportional"])
    common.add_argument("--load-basis", choices=["per-bts", "total"])
    common.add_argument("--horizon", type=float)
    common.add_argument("--replications", type=int)
    common.add_argument("--sim-seed", type=int)
    common.add_argument("--output", "-o", type=Path)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hetnet-spectrum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="generate a scenario and its efficiency table")
    p = sub.add_parser("solve", parents=[common], help="solve one load point")
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--scheme", choices=ex.SCHEMES, default=ex.OPTIMAL)
    p = sub.add_parser("sweep", parents=[common], help="CSV sweep over loads and schemes")
    p.add_argument("--loads", type=float, nargs="+")
    p.add_argument("--schemes", nargs="+", choices=ex.SCHEMES)
    p.add_argument("--no-sim", action="store_true", help="skip simulation")
    p = sub.add_parser("simulate", parents=[common], help="simulate one load point")
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--scheme", choices=ex.SCHEMES, default=ex.OPTIMAL)
    p.add_argument("--csv", action="store_true", help="emit per-BTS CSV instead of JSON")
    p = sub.add_parser("partition", parents=[common], help="render optimal partitions")
    p.add_argument("--loads", type=float, nargs="+", required=True)
    p = sub.add_parser("power", parents=[common], help="power/spectrum alternation trace")
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--max-iters", type=int)
    return parser


def _config(args) -> ex.ExperimentConfig:
    data = json.loads(args.config.read_text()) if args.config else {}
    cfg = ex.ExperimentConfig.from_dict(data)
    top = {}
    if args.area:
        top["area_width_m"], top["area_height_m"] = args.area
    for flag, name in [("spacing", "spacing_m"), ("num_bts", "num_bts"), ("seed", "seed"),
                       ("traffic_mode", "traffic_mode"), ("load_basis", "load_basis")]:
        if getattr(args, flag) is not None:
            top[name] = getattr(args, flag)
    for flag, name in [("loads", "loads"), ("schemes", "schemes")]:
        if getattr(args, flag, None):
            top[name] = getattr(args, flag)
    if getattr(args, "budget", None) is not None:
        top["power_budget"] = args.budget
    if getattr(args, "max_iters", None) is not None:
        top["power_max_iters"] = args.max_iters
    radio = {name: getattr(args, flag) for flag, name in
             [("pathloss_exp", "pathloss_exponent"), ("tx_psd", "tx_psd"),
              ("noise_psd", "noise_psd"), ("log_base", "log_base")]
             if getattr(args, flag) is not None}
    sim = {name: getattr(args, flag) for flag, name in
           [("horizon", "horizon"), ("replications", "replications"), ("sim_seed", "seed")]
           if getattr(args, flag) is not None}
    try:
        if radio:
            top["radio"] = dataclasses.replace(cfg.radio, **radio)
        if sim:
            top["sim"] = dataclasses.replace(cfg.sim, **sim)
        return dataclasses.replace(cfg, **top)
    except ValueError as exc:
        raise ex.ConfigError(str(exc)) from exc


def _scenario(args, cfg: ex.ExperimentConfig) -> ex.Scenario:
    if args.scenario is None:
        return ex.build_scenario(cfg)
    data = json.loads(args.scenario.read_text())
    deployment = deployment_from_dict(data["deployment"])
    if "table" in data:
        table = table_from_dict(data["table"])
    else:
        table = build_efficiency_table(deployment, cfg.radio)
    return ex.Scenario(deployment, table, int(data.get("seed", cfg.seed)))


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        output.write_text(text if text.endswith("\n") else text + "\n")


def _run(args) -> int:
    cfg = _config(args)
    scenario = _scenario(args, cfg)
    out = args.output or (Path(cfg.output) if cfg.output else None)

    if args.command == "gen":
        doc = {"seed": scenario.seed, "config": cfg.to_dict(),
               "deployment": deployment_to_dict(scenario.deployment),
               "table": table_to_dict(scenario.table)}
        _emit(json.dumps(doc, indent=2, sort_keys=True), out)
        return EXIT_OK

    if args.command == "solve":
        lam = ex.arrival_rates(cfg, scenario.deployment, args.load)
        rep = ex.solve_scheme(args.scheme, scenario.table, lam, cfg.solver_tol)
        doc = {"load": args.load, "scheme": args.scheme, "lambda": lam.tolist(), **rep.to_dict()}
        _emit(json.dumps(doc, indent=2), out)
        return EXIT_OK if rep.feasible else EXIT_INFEASIBLE

    if args.command == "sweep":
        rows = ex.run_sweep(cfg, scenario, simulate_points=not args.no_sim)
        _emit(ex.rows_to_csv(rows), out)
        if any(r.status.startswith("error") for r in rows):
            return EXIT_NUMERIC
        return EXIT_OK if any(r.status != "infeasible" for r in rows) else EXIT_INFEASIBLE

    if args.command == "simulate":
        lam = ex.arrival_rates(cfg, scenario.deployment, args.load)
        rep = ex.solve_scheme(args.scheme, scenario.table, lam, cfg.solver_tol)
        if not rep.feasible:
            _emit(json.dumps({"load": args.load, "scheme": args.scheme, "status": "infeasible"}), out)
            return EXIT_INFEASIBLE
        analytic, stats = compare_bound(scenario.table, rep.partition, lam, cfg.sim)
        if args.csv:
            _emit(stats.to_csv(), out)
        else:
            doc = {"load": args.load, "scheme": args.scheme, "analytic_delay": analytic,
                   "partition": rep.partition.to_dict(), "simulation": stats.to_dict()}
            _emit(json.dumps(doc, indent=2), out)
        return EXIT_OK

    if args.command == "partition":
        texts = [ex.show_partition(cfg, load, scenario) for load in cfg.loads]
        _emit("\n\n".join(texts), out)
        return EXIT_INFEASIBLE if all(t.endswith("infeasible") for t in texts) else EXIT_OK

    if args.command == "power":
        report, text = ex.run_power(cfg, args.load, scenario)
        _emit(text, out)
        return EXIT_OK if report.status == "ok" else EXIT_INFEASIBLE
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (ex.ConfigError, TopologyError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LPFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

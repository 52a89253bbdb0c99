"""Command-line interface.

Subcommands: ``solve`` (occupancy curve CSV), ``simulate`` (single
episode CSV), ``evaluate`` (policy statistics CSVs), ``serve``
(environment service).  Every run writes a manifest JSON next to its
outputs recording the resolved configuration and seed, so outputs can be
reproduced bit-for-bit.

Exit codes: 0 ok, 2 bad arguments, 3 numerical failure, 4 unreadable
input file, 5 bind failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .env import EnvConfig, default_config
from .errors import ConfigError, FormatError, IntegrationError, ShapeError
from .evaluate import aggregate, compare, evaluate, run_episode
from .hazards import Family
from .msdm import DegradationModel, solve_occupancy
from .policies import CBMPolicy, NeuralPolicy, Policy, RMPolicy, SchMPolicy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
EXIT_BIND = 5

CONFIG_ENV_VAR = "PIPEMDP_CONFIG"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _write_manifest(path: Path, subcommand: str, arguments: dict,
                    cfg: EnvConfig | None = None) -> None:
    doc = {
        "tool": "pipemdp",
        "version": __version__,
        "subcommand": subcommand,
        "arguments": arguments,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if cfg is not None:
        doc["config"] = cfg.to_dict()
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_model(family: str | None, table: str | None) -> DegradationModel:
    if table:
        try:
            return DegradationModel.from_file(table)
        except FormatError as exc:
            raise CliError(str(exc), EXIT_IO) from exc
    try:
        return DegradationModel.from_family(Family(family))
    except ValueError as exc:
        raise CliError(f"unknown family {family!r}", EXIT_USAGE) from exc


def _load_config(args) -> EnvConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    try:
        if path:
            cfg = EnvConfig.from_file(path)
        else:
            cfg = default_config()
    except (FormatError, ConfigError) as exc:
        raise CliError(f"bad config: {exc}", EXIT_IO) from exc
    overrides = {}
    if getattr(args, "dynamics", None):
        overrides["dynamics"] = DegradationModel.from_family(Family(args.dynamics))
    if getattr(args, "prognosis", None):
        overrides["prognosis"] = DegradationModel.from_family(Family(args.prognosis))
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def _build_policy(spec: str, args) -> Policy:
    if spec == "rm":
        return RMPolicy()
    if spec == "schm":
        return SchMPolicy(period=args.schm_period)
    if spec == "cbm":
        return CBMPolicy(age_limit=args.cbm_age_limit,
                         h4_threshold=args.cbm_h4_threshold,
                         h5_threshold=args.cbm_h5_threshold)
    try:
        return NeuralPolicy.from_file(spec)
    except (FormatError, ShapeError) as exc:
        raise CliError(f"cannot load policy {spec!r}: {exc}", EXIT_IO) from exc


def _policy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cbm-age-limit", type=float, default=70.0)
    parser.add_argument("--cbm-h4-threshold", type=float, default=0.1)
    parser.add_argument("--cbm-h5-threshold", type=float, default=0.05)
    parser.add_argument("--schm-period", type=float, default=10.0)


def cmd_solve(args) -> int:
    model = _load_model(args.family, args.table)
    try:
        curve = solve_occupancy(model, args.t_end, args.step)
    except IntegrationError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    out = Path(args.out)
    curve.to_csv(out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "solve", {
        "family": args.family, "table": args.table,
        "t_end": args.t_end, "step": args.step, "out": str(out),
    })
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    policy = _build_policy(args.policy, args)
    try:
        log = run_episode(policy, cfg, start_age=args.start_age, seed=args.seed)
    except IntegrationError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc
    out = Path(args.out)
    log.to_csv(out)
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "simulate", {
        "policy": args.policy, "start_age": args.start_age,
        "seed": args.seed, "out": str(out),
    }, cfg)
    return EXIT_OK


def _evaluate_task(payload: dict) -> tuple[str, list]:
    """Worker entry point: one (policy, all ages) evaluation per task."""
    cfg = (EnvConfig.from_file(payload["config_path"]) if payload["config_path"]
           else default_config())
    args = argparse.Namespace(**payload["policy_flags"])
    policy = _build_policy(payload["policy"], args)
    stats = evaluate(policy, cfg, payload["ages"], payload["episodes"],
                     payload["seed"])
    return payload["policy"], stats


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    specs = [s.strip() for s in args.policies.split(",") if s.strip()]
    ages = [float(a) for a in args.ages.split(",")]
    if not specs:
        raise CliError("need at least one policy", EXIT_USAGE)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    policy_flags = {
        "cbm_age_limit": args.cbm_age_limit,
        "cbm_h4_threshold": args.cbm_h4_threshold,
        "cbm_h5_threshold": args.cbm_h5_threshold,
        "schm_period": args.schm_period,
    }
    try:
        if args.jobs > 1:
            payloads = [{
                "policy": spec, "ages": ages, "episodes": args.episodes,
                "seed": args.seed, "config_path": args.config,
                "policy_flags": policy_flags,
            } for spec in specs]
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = dict(pool.map(_evaluate_task, payloads))
            results = {spec: results[spec] for spec in specs}
        else:
            policies = [_build_policy(spec, args) for spec in specs]
            results = compare(policies, cfg, ages, args.episodes, args.seed)
    except IntegrationError as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from exc

    for name, stats_list in results.items():
        for stats in stats_list:
            stats.to_csv(out_dir / f"stats_{name}_{stats.start_age:g}.csv")
    for i, age in enumerate(ages):
        with open(out_dir / f"episode_costs_{age:g}.csv", "w", newline="") as f:
            f.write("policy,seed,total_cost_eur\r\n")
            for name, stats_list in results.items():
                for e, cost in enumerate(stats_list[i].episode_costs_eur):
                    f.write(f"{name},{args.seed + e},{repr(float(cost))}\r\n")
    if args.json:
        doc = {
            name: [
                dict(stats.to_rows()) | {
                    "episode_costs_eur": [float(c) for c in stats.episode_costs_eur]
                }
                for stats in stats_list
            ]
            for name, stats_list in results.items()
        }
        (out_dir / "evaluation.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out_dir / "manifest.json", "evaluate", {
        "policies": args.policies, "ages": args.ages,
        "episodes": args.episodes, "seed": args.seed,
        "jobs": args.jobs, "out_dir": str(out_dir),
    }, cfg)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import EnvServer, serve_stdio

    cfg = _load_config(args)
    if args.transport == "stdio":
        serve_stdio(cfg)
        return EXIT_OK
    try:
        server = EnvServer(cfg, host=args.host, port=args.port)
    except OSError as exc:
        raise CliError(f"cannot bind {args.host}:{args.port}: {exc}", EXIT_BIND) from exc
    print(f"serving on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipemdp",
        description="Sewer-pipe degradation simulator and maintenance-policy toolkit.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="write an occupancy curve CSV "
                       "(columns t,S1..S5,SF; one row per grid point)")
    p.add_argument("--family", default="weibull",
                   choices=[f.value for f in Family])
    p.add_argument("--table", help="JSON hazard-table file (overrides --family)")
    p.add_argument("--t-end", type=float, default=120.0)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--out", "-o", default="occupancy.csv")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="roll one episode and write its CSV "
                       "(columns t,action,h1..hF,S1..SF,c_m,c_r,c_f,r)")
    p.add_argument("--policy", required=True,
                   help="rm | schm | cbm | path to a .policy.json file")
    p.add_argument("--config", help=f"env config JSON (default ${CONFIG_ENV_VAR})")
    p.add_argument("--dynamics", help="override dynamics family")
    p.add_argument("--prognosis", help="override prognosis family")
    p.add_argument("--start-age", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o", default="episode.csv")
    _policy_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="Monte Carlo comparison of policies")
    p.add_argument("--policies", required=True, help="comma-separated policy specs")
    p.add_argument("--config", help=f"env config JSON (default ${CONFIG_ENV_VAR})")
    p.add_argument("--dynamics", help="override dynamics family")
    p.add_argument("--prognosis", help="override prognosis family")
    p.add_argument("--ages", default="0,25,50")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true",
                   help="also write evaluation.json with all statistics")
    p.add_argument("--out-dir", default="evaluation")
    _policy_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the JSON-lines environment service")
    p.add_argument("--config", help=f"env config JSON (default ${CONFIG_ENV_VAR})")
    p.add_argument("--dynamics", help="override dynamics family")
    p.add_argument("--prognosis", help="override prognosis family")
    p.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7070)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pipemdp: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, ConfigError) as exc:
        print(f"pipemdp: {exc}", file=sys.stderr)
        return EXIT_IO
    except IntegrationError as exc:
        print(f"pipemdp: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

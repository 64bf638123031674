"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 trace validation or parse
error, 4 instance too large for the offline solver.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConfigError, InstanceTooLarge, ParseError, ValidationError
from .experiment import (compare, dump_json, offline_comparison, regret_csv, session_csv,
                         simulate, write_outputs)
from .traces import read_capacity, read_viewport, sniff

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_TOO_LARGE = 0, 2, 3, 4


def _config(args) -> RunConfig:
    path = args.config_opt or args.config
    if path is None:
        raise ConfigError("no config given (positional or --config)")
    cfg = load_config(path)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = args.mode
    if args.policy is not None:
        if args.command == "compare":
            changes["policies"] = tuple(p.strip() for p in args.policy.split(","))
        else:
            changes["policy"] = args.policy
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    log, summary, report, stats = simulate(cfg)
    extra = {"regret.csv": regret_csv(log, report, stats)} if args.command == "regret" else None
    write_outputs(cfg.output_dir, log, summary, extra)
    print(f"{summary['policy']}: QoE {summary['qoe']:.3f}, regret {summary['regret']:.3f}, "
          f"bound {summary['regret_bound']:.3f} -> {cfg.output_dir}")
    return EXIT_OK


def _safe(name: str) -> str:
    return name.replace(":", "_").replace("/", "_")


def cmd_compare(args) -> int:
    cfg = _config(args)
    results = compare(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, (text, summary) in results.items():
        sub = out / _safe(name)
        sub.mkdir(exist_ok=True)
        (sub / "session.csv").write_text(text, encoding="utf-8")
        (sub / "summary.json").write_text(dump_json(summary), encoding="utf-8")
    table = {name: summary for name, (_, summary) in results.items()}
    (out / "summary.json").write_text(dump_json({"policies": table}), encoding="utf-8")
    for name, s in table.items():
        print(f"{name:>20}: QoE {s['qoe']:.3f}  viewing {s['mean_viewing_bitrate']:.2f} Mbps  "
              f"rebuffer {s['total_rebuffer_s']:.3f} s")
    return EXIT_OK


def cmd_offline(args) -> int:
    cfg = _config(args)
    best, online, summary = offline_comparison(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "session.csv").write_text(session_csv(best.log), encoding="utf-8")
    (out / "policy_session.csv").write_text(session_csv(online), encoding="utf-8")
    (out / "summary.json").write_text(dump_json(summary), encoding="utf-8")
    print(f"offline QoE {summary['offline_qoe']:.3f}, {cfg.policy} QoE {summary['policy_qoe']:.3f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    for path in args.files:
        kind = sniff(path)
        if kind == "capacity":
            tr = read_capacity(path, args.d_min, args.d_max)
            print(f"{path}: capacity, {len(tr)} samples, [{tr.mbps.min():g}, {tr.mbps.max():g}] Mbps")
        else:
            tr = read_viewport(path)
            print(f"{path}: viewport, {len(tr)} segments")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obs360lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def run_args(p):
        p.add_argument("config", nargs="?", help="flat TOML run config")
        p.add_argument("--config", dest="config_opt", metavar="PATH")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--mode", choices=("discrete", "convex"))
        p.add_argument("--policy", help="policy name (comma separated list for compare)")
        p.add_argument("--jobs", type=int, help="parallel sessions for compare")

    for name, fn, help_ in (("simulate", cmd_simulate, "run one policy"),
                            ("regret", cmd_simulate, "run one policy and write per-segment regret"),
                            ("compare", cmd_compare, "run several policies on one scenario"),
                            ("offline-opt", cmd_offline, "exact offline optimum (tiny instances)")):
        p = sub.add_parser(name, help=help_)
        run_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("validate", help="check trace files")
    p.add_argument("files", nargs="+")
    p.add_argument("--d-min", type=float)
    p.add_argument("--d-max", type=float)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InstanceTooLarge as exc:
        print(f"instance too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

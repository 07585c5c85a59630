"""Command-line entry point: ``relaychain run | batch | stats | export-topology``.

Exit codes: 0 success, 2 usage error, 3 configuration error, 4 runtime error
(including failed runs inside a batch), 5 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, SimConfig, dump_config, load_config
from .experiment import (ConfigSpec, ExperimentPlan, RunRecord, load_plan, parse_arena, read_csv,
                         run_experiment, summarize, summary_text, write_csv, write_summary)
from .export import SNAPSHOT_FILE, export_run, write_snapshots
from .simulation import Simulation, SnapshotPolicy
from .stats import welch_t_test

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4
EXIT_IO = 5
OUT_ENV = "RELAYCHAIN_OUT"

log = logging.getLogger("relaychain")


class UsageError(Exception):
    pass


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def write_manifest(out: Path, command: str, cfg: SimConfig, seed: int, extra: Optional[dict] = None) -> None:
    manifest = {
        "tool": "relaychain",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": _jsonable(cfg.to_dict()),
        "config_ini": dump_config(cfg),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(_jsonable(extra))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "relaychain-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_sets(items: Sequence[str]) -> dict[str, str]:
    overrides = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    return overrides


def _resolve_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = _parse_sets(args.set)
    if args.controller is not None:
        overrides["controller.kind"] = args.controller
    if args.robots is not None:
        overrides["world.n_robots"] = args.robots
    if args.arena is not None:
        w, h = parse_arena(args.arena)
        overrides["world.width"], overrides["world.height"] = w, h
    if getattr(args, "max_steps", None) is not None:
        overrides["world.max_steps"] = args.max_steps
    if getattr(args, "seed", None) is not None:
        overrides["world.rng_seed"] = args.seed
    return cfg.with_overrides(overrides) if overrides else cfg


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


# ------------------------------------------------------------------ commands

def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    seed = cfg.world.rng_seed
    out = _out_dir(args)
    write_manifest(out, "run", cfg, seed)
    odneat = cfg.controller.kind == "odneat"
    policy = SnapshotPolicy(every_n_steps=args.snapshot_every) if odneat else None
    sim = Simulation(cfg, seed, trace=not args.no_trace, events=odneat, snapshots=policy)
    res = sim.run()
    spec = ConfigSpec(0, cfg.controller.kind, cfg.world.n_robots, (cfg.world.width, cfg.world.height))
    record = RunRecord(spec.config_id, spec.controller, spec.n_robots, cfg.world.width, cfg.world.height, 0, seed,
                       res.steps_to_connectivity, res.connected, res.total_distance, res.replacements,
                       list(res.genome_stats))
    write_csv([record], out / "runs.csv")
    if sim.trace is not None:
        _write_jsonl(out / "trace.jsonl", sim.trace)
    if odneat:
        _write_jsonl(out / "events.jsonl", sim.events)
        write_snapshots(sim.snapshots, out / SNAPSHOT_FILE)
    status = f"connected at step {res.steps_to_connectivity}" if res.connected else "no connection before cutoff"
    print(f"{spec.config_id} seed={seed}: {status}, distance {res.total_distance:.2f} m -> {out}")
    return EXIT_OK


def cmd_batch(args) -> int:
    plan = load_plan(args.plan) if args.plan else ExperimentPlan()
    if args.runs is not None:
        plan = ExperimentPlan(plan.controllers, plan.group_sizes, plan.arenas, args.runs, plan.base_seed,
                              plan.base_config)
    if args.seed is not None:
        plan = ExperimentPlan(plan.controllers, plan.group_sizes, plan.arenas, plan.runs_per_config, args.seed,
                              plan.base_config)
    overrides = _parse_sets(args.set)
    if overrides:
        plan = ExperimentPlan(plan.controllers, plan.group_sizes, plan.arenas, plan.runs_per_config,
                              plan.base_seed, plan.base_config.with_overrides(overrides))
    out = _out_dir(args)
    write_manifest(out, "batch", plan.base_config, plan.base_seed, {
        "plan": {
            "controllers": plan.controllers,
            "group_sizes": plan.group_sizes,
            "arenas": [f"{w:g}x{h:g}" for w, h in plan.arenas],
            "runs_per_config": plan.runs_per_config,
            "base_seed": plan.base_seed,
        }
    })

    def progress(rec: RunRecord) -> None:
        log.info("%s #%d: %d steps (%s)", rec.config_id, rec.run_index, rec.steps_to_connectivity, rec.status)

    records = run_experiment(plan, max(1, args.parallel), progress)
    write_csv(records, out / "runs.csv")
    summary = summarize(records)
    write_summary(summary, out)
    print(summary_text(summary), end="")
    failed = sum(r.status != "ok" for r in records)
    if failed:
        print(f"{failed} run(s) failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_stats(args) -> int:
    samples = []
    for path in args.inputs:
        try:
            samples.append(read_csv(path))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if any(not recs for recs in samples):
        raise UsageError("input CSV holds no runs")
    if len(samples) > 2:
        raise UsageError("stats takes one or two --in files")
    summary = summarize([r for recs in samples for r in recs], args.alternative)
    if len(samples) == 2:
        xs = [r.steps_to_connectivity for r in samples[0] if r.status == "ok"]
        ys = [r.steps_to_connectivity for r in samples[1] if r.status == "ok"]
        if len(xs) < 2 or len(ys) < 2:
            raise UsageError("each input needs at least two successful runs for a t-test")
        summary["files"] = {"x": str(args.inputs[0]), "y": str(args.inputs[1]),
                            "welch": welch_t_test(xs, ys, args.alternative).to_dict()}
    text = summary_text(summary)
    if "files" in summary:
        w = summary["files"]["welch"]
        text += (f"\nfile comparison: t={w['t_statistic']:.4f} df={w['degrees_of_freedom']:.2f} "
                 f"p={w['p_value']:.4g}\n")
    print(text, end="")
    if args.out:
        out = _out_dir(args)
        write_summary(summary, out)
    return EXIT_OK


def cmd_export(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    if not (run_dir / SNAPSHOT_FILE).exists():
        raise UsageError(f"{run_dir} holds no genome snapshots (only odneat runs record topologies)")
    try:
        paths = export_run(run_dir, args.robot, args.disabled)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    for path in paths:
        print(path)
    return EXIT_OK


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relaychain",
                                     description="Relay-chain swarm simulator and experiment runner.",
                                     epilog="exit codes: 0 ok, 2 usage, 3 config, 4 runtime, 5 I/O")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_flags(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--controller", help="random_walk | preprogrammed | odneat")
        p.add_argument("--robots", type=int, help="group size")
        p.add_argument("--arena", metavar="WxH", help="arena size in meters, e.g. 4x4")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./relaychain-out)")

    p = sub.add_parser("run", help="run one simulation")
    sim_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--snapshot-every", type=int, default=0, help="periodic topology snapshots (odneat)")
    p.add_argument("--no-trace", action="store_true", help="skip the per-step trace file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run an experiment plan")
    p.add_argument("--plan", help="plan file; defaults to the full 18-configuration protocol")
    p.add_argument("--out")
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--runs", type=int, help="override runs_per_config")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a base config key (repeatable)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("stats", help="summarize run CSVs")
    p.add_argument("--in", dest="inputs", action="append", required=True, help="runs CSV (give two to compare)")
    p.add_argument("--out")
    p.add_argument("--alternative", default="two-sided", choices=("two-sided", "less", "greater"))
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export-topology", help="write DOT files from a run's genome snapshots")
    p.add_argument("--run", required=True)
    p.add_argument("--robot", type=int)
    p.add_argument("--disabled", default="dashed", choices=("dashed", "omit"))
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

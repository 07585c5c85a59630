"""Batch experiments over controllers x group sizes x arenas, plus summaries."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from .config import CONTROLLER_KINDS, ConfigError, SimConfig, parse_value
from .seeding import derive_seed
from .simulation import run_once
from .stats import WelchResult, describe, welch_t_test

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "config_id", "controller", "n_robots", "width", "height", "run_index", "seed",
    "steps_to_connectivity", "connected", "total_distance", "replacements",
    "final_genome_stats", "status", "error",
)


@dataclass(frozen=True)
class ConfigSpec:
    index: int
    controller: str
    n_robots: int
    arena: tuple[float, float]

    @property
    def config_id(self) -> str:
        w, h = self.arena
        return f"{self.controller}_n{self.n_robots}_{w:g}x{h:g}"


@dataclass(frozen=True)
class ExperimentPlan:
    controllers: tuple[str, ...] = CONTROLLER_KINDS
    group_sizes: tuple[int, ...] = (10, 15, 20)
    arenas: tuple[tuple[float, float], ...] = ((4.0, 4.0), (2.0, 5.0))
    runs_per_config: int = 30
    base_seed: int = 20190101
    base_config: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.runs_per_config < 1:
            raise ConfigError("runs_per_config must be >= 1")
        for kind in self.controllers:
            if kind not in CONTROLLER_KINDS:
                raise ConfigError(f"controller kind {kind!r} not in {CONTROLLER_KINDS}")
        if not (self.controllers and self.group_sizes and self.arenas):
            raise ConfigError("plan needs at least one controller, group size and arena")

    def configs(self) -> list[ConfigSpec]:
        specs = []
        for kind in self.controllers:
            for n in self.group_sizes:
                for arena in self.arenas:
                    specs.append(ConfigSpec(len(specs), kind, n, arena))
        return specs

    def sim_config(self, spec: ConfigSpec) -> SimConfig:
        w, h = spec.arena
        return self.base_config.with_overrides({
            "controller.kind": spec.controller,
            "world.n_robots": spec.n_robots,
            "world.width": w,
            "world.height": h,
        })

    def run_seed(self, spec: ConfigSpec, run_index: int) -> int:
        return derive_seed(self.base_seed, spec.index, run_index)


def parse_arena(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        return float(w), float(h)
    except ValueError:
        raise ConfigError(f"arena must look like WxH (e.g. 4x4), got {text!r}") from None


def _split_list(text: str) -> list[str]:
    return [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]


def load_plan(path: str | Path) -> ExperimentPlan:
    """Read a plan file: a ``[plan]`` section plus optional config sections
    that override the base simulation config."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"malformed plan file {path}: {exc}") from None
    if not parser.has_section("plan"):
        raise ConfigError(f"plan file {path} has no [plan] section")
    kwargs = {}
    known = {"controllers", "group_sizes", "arenas", "runs_per_config", "base_seed"}
    for key, value in parser.items("plan"):
        if key not in known:
            raise ConfigError(f"unknown plan key {key!r}; valid keys: {', '.join(sorted(known))}")
        if key == "controllers":
            kwargs[key] = tuple(_split_list(value))
        elif key == "group_sizes":
            kwargs[key] = tuple(parse_value(int, v, "plan.group_sizes") for v in _split_list(value))
        elif key == "arenas":
            kwargs[key] = tuple(parse_arena(v) for v in _split_list(value))
        else:
            kwargs[key] = parse_value(int, value, f"plan.{key}")
    overrides = {f"{s}.{k}": v for s in parser.sections() if s != "plan" for k, v in parser.items(s)}
    kwargs["base_config"] = SimConfig().with_overrides(overrides)
    return ExperimentPlan(**kwargs)


@dataclass
class RunRecord:
    config_id: str
    controller: str
    n_robots: int
    width: float
    height: float
    run_index: int
    seed: int
    steps_to_connectivity: int
    connected: bool
    total_distance: float
    replacements: int = 0
    final_genome_stats: list[tuple[int, int]] = field(default_factory=list)
    status: str = "ok"
    error: str = ""

    def to_row(self) -> dict[str, str]:
        return {
            "config_id": self.config_id,
            "controller": self.controller,
            "n_robots": str(self.n_robots),
            "width": repr(float(self.width)),
            "height": repr(float(self.height)),
            "run_index": str(self.run_index),
            "seed": str(self.seed),
            "steps_to_connectivity": str(self.steps_to_connectivity),
            "connected": "true" if self.connected else "false",
            "total_distance": repr(float(self.total_distance)),
            "replacements": str(self.replacements),
            "final_genome_stats": ";".join(f"{n}:{c}" for n, c in self.final_genome_stats),
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "RunRecord":
        stats = [tuple(int(v) for v in item.split(":")) for item in row["final_genome_stats"].split(";") if item]
        return cls(
            config_id=row["config_id"],
            controller=row["controller"],
            n_robots=int(row["n_robots"]),
            width=float(row["width"]),
            height=float(row["height"]),
            run_index=int(row["run_index"]),
            seed=int(row["seed"]),
            steps_to_connectivity=int(row["steps_to_connectivity"]),
            connected=row["connected"] == "true",
            total_distance=float(row["total_distance"]),
            replacements=int(row["replacements"]),
            final_genome_stats=stats,
            status=row.get("status", "ok"),
            error=row.get("error", ""),
        )


@dataclass(frozen=True)
class _Task:
    spec: ConfigSpec
    run_index: int
    seed: int
    cfg: SimConfig


def _execute(task: _Task) -> RunRecord:
    spec = task.spec
    w, h = spec.arena
    base = dict(config_id=spec.config_id, controller=spec.controller, n_robots=spec.n_robots,
                width=w, height=h, run_index=task.run_index, seed=task.seed)
    try:
        res = run_once(task.cfg, task.seed)
    except Exception as exc:  # isolate per-run failures from the batch
        log.error("run %s #%d failed: %s", spec.config_id, task.run_index, exc)
        detail = traceback.format_exception_only(type(exc), exc)[-1].strip()
        return RunRecord(**base, steps_to_connectivity=task.cfg.world.max_steps, connected=False,
                         total_distance=0.0, status="failed", error=detail)
    return RunRecord(**base, steps_to_connectivity=res.steps_to_connectivity, connected=res.connected,
                     total_distance=res.total_distance, replacements=res.replacements,
                     final_genome_stats=list(res.genome_stats))


def plan_tasks(plan: ExperimentPlan) -> list[_Task]:
    tasks = []
    for spec in plan.configs():
        cfg = plan.sim_config(spec)
        for r in range(plan.runs_per_config):
            tasks.append(_Task(spec, r, plan.run_seed(spec, r), cfg))
    return tasks


def run_experiment(plan: ExperimentPlan, parallelism: int = 1,
                   progress: Optional[Callable[[RunRecord], None]] = None,
                   select: Optional[Callable[[ConfigSpec], bool]] = None) -> list[RunRecord]:
    """Run every (config, run index) of the plan.

    Output order is (config index, run index) regardless of ``parallelism``,
    and each run depends only on its derived seed, so results do not depend on
    how many workers execute them. ``select`` keeps only the configurations
    it accepts; their seeds are the same as in the unfiltered plan.
    """
    tasks = [t for t in plan_tasks(plan) if select is None or select(t.spec)]
    if parallelism <= 1:
        records = []
        for task in tasks:
            rec = _execute(task)
            if progress:
                progress(rec)
            records.append(rec)
        return records
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        records = []
        for rec in pool.map(_execute, tasks, chunksize=1):
            if progress:
                progress(rec)
            records.append(rec)
    return records


def records_to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.to_row())
    return buf.getvalue()


def write_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8")


def read_csv(path: str | Path) -> list[RunRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [RunRecord.from_row(row) for row in reader]


# ------------------------------------------------------------------ summaries

def summarize(records: Iterable[RunRecord], alternative: str = "two-sided") -> dict:
    """Per-config descriptive statistics plus odNEAT-vs-preprogrammed Welch
    tests for each (group size, arena) where both were run."""
    by_config: dict[str, list[RunRecord]] = defaultdict(list)
    for rec in records:
        if rec.status == "ok":
            by_config[rec.config_id].append(rec)
    configs = {}
    for cid in sorted(by_config):
        recs = by_config[cid]
        first = recs[0]
        configs[cid] = {
            "controller": first.controller,
            "n_robots": first.n_robots,
            "arena": f"{first.width:g}x{first.height:g}",
            "runs": len(recs),
            "success_rate": sum(r.connected for r in recs) / len(recs),
            "steps_to_connectivity": describe([r.steps_to_connectivity for r in recs]),
            "total_distance": describe([r.total_distance for r in recs]),
        }
    comparisons = []
    for cid, info in configs.items():
        if info["controller"] != "odneat":
            continue
        other = cid.replace("odneat_", "preprogrammed_", 1)
        if other not in configs:
            continue
        xs = [r.steps_to_connectivity for r in by_config[cid]]
        ys = [r.steps_to_connectivity for r in by_config[other]]
        if len(xs) < 2 or len(ys) < 2:
            continue
        result = welch_t_test(xs, ys, alternative)
        comparisons.append({"odneat": cid, "preprogrammed": other, "welch": result.to_dict()})
    return {"configs": configs, "comparisons": comparisons}


def summary_text(summary: dict) -> str:
    lines = [f"{'config':<28} {'runs':>4} {'success':>7} {'median':>8} {'mean':>9} {'q1':>8} {'q3':>8} {'dist_med':>9}"]
    for cid, info in summary["configs"].items():
        s = info["steps_to_connectivity"]
        lines.append(f"{cid:<28} {info['runs']:>4} {info['success_rate']:>7.2f} {s['median']:>8.1f} "
                     f"{s['mean']:>9.1f} {s['q1']:>8.1f} {s['q3']:>8.1f} {info['total_distance']['median']:>9.2f}")
    if summary["comparisons"]:
        lines.append("")
        lines.append("Welch t-tests, steps to connectivity (odneat vs preprogrammed):")
        for comp in summary["comparisons"]:
            w = comp["welch"]
            lines.append(f"  {comp['odneat']:<24} t={w['t_statistic']:.4f} df={w['degrees_of_freedom']:.2f} "
                         f"p={w['p_value']:.4g}")
    return "\n".join(lines) + "\n"


def write_summary(summary: dict, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    (out / "summary.txt").write_text(summary_text(summary), encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, WelchResult):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")

from pathlib import Path

import pytest

from relaychain import experiment
from relaychain.config import ConfigError, SimConfig
from relaychain.experiment import (CSV_COLUMNS, ExperimentPlan, RunRecord, load_plan, plan_tasks, read_csv,
                                   records_to_csv, run_experiment, summarize, summary_text, write_csv,
                                   write_summary)
from relaychain.simulation import run_once

PLANS = Path(__file__).resolve().parents[1] / "plans"


def short_plan(**kw):
    base = SimConfig().with_overrides({"world.max_steps": kw.pop("max_steps", 120)})
    defaults = dict(controllers=("random_walk", "preprogrammed", "odneat"), group_sizes=(10, 20),
                    arenas=((4.0, 4.0), (2.0, 5.0)), runs_per_config=1, base_seed=5, base_config=base)
    defaults.update(kw)
    return ExperimentPlan(**defaults)


def record(cid="odneat_n10_4x4", steps=100, connected=True, controller="odneat", run=0):
    return RunRecord(cid, controller, 10, 4.0, 4.0, run, 1, steps, connected, 12.5)


def test_full_protocol_size():
    plan = ExperimentPlan()
    assert len(plan.configs()) == 18
    tasks = plan_tasks(plan)
    assert len(tasks) == 540
    assert len({t.seed for t in tasks}) == 540


def test_full_plan_file():
    plan = load_plan(PLANS / "full.ini")
    assert len(plan_tasks(plan)) == 540
    assert plan.base_config.world.max_steps == 10_000


def test_seeds_are_stable():
    plan = ExperimentPlan()
    spec = plan.configs()[4]
    assert plan.run_seed(spec, 7) == ExperimentPlan().run_seed(spec, 7)
    assert plan.run_seed(spec, 7) != plan.run_seed(spec, 8)


def test_plan_validation():
    with pytest.raises(ConfigError):
        ExperimentPlan(runs_per_config=0)
    with pytest.raises(ConfigError):
        ExperimentPlan(controllers=("bogus",))


def test_load_plan_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[plan]\nnonsense = 1\n")
    with pytest.raises(ConfigError, match="valid keys"):
        load_plan(bad)
    missing = tmp_path / "none.ini"
    missing.write_text("[world]\nwidth = 3\n")
    with pytest.raises(ConfigError):
        load_plan(missing)


def test_parallelism_does_not_change_output():
    plan = short_plan()
    serial = records_to_csv(run_experiment(plan, 1))
    parallel = records_to_csv(run_experiment(plan, 2))
    assert serial == parallel
    assert serial.count("\n") == 1 + 12


def test_cutoff_reported_as_max_steps():
    plan = short_plan(controllers=("random_walk",), group_sizes=(10,), arenas=((4.0, 4.0),),
                      runs_per_config=3, max_steps=40)
    recs = run_experiment(plan)
    for r in recs:
        assert not r.connected and r.steps_to_connectivity == 40
    summary = summarize(recs)
    info = summary["configs"]["random_walk_n10_4x4"]
    assert info["success_rate"] == 0.0 and info["steps_to_connectivity"]["median"] == 40


def test_cutoff_honesty_and_metrics():
    recs = run_experiment(short_plan(max_steps=150))
    for r in recs:
        assert r.steps_to_connectivity <= 150 and r.total_distance >= 0
        # a connection on the very last step still reads 150, but flagged
        assert r.connected or r.steps_to_connectivity == 150
        assert r.steps_to_connectivity == 150 or r.connected
        if r.controller == "odneat":
            assert len(r.final_genome_stats) == r.n_robots
        else:
            assert r.replacements == 0 and r.final_genome_stats == []


def test_failed_run_is_isolated(monkeypatch):
    real = experiment.run_once

    def flaky(cfg, seed, **kw):
        if cfg.world.n_robots == 20:
            raise RuntimeError("boom")
        return real(cfg, seed, **kw)

    monkeypatch.setattr(experiment, "run_once", flaky)
    recs = run_experiment(short_plan(controllers=("random_walk",)))
    assert [r.status for r in recs] == ["ok", "ok", "failed", "failed"]
    assert "boom" in recs[2].error
    assert set(summarize(recs)["configs"]) == {"random_walk_n10_4x4", "random_walk_n10_2x5"}


def test_csv_round_trip(tmp_path):
    recs = [record(), RunRecord("odneat_n20_2x5", "odneat", 20, 2.0, 5.0, 3, 2**63 + 5, 10_000, False,
                                0.1 + 0.2, 7, [(10, 16), (11, 18)])]
    path = tmp_path / "runs.csv"
    write_csv(recs, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert read_csv(path) == recs


def test_read_csv_rejects_missing_columns(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("config_id,seed\na,1\n")
    with pytest.raises(ValueError):
        read_csv(path)


def test_summary_single_record():
    info = summarize([record(steps=321)])["configs"]["odneat_n10_4x4"]
    s = info["steps_to_connectivity"]
    assert s["min"] == s["median"] == s["max"] == 321


def test_summary_welch_pairs(tmp_path):
    recs = []
    for i, steps in enumerate([100, 200, 300, 400]):
        recs.append(record("odneat_n10_4x4", steps, run=i))
        recs.append(record("preprogrammed_n10_4x4", steps + 50, controller="preprogrammed", run=i))
    summary = summarize(recs)
    (comp,) = summary["comparisons"]
    assert comp["preprogrammed"] == "preprogrammed_n10_4x4"
    assert comp["welch"]["t_statistic"] < 0
    write_summary(summary, tmp_path)
    assert (tmp_path / "summary.json").exists()
    assert "Welch" in (tmp_path / "summary.txt").read_text()
    assert "odneat_n10_4x4" in summary_text(summary)


def test_select_keeps_plan_seeds():
    plan = short_plan(max_steps=20)
    full = run_experiment(plan)
    picked = run_experiment(plan, select=lambda spec: spec.n_robots == 20 and spec.arena == (2.0, 5.0))
    assert [r.config_id for r in picked] == ["random_walk_n20_2x5", "preprogrammed_n20_2x5", "odneat_n20_2x5"]
    assert picked == [r for r in full if r.config_id in {p.config_id for p in picked}]


def test_connection_on_last_step_is_flagged():
    cfg = SimConfig().with_overrides({"world.n_robots": 20, "world.width": 2.0, "world.height": 5.0,
                                      "world.max_steps": 10_000})
    k = run_once(cfg, 3).steps_to_connectivity
    assert 1 < k < 10_000
    at = run_once(cfg.with_overrides({"world.max_steps": k}), 3)
    before = run_once(cfg.with_overrides({"world.max_steps": k - 1}), 3)
    assert (at.connected, at.steps_to_connectivity) == (True, k)
    assert (before.connected, before.steps_to_connectivity) == (False, k - 1)

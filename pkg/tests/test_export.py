from dataclasses import replace

import pydot
import pytest

from relaychain import neat
from relaychain.config import SimConfig
from relaychain.export import export_run, read_snapshots, to_dot, write_snapshots
from relaychain.neat import HIDDEN, minimal_genome
from relaychain.simulation import Simulation, SnapshotPolicy


def statement_counts(text):
    """Count real node and edge statements with pydot as the parser."""
    (graph,) = pydot.graph_from_dot_data(text)
    nodes = [n for n in graph.get_nodes() if n.get_name() not in ("node", "edge", "graph")]
    edges = list(graph.get_edges())
    return len(nodes), len(edges)


def odneat_cfg(steps, **extra):
    over = {"controller.kind": "odneat", "world.max_steps": steps, "run.stop_on_connection": False}
    over.update(extra)
    return SimConfig().with_overrides(over)


def test_minimal_genome_dot(minimal):
    text = to_dot(minimal)
    assert statement_counts(text) == (10, 16)
    assert "style=dashed" not in text


def test_dot_is_byte_stable(minimal):
    assert to_dot(minimal) == to_dot(neat.loads(neat.dumps(minimal)))


def test_disabled_modes(registry, rng, minimal):
    grown = neat.add_node(minimal, registry, rng)
    dashed, omitted = to_dot(grown), to_dot(grown, disabled="omit")
    assert dashed.count("style=dashed") == 1
    assert statement_counts(dashed) == (11, 18)
    assert statement_counts(omitted) == (11, 17)
    with pytest.raises(ValueError):
        to_dot(grown, disabled="hide")


def test_evolved_genome_round_trips_through_pydot():
    sim = Simulation(odneat_cfg(400, **{"odneat.maturation_steps": 20}), 3, snapshots=SnapshotPolicy())
    sim.run()
    for agent in sim.agents:
        g = agent.genome
        assert statement_counts(to_dot(g)) == (len(g.nodes), len(g.connections))


def test_snapshot_start_and_end_only():
    sim = Simulation(odneat_cfg(100), 2, snapshots=SnapshotPolicy(every_n_steps=0))
    sim.run()
    per_robot = {}
    for snap in sim.snapshots:
        per_robot.setdefault(snap.robot, []).append(snap.step)
    assert sorted(per_robot) == list(range(sim.world.n))
    assert all(steps == [0, 100] for steps in per_robot.values())
    for snap in sim.snapshots:
        if snap.step == 0:
            g = neat.loads(snap.genome)
            assert not any(n.kind == HIDDEN for n in g.nodes)


def test_snapshot_period_and_robot_filter():
    policy = SnapshotPolicy(start=False, end=True, every_n_steps=40, robots=(1, 4))
    sim = Simulation(odneat_cfg(100), 2, snapshots=policy)
    sim.run()
    assert sorted((s.robot, s.step) for s in sim.snapshots) == [(1, 40), (1, 80), (1, 100), (4, 40), (4, 80),
                                                                (4, 100)]


def test_snapshots_need_odneat():
    cfg = replace(odneat_cfg(10), controller=replace(SimConfig().controller, kind="random_walk"))
    with pytest.raises(ValueError):
        Simulation(cfg, 1, snapshots=SnapshotPolicy())


def test_export_run(tmp_path):
    sim = Simulation(odneat_cfg(50), 9, snapshots=SnapshotPolicy(robots=(0, 2)))
    sim.run()
    write_snapshots(sim.snapshots, tmp_path / "snapshots.jsonl")
    assert read_snapshots(tmp_path / "snapshots.jsonl") == sim.snapshots
    written = export_run(tmp_path, robot=2)
    assert sorted(p.name for p in written) == ["2_0.dot", "2_50.dot"]
    assert len(export_run(tmp_path)) == 4
    with pytest.raises(KeyError):
        export_run(tmp_path, robot=7)


def test_export_run_without_snapshots(tmp_path):
    with pytest.raises(FileNotFoundError):
        export_run(tmp_path)

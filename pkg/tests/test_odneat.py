import random
from dataclasses import replace

import pytest

from relaychain import neat
from relaychain.config import NeatParams, OdNeatParams, SimConfig
from relaychain.neat import ConnectionGene, Genome, InnovationRegistry, minimal_genome
from relaychain.odneat import (EnergyState, InternalPopulation, Message, OdNeatAgent, TabuList, audit_events,
                               generate_offspring, select_species, update_energy)
from relaychain.simulation import Simulation

P = OdNeatParams()
COEFFS = (1.0, 1.0, 0.4)


def keyed(genome, key, fitness=0.0):
    return replace(genome, key=key, fitness=fitness)


# --------------------------------------------------------------------- energy

def test_decay_only():
    e = update_energy(EnergyState(100.0), P, False, False, False)
    assert e.energy == pytest.approx(100.0 - P.decay, abs=1e-12)
    assert e.age_steps == 1


def test_collision_penalty():
    e = update_energy(EnergyState(100.0), P, True, False, False)
    assert e.energy == pytest.approx(100.0 - P.decay - P.crash_penalty, abs=1e-12)


def test_chain_reward_saturates_at_max():
    e = EnergyState(100.0)
    for _ in range(1000):
        e = update_energy(e, P, False, True, True)
    assert e.energy == P.max_energy
    assert e.age_steps == 1000


def test_chain_reward_needs_range_toggle():
    e = EnergyState(100.0)
    assert update_energy(e, P, False, True, False).energy == pytest.approx(100.0 - P.decay)
    loose = replace(P, chain_reward_needs_range=False)
    assert update_energy(e, loose, False, True, False).energy == pytest.approx(100.0 - P.decay + P.chain_reward)


def test_energy_floor():
    assert update_energy(EnergyState(0.5), P, True, False, False).energy == 0.0


# ----------------------------------------------------------- population, tabu

def test_tabu_rejects_identical_genome(minimal):
    tabu = TabuList(5, 1.0, COEFFS)
    tabu.push(minimal)
    assert not tabu.approves(minimal)


def test_tabu_is_bounded(registry, rng):
    tabu = TabuList(3, 1.0, COEFFS)
    for _ in range(10):
        tabu.push(minimal_genome(registry, rng))
    assert len(tabu) == 3


def test_population_replaces_worst_when_full(registry, rng):
    pop = InternalPopulation(3, 3.0, COEFFS)
    for i, f in enumerate([5.0, 1.0, 9.0]):
        pop.add(keyed(minimal_genome(registry, rng), f"g{i}", f))
    assert not pop.accepts(0.5)
    assert pop.accepts(2.0)
    evicted = pop.add(keyed(minimal_genome(registry, rng), "new", 2.0))
    assert evicted == "g1"
    assert len(pop) == 3 and "new" in pop
    assert sum(len(sp.members) for sp in pop.species) == 3


def test_every_member_in_exactly_one_species(registry):
    rng = random.Random(6)
    pop = InternalPopulation(40, 3.0, COEFFS)
    g = minimal_genome(registry, rng)
    for i in range(60):
        g = neat.mutate(g, registry, rng, NeatParams(p_add_node=0.5, p_add_connection=0.5))
        pop.add(keyed(g, f"k{i}", rng.random()))
        members = [k for sp in pop.species for k in sp.members]
        assert sorted(members) == sorted(pop.genomes)
        assert len(pop) <= 40


def disjoint_genome(offset):
    """Interface-only genome whose connections carry private innovation ids."""
    base = minimal_genome(InnovationRegistry(), random.Random(offset))
    return Genome(base.nodes, tuple(ConnectionGene(c.innovation + offset, c.src, c.dst, c.weight)
                                    for c in base.connections))


def test_species_roulette_matches_fitness_shares():
    pop = InternalPopulation(40, 3.0, COEFFS)
    fitness = {0: [10.0, 30.0], 100: [50.0], 200: [5.0, 5.0, 20.0]}
    for offset, values in fitness.items():
        for j, f in enumerate(values):
            pop.add(keyed(disjoint_genome(offset), f"s{offset}-{j}", f))
    assert len(pop.species) == 3
    means = [pop.species_fitness(sp) for sp in pop.species]
    expected = [m / sum(means) for m in means]
    rng = random.Random(0)
    counts = [0, 0, 0]
    draws = 100_000
    index = {id(sp): i for i, sp in enumerate(pop.species)}
    for _ in range(draws):
        counts[index[id(select_species(pop, rng))]] += 1
    for c, e in zip(counts, expected):
        assert abs(c / draws - e) <= 0.02


def test_offspring_of_single_genome_is_mutated_clone(registry, rng):
    pop = InternalPopulation(40, 3.0, COEFFS)
    parent = keyed(minimal_genome(registry, rng), "p", 50.0)
    pop.add(parent)
    tabu = TabuList(40, 1.0, COEFFS)
    child, parents = generate_offspring(pop, parent, registry, rng, tabu, NeatParams(), P)
    assert parents == ["p"]
    assert {c.key for c in child.connections} >= {c.key for c in parent.connections if c.innovation < 16}
    assert neat.genome_violations(child) == []


def test_no_crossover_means_structure_from_one_parent(registry):
    rng = random.Random(21)
    pop = InternalPopulation(40, 3.0, COEFFS)
    a = keyed(neat.add_node(minimal_genome(registry, rng), registry, rng), "a", 10.0)
    b = keyed(minimal_genome(registry, rng), "b", 5.0)
    pop.add(a)
    pop.add(b)
    params = replace(P, p_crossover=0.0)
    no_struct = NeatParams(p_add_connection=0.0, p_add_node=0.0)
    for _ in range(20):
        child, parents = generate_offspring(pop, a, registry, rng, TabuList(40, 1.0, COEFFS), no_struct, params)
        assert child.topology() in (a.topology(), b.topology())


def test_empty_population_mutates_current(registry, rng):
    pop = InternalPopulation(40, 3.0, COEFFS)
    current = keyed(minimal_genome(registry, rng), "cur", 1.0)
    child, parents = generate_offspring(pop, current, registry, rng, TabuList(40, 1.0, COEFFS), NeatParams(), P)
    assert parents == ["cur"]
    assert child.gene_weights != current.gene_weights


# ----------------------------------------------------------------------- agent

def idle(agent, steps, start=1):
    sent = []
    for t in range(start, start + steps):
        if agent.begin_step(t, []) is not None:
            sent.append(agent.energy.age_steps)
        agent.end_step(False, False, False)
    return sent


def test_broadcast_on_age_multiples():
    agent = OdNeatAgent(0, 1)
    assert idle(agent, 200) == [0, 50, 100, 150]


def test_maturation_guard():
    agent = OdNeatAgent(0, 1, od_params=replace(P, maturation_steps=50))
    first = agent.genome.key
    for _ in range(49):
        agent.energy = replace(agent.energy, energy=0.0)
        assert not agent.end_step(True, False, False)
    assert agent.genome.key == first


def test_replacement_after_maturation():
    agent = OdNeatAgent(0, 1, od_params=replace(P, maturation_steps=10))
    first = agent.genome
    for _ in range(9):
        agent.end_step(False, False, False)
    agent.energy = replace(agent.energy, energy=0.5)
    assert agent.end_step(True, False, False)
    assert agent.genome.key != first.key
    assert agent.energy.energy == P.initial_energy and agent.energy.age_steps == 0
    assert len(agent.tabu) == 1
    assert agent.replacements == 1


def test_retired_fitness_is_mean_energy():
    agent = OdNeatAgent(0, 1, od_params=replace(P, maturation_steps=4, crash_penalty=40.0))
    log = []
    agent.log = log
    for _ in range(3):
        agent.end_step(True, False, False)  # 100 -> 59.99 -> 19.98 -> 0
    agent.end_step(True, False, False)
    retire = next(ev for ev in log if ev["event"] == "retire")
    energies = [100 - 40.01, 100 - 2 * 40.01, 0.0, 0.0]
    assert retire["fitness"] == pytest.approx(sum(energies) / 4)


def test_inbox_tabu_and_population_paths():
    log = []
    agent = OdNeatAgent(0, 1, od_params=replace(P, population_capacity=1), log=log)
    twin = keyed(agent.genome, "r5-g0", 10.0)
    agent.tabu.push(agent.genome)
    agent.begin_step(1, [Message(5, twin)])
    assert log[-1]["event"] == "reject" and log[-1]["reason"] == "tabu"

    other = keyed(disjoint_genome(300), "r6-g0", 80.0)
    other2 = keyed(disjoint_genome(500), "r7-g0", 20.0)
    agent.begin_step(2, [Message(7, other2), Message(6, other)])
    accepted = [ev["genome"] for ev in log if ev["event"] == "accept"]
    assert accepted == ["r6-g0"]  # lower sender id first; the second loses on fitness
    assert log[-1]["reason"] == "population"
    assert len(agent.population) == 1


def test_malformed_genome_dropped():
    agent = OdNeatAgent(0, 1, log=[])
    bad = Genome(agent.genome.nodes, agent.genome.connections + (ConnectionGene(999, 8, 0, 1.0),), key="r9-g0")
    agent.begin_step(1, [Message(9, bad), Message(9, "garbage")])
    assert agent.dropped == 2
    assert len(agent.population) == 0


def test_offspring_respects_tabu_unless_exhausted():
    params = replace(P, maturation_steps=1, crash_penalty=200.0)
    agent = OdNeatAgent(0, 3, od_params=params)
    verdicts = []
    original = agent.tabu.approves

    def record(genome):
        ok = original(genome)
        verdicts.append(ok)
        return ok

    agent.tabu.approves = record
    for _ in range(100):
        verdicts.clear()
        assert agent.end_step(True, False, False)
        assert verdicts[-1] or (len(verdicts) == params.offspring_retries and not any(verdicts))
    assert agent.replacements == 100
    assert len(agent.tabu) == params.tabu_capacity


def test_population_and_tabu_bounds_in_run():
    cfg = SimConfig().with_overrides({"controller.kind": "odneat", "world.n_robots": 10,
                                      "odneat.maturation_steps": 20, "odneat.population_capacity": 5,
                                      "odneat.tabu_capacity": 4, "world.max_steps": 400})
    sim = Simulation(cfg, 4)
    for _ in range(400):
        sim.step()
        for agent in sim.agents:
            assert len(agent.population) <= 5 and len(agent.tabu) <= 4
            assert agent.genome is not None


# ----------------------------------------------------------------------- audit

def test_audit_clean_on_run():
    cfg = SimConfig().with_overrides({"controller.kind": "odneat", "world.n_robots": 10,
                                      "odneat.maturation_steps": 30, "world.max_steps": 600})
    sim = Simulation(cfg, 8, events=True)
    sim.run()
    kinds = {ev["event"] for ev in sim.events}
    assert {"deploy", "offspring", "retire", "accept"} <= kinds
    assert audit_events(sim.events) == []


def test_audit_flags_foreign_deployment():
    events = [
        {"step": 0, "robot": 0, "event": "deploy", "genome": "r0-g0", "source": "init", "parents": []},
        {"step": 5, "robot": 0, "event": "offspring", "genome": "r0-g1", "parents": ["r3-g2"]},
        {"step": 5, "robot": 0, "event": "deploy", "genome": "r3-g4", "source": "offspring", "parents": []},
    ]
    problems = audit_events(events)
    assert any("unknown parent" in p for p in problems)
    assert any("never bred" in p for p in problems)

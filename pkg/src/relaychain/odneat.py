"""Per-robot online, decentralized NEAT.

Each robot owns an `OdNeatAgent`: one deployed genome, a virtual energy level,
a speciated internal population, a tabu list of retired controllers and its own
innovation registry. The only way genetic material crosses between robots is
the inbox/outbox message path driven by the simulator.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import neat
from .config import NeatParams, OdNeatParams
from .neat import Genome, GenomeError, InnovationRegistry


@dataclass(frozen=True)
class EnergyState:
    energy: float
    age_steps: int = 0
    maturation_steps: int = 500


@dataclass(frozen=True)
class Message:
    sender: int
    genome: Genome


def update_energy(state: EnergyState, params: OdNeatParams, collided: bool, on_lhr: bool,
                  in_optimal_range: bool) -> EnergyState:
    """Apply one step of decay, crash penalty and chain reward; ages by one step."""
    delta = -params.decay
    if collided:
        delta -= params.crash_penalty
    if on_lhr and (in_optimal_range or not params.chain_reward_needs_range):
        delta += params.chain_reward
    energy = min(max(state.energy + delta, 0.0), params.max_energy)
    return EnergyState(energy, state.age_steps + 1, state.maturation_steps)


@dataclass
class Species:
    representative: Genome
    members: list[str] = field(default_factory=list)


class InternalPopulation:
    """Bounded genome pool with fitness estimates, partitioned into species."""

    def __init__(self, capacity: int, threshold: float, coeffs: tuple[float, float, float]):
        self.capacity = capacity
        self.threshold = threshold
        self.coeffs = coeffs
        self.genomes: dict[str, Genome] = {}
        self.fitness: dict[str, float] = {}
        self.species: list[Species] = []

    def __len__(self) -> int:
        return len(self.genomes)

    def __contains__(self, key: str) -> bool:
        return key in self.genomes

    def worst_key(self) -> Optional[str]:
        if not self.genomes:
            return None
        # lowest fitness; oldest entry on ties
        return min(self.genomes, key=lambda k: self.fitness[k])

    def accepts(self, fitness: float) -> bool:
        if len(self.genomes) < self.capacity:
            return True
        return fitness > self.fitness[self.worst_key()]

    def add(self, genome: Genome) -> Optional[str]:
        """Insert ``genome`` (evicting the worst member when full); returns the
        evicted key, if any."""
        evicted = None
        if len(self.genomes) >= self.capacity:
            evicted = self.worst_key()
            self.remove(evicted)
        self.genomes[genome.key] = genome
        self.fitness[genome.key] = genome.fitness
        self._assign(genome)
        return evicted

    def remove(self, key: str) -> None:
        del self.genomes[key]
        del self.fitness[key]
        for sp in self.species:
            if key in sp.members:
                sp.members.remove(key)
        self.species = [sp for sp in self.species if sp.members]

    def update_fitness(self, key: str, fitness: float) -> None:
        self.fitness[key] = fitness

    def _assign(self, genome: Genome) -> None:
        for sp in self.species:
            if neat.compatibility(genome, sp.representative, *self.coeffs) < self.threshold:
                sp.members.append(genome.key)
                return
        self.species.append(Species(genome, [genome.key]))

    def species_fitness(self, sp: Species) -> float:
        return sum(self.fitness[k] for k in sp.members) / len(sp.members)

    def member(self, key: str) -> Genome:
        return self.genomes[key].with_fitness(self.fitness[key])


class TabuList:
    """FIFO memory of retired controllers; rejects genomes too close to any."""

    def __init__(self, capacity: int, threshold: float, coeffs: tuple[float, float, float]):
        self.entries: deque[Genome] = deque(maxlen=capacity)
        self.threshold = threshold
        self.coeffs = coeffs
        self.version = 0

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, genome: Genome) -> None:
        self.entries.append(genome)
        self.version += 1

    def approves(self, genome: Genome) -> bool:
        return all(neat.compatibility(genome, e, *self.coeffs) >= self.threshold for e in self.entries)


def _roulette(weights: list[float], rng: random.Random) -> int:
    total = sum(weights)
    if total <= 0:
        return rng.randrange(len(weights))
    pick = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if pick < acc:
            return i
    return len(weights) - 1


def select_species(pop: InternalPopulation, rng: random.Random) -> Species:
    """Fitness-proportionate choice over species mean fitness."""
    return pop.species[_roulette([pop.species_fitness(sp) for sp in pop.species], rng)]


def select_parents(pop: InternalPopulation, sp: Species, rng: random.Random) -> list[Genome]:
    keys = list(sp.members)
    first = keys.pop(_roulette([pop.fitness[k] for k in keys], rng))
    parents = [pop.member(first)]
    if keys:
        parents.append(pop.member(keys[_roulette([pop.fitness[k] for k in keys], rng)]))
    return parents


def generate_offspring(pop: InternalPopulation, current: Genome, registry: InnovationRegistry,
                       rng: random.Random, tabu: TabuList, neat_params: NeatParams,
                       od_params: OdNeatParams) -> tuple[Genome, list[str]]:
    """Breed one candidate controller; returns it with its parent keys.

    Candidates rejected by the tabu list are redrawn up to
    ``offspring_retries`` times, after which the last one is used anyway.
    """
    child, parent_keys = current, [current.key]
    for _ in range(od_params.offspring_retries):
        if not pop.species:
            parents = [current]
        else:
            parents = select_parents(pop, select_species(pop, rng), rng)
        if len(parents) == 2 and rng.random() < od_params.p_crossover:
            base = neat.crossover(parents[0], parents[1], rng, neat_params.p_reenable)
        else:
            base = max(parents, key=lambda g: g.fitness)
        child = neat.mutate(base, registry, rng, neat_params)
        parent_keys = [p.key for p in parents]
        if tabu.approves(child):
            break
    return child, parent_keys


class OdNeatAgent:
    """odNEAT state and loop body for one robot.

    The simulator drives three phases per step: `begin_step` (broadcast and
    inbox admission), the controller acting on the deployed `genome`, then
    `end_step` (energy update and replacement check).
    """

    def __init__(self, robot_id: int, seed: int, neat_params: NeatParams | None = None,
                 od_params: OdNeatParams | None = None, log: Optional[list] = None):
        self.id = robot_id
        self.neat_params = neat_params or NeatParams()
        self.params = od_params or OdNeatParams()
        self.rng = random.Random(seed)
        self.registry = InnovationRegistry()
        coeffs = (self.neat_params.c1, self.neat_params.c2, self.neat_params.c3)
        self.population = InternalPopulation(self.params.population_capacity, self.params.species_threshold, coeffs)
        self.tabu = TabuList(self.params.tabu_capacity, self.params.tabu_threshold, coeffs)
        self.log = log
        self.replacements = 0
        self.dropped = 0
        self._serial = 0
        self._tabu_verdicts: dict[str, tuple[int, bool]] = {}
        self._validated: set[str] = set()
        self.step = 0
        genome = neat.minimal_genome(self.registry, self.rng, self.neat_params.use_bias,
                                     owner=robot_id, key=self._next_key())
        self._deploy(genome, "init", [])

    def _next_key(self) -> str:
        key = f"r{self.id}-g{self._serial}"
        self._serial += 1
        return key

    def _emit(self, event: str, **fields) -> None:
        if self.log is not None:
            self.log.append({"step": self.step, "robot": self.id, "event": event, **fields})

    def _deploy(self, genome: Genome, source: str, parents: list[str]) -> None:
        self.genome = genome
        self.energy = EnergyState(self.params.initial_energy, 0, self.params.maturation_steps)
        self._energy_sum = 0.0
        self._emit("deploy", genome=genome.key, source=source, parents=parents,
                   nodes=len(genome.nodes), connections=len(genome.connections))

    def fitness_estimate(self) -> float:
        """Mean energy over the current deployment so far."""
        if self.energy.age_steps == 0:
            return self.energy.energy
        return self._energy_sum / self.energy.age_steps

    # ------------------------------------------------------------ step phases

    def begin_step(self, step: int, inbox: list[Message]) -> Optional[Genome]:
        """Admit received genomes; return the genome to broadcast, if due."""
        self.step = step
        for msg in sorted(inbox, key=lambda m: m.sender):
            self._receive(msg)
        if self.energy.age_steps % self.params.broadcast_period == 0:
            return self.genome.with_fitness(self.fitness_estimate())
        return None

    def _receive(self, msg: Message) -> None:
        genome = msg.genome
        if isinstance(genome, Genome) and genome.key in self.population:
            # rebroadcast of a genome already held: refresh its fitness estimate
            self.population.update_fitness(genome.key, genome.fitness)
            return
        try:
            if not isinstance(genome, Genome):
                raise GenomeError("not a genome")
            if genome.key not in self._validated:
                neat.check_genome(genome)
                self._validated.add(genome.key)
        except GenomeError as exc:
            self.dropped += 1
            self._emit("reject", genome=getattr(genome, "key", None), sender=msg.sender, reason=f"malformed: {exc}")
            return
        if not self._tabu_approves(genome):
            self._emit("reject", genome=genome.key, sender=msg.sender, reason="tabu")
            return
        if not self.population.accepts(genome.fitness):
            self._emit("reject", genome=genome.key, sender=msg.sender, reason="population")
            return
        self.registry.absorb(genome)
        evicted = self.population.add(genome)
        self._emit("accept", genome=genome.key, sender=msg.sender, fitness=genome.fitness, evicted=evicted)

    def _tabu_approves(self, genome: Genome) -> bool:
        cached = self._tabu_verdicts.get(genome.key)
        if cached is not None and cached[0] == self.tabu.version:
            return cached[1]
        verdict = self.tabu.approves(genome)
        self._tabu_verdicts[genome.key] = (self.tabu.version, verdict)
        return verdict

    def end_step(self, collided: bool, on_lhr: bool, in_optimal_range: bool) -> bool:
        """Update energy; replace the controller when exhausted and mature.
        Returns True when a replacement happened."""
        self.energy = update_energy(self.energy, self.params, collided, on_lhr, in_optimal_range)
        self._energy_sum += self.energy.energy
        return self.maybe_replace()

    def maybe_replace(self) -> bool:
        e = self.energy
        if e.energy > self.params.min_energy_threshold or e.age_steps < e.maturation_steps:
            return False
        retired = self.genome.with_fitness(self.fitness_estimate())
        self.tabu.push(retired)
        self._emit("retire", genome=retired.key, fitness=retired.fitness, age=e.age_steps)
        self._emit("tabu_insert", genome=retired.key)
        if self.population.accepts(retired.fitness):
            self.population.add(retired)
        child, parents = generate_offspring(self.population, retired, self.registry, self.rng,
                                            self.tabu, self.neat_params, self.params)
        child = Genome(child.nodes, child.connections, 0.0, self.id, self._next_key())
        self._emit("offspring", genome=child.key, parents=parents)
        self.replacements += 1
        self._deploy(child, "offspring", parents)
        return True


def audit_events(events: list[dict]) -> list[str]:
    """Check that every deployed genome traces to local initialization or local
    breeding from genomes the robot itself held or accepted via its inbox.

    Returns human-readable violations (empty when the log is clean).
    """
    known: dict[int, set[str]] = {}
    bred: dict[int, set[str]] = {}
    violations = []
    for ev in events:
        robot = ev["robot"]
        seen = known.setdefault(robot, set())
        mine = bred.setdefault(robot, set())
        kind = ev["event"]
        if kind == "accept":
            seen.add(ev["genome"])
        elif kind == "offspring":
            for parent in ev["parents"]:
                if parent not in seen:
                    violations.append(f"robot {robot} bred {ev['genome']} from unknown parent {parent}")
            if not ev["genome"].startswith(f"r{robot}-"):
                violations.append(f"robot {robot} bred a genome under a foreign key {ev['genome']}")
            mine.add(ev["genome"])
        elif kind == "deploy":
            key = ev["genome"]
            if ev["source"] == "init":
                if key != f"r{robot}-g0" or seen:
                    violations.append(f"robot {robot} initial deployment {key} is not its first genome")
            elif ev["source"] == "offspring":
                if key not in mine:
                    violations.append(f"robot {robot} deployed {key} that it never bred")
            elif key not in seen:
                violations.append(f"robot {robot} deployed {key} of unknown origin")
            seen.add(key)
    return violations

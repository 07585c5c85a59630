"""NEAT genomes: encoding, innovation bookkeeping, variation and evaluation.

Node ids are fixed for the interface: inputs 0-6 (five front then two back
proximity sensors), outputs 7 (left wheel) and 8 (right wheel), bias 9.
Hidden nodes get ids from an `InnovationRegistry` starting at 10.

Genomes are immutable; every variation operator returns a new genome.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .config import NeatParams

INPUT, OUTPUT, HIDDEN, BIAS = "input", "output", "hidden", "bias"
N_INPUTS = 7
N_OUTPUTS = 2
INPUT_IDS = tuple(range(N_INPUTS))
OUTPUT_IDS = (7, 8)
BIAS_ID = 9
FIRST_HIDDEN_ID = 10
SIGMOID_SLOPE = 4.9
FORMAT_NAME = "relaychain-genome"
FORMAT_VERSION = 1


class GenomeError(ValueError):
    """A genome violates a structural invariant or cannot be decoded."""


@dataclass(frozen=True)
class NodeGene:
    id: int
    kind: str


@dataclass(frozen=True)
class ConnectionGene:
    innovation: int
    src: int
    dst: int
    weight: float
    enabled: bool = True

    @property
    def key(self) -> tuple[int, int, int]:
        # innovation ids are assigned per robot, so structure disambiguates
        return (self.innovation, self.src, self.dst)


@dataclass(frozen=True)
class Genome:
    nodes: tuple[NodeGene, ...]
    connections: tuple[ConnectionGene, ...]
    fitness: float = 0.0
    owner: int = -1
    key: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "connections", tuple(sorted(self.connections, key=lambda c: c.innovation)))

    @cached_property
    def node_kinds(self) -> dict[int, str]:
        return {n.id: n.kind for n in self.nodes}

    @cached_property
    def gene_weights(self) -> dict[tuple[int, int, int], float]:
        return {c.key: c.weight for c in self.connections}

    @cached_property
    def max_innovation(self) -> int:
        return self.connections[-1].innovation if self.connections else -1

    @cached_property
    def _plan(self) -> tuple[tuple[int, tuple[tuple[int, float], ...]], ...]:
        incoming: dict[int, list[tuple[int, float]]] = {n.id: [] for n in self.nodes}
        for c in self.connections:
            if c.enabled:
                incoming[c.dst].append((c.src, c.weight))
        order = topological_order(self.nodes, [(c.src, c.dst) for c in self.connections if c.enabled])
        kinds = self.node_kinds
        return tuple((nid, tuple(incoming[nid])) for nid in order if kinds[nid] in (HIDDEN, OUTPUT))

    @property
    def n_hidden(self) -> int:
        return sum(1 for n in self.nodes if n.kind == HIDDEN)

    @property
    def n_enabled(self) -> int:
        return sum(1 for c in self.connections if c.enabled)

    def topology(self) -> tuple:
        """Structure without weights, for comparing shapes."""
        return (tuple((n.id, n.kind) for n in self.nodes),
                tuple((c.innovation, c.src, c.dst, c.enabled) for c in self.connections))

    def with_fitness(self, fitness: float) -> "Genome":
        return replace(self, fitness=float(fitness))


def topological_order(nodes: Iterable[NodeGene], edges: Iterable[tuple[int, int]]) -> list[int]:
    """Kahn's algorithm with ties broken by node id. Raises on a cycle."""
    ids = sorted(n.id for n in nodes)
    indeg = {i: 0 for i in ids}
    out: dict[int, list[int]] = {i: [] for i in ids}
    for s, d in edges:
        out[s].append(d)
        indeg[d] += 1
    ready = sorted(i for i in ids if indeg[i] == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for d in out[node]:
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
        ready.sort()
    if len(order) != len(ids):
        raise GenomeError("connection graph contains a cycle")
    return order


class InnovationRegistry:
    """Historical markings for one robot.

    The same structural change (a new connection ``src -> dst`` or splitting
    ``src -> dst`` with a hidden node) always maps to the same id for the
    lifetime of the registry.
    """

    def __init__(self):
        self._connections: dict[tuple[int, int], int] = {}
        self._splits: dict[tuple[int, int], int] = {}
        self.next_innovation = 0
        self.next_node = FIRST_HIDDEN_ID

    def connection(self, src: int, dst: int) -> int:
        key = (src, dst)
        if key not in self._connections:
            self._connections[key] = self.next_innovation
            self.next_innovation += 1
        return self._connections[key]

    def split_node(self, src: int, dst: int) -> int:
        key = (src, dst)
        if key not in self._splits:
            self._splits[key] = self.fresh_node()
        return self._splits[key]

    def fresh_innovation(self) -> int:
        self.next_innovation += 1
        return self.next_innovation - 1

    def fresh_node(self) -> int:
        self.next_node += 1
        return self.next_node - 1

    def absorb(self, genome: Genome) -> None:
        """Learn the markings carried by a genome received from another robot,
        so later local ids do not reuse them."""
        for c in genome.connections:
            self._connections.setdefault((c.src, c.dst), c.innovation)
            self.next_innovation = max(self.next_innovation, c.innovation + 1)
        for n in genome.nodes:
            if n.kind == HIDDEN:
                self.next_node = max(self.next_node, n.id + 1)


# --------------------------------------------------------------- construction

def minimal_genome(registry: InnovationRegistry, rng: random.Random, use_bias: bool = True,
                   owner: int = -1, key: str = "") -> Genome:
    """Inputs (and bias) fully connected to both outputs, weights U(-1, 1)."""
    nodes = [NodeGene(i, INPUT) for i in INPUT_IDS] + [NodeGene(o, OUTPUT) for o in OUTPUT_IDS]
    sources = list(INPUT_IDS)
    if use_bias:
        nodes.append(NodeGene(BIAS_ID, BIAS))
        sources.append(BIAS_ID)
    conns = [ConnectionGene(registry.connection(s, d), s, d, rng.uniform(-1.0, 1.0))
             for s in sources for d in OUTPUT_IDS]
    return Genome(tuple(nodes), tuple(conns), owner=owner, key=key)


# ----------------------------------------------------------------- evaluation

def sigmoid(x: float) -> float:
    z = SIGMOID_SLOPE * x
    if z < -60.0:
        return 1.0 / (1.0 + math.exp(60.0))
    return 1.0 / (1.0 + math.exp(-z))


def activate(genome: Genome, inputs: Sequence[float]) -> tuple[float, float]:
    """Feed-forward pass; returns the (left, right) output activations."""
    values = dict(zip(INPUT_IDS, inputs))
    values[BIAS_ID] = 1.0
    for nid, incoming in genome._plan:
        total = 0.0
        for src, w in incoming:
            total += values[src] * w
        values[nid] = sigmoid(total)
    return values[OUTPUT_IDS[0]], values[OUTPUT_IDS[1]]


# ------------------------------------------------------------------ variation

def _clamp(w: float, limit: float) -> float:
    return max(-limit, min(limit, w))


def _reaches(edges: Iterable[tuple[int, int]], start: int, target: int) -> bool:
    out: dict[int, list[int]] = {}
    for s, d in edges:
        out.setdefault(s, []).append(d)
    stack, seen = [start], {start}
    while stack:
        node = stack.pop()
        if node == target:
            return True
        for nxt in out.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _free_innovation(registry: InnovationRegistry, genome_ids: set[int], src: int, dst: int) -> int:
    innov = registry.connection(src, dst)
    if innov in genome_ids:
        innov = registry.fresh_innovation()
    return innov


def mutate_weights(genome: Genome, rng: random.Random, params: NeatParams) -> Genome:
    conns = []
    for c in genome.connections:
        u = rng.random()
        if u < params.p_weight_perturb:
            c = replace(c, weight=_clamp(c.weight + rng.gauss(0.0, params.weight_sigma), params.weight_limit))
        elif u < params.p_weight_perturb + params.p_weight_reset:
            c = replace(c, weight=rng.uniform(-1.0, 1.0))
        conns.append(c)
    return replace(genome, connections=tuple(conns))


def add_connection(genome: Genome, registry: InnovationRegistry, rng: random.Random,
                   attempts: int = 20) -> Genome:
    """Add one random new feed-forward connection; unchanged if none found."""
    kinds = genome.node_kinds
    sources = [n for n, k in kinds.items() if k in (INPUT, BIAS, HIDDEN)]
    targets = [n for n, k in kinds.items() if k in (HIDDEN, OUTPUT)]
    existing = {(c.src, c.dst) for c in genome.connections}
    edges = list(existing)
    for _ in range(attempts):
        src, dst = rng.choice(sources), rng.choice(targets)
        if src == dst or (src, dst) in existing or _reaches(edges, dst, src):
            continue
        innov = _free_innovation(registry, {c.innovation for c in genome.connections}, src, dst)
        gene = ConnectionGene(innov, src, dst, rng.uniform(-1.0, 1.0))
        return replace(genome, connections=genome.connections + (gene,))
    return genome


def add_node(genome: Genome, registry: InnovationRegistry, rng: random.Random) -> Genome:
    """Split a random enabled connection with a new hidden node.

    The old connection is disabled; the incoming half gets weight 1.0 and the
    outgoing half keeps the old weight.
    """
    enabled = [c for c in genome.connections if c.enabled]
    if not enabled:
        return genome
    old = rng.choice(enabled)
    node_id = registry.split_node(old.src, old.dst)
    if node_id in genome.node_kinds:
        node_id = registry.fresh_node()
    ids = {c.innovation for c in genome.connections}
    first = ConnectionGene(_free_innovation(registry, ids, old.src, node_id), old.src, node_id, 1.0)
    ids.add(first.innovation)
    second = ConnectionGene(_free_innovation(registry, ids, node_id, old.dst), node_id, old.dst, old.weight)
    conns = tuple(replace(c, enabled=False) if c is old else c for c in genome.connections)
    return replace(genome, nodes=genome.nodes + (NodeGene(node_id, HIDDEN),),
                   connections=conns + (first, second))


def mutate(genome: Genome, registry: InnovationRegistry, rng: random.Random,
           params: Optional[NeatParams] = None) -> Genome:
    params = params or NeatParams()
    child = mutate_weights(genome, rng, params)
    if rng.random() < params.p_add_connection:
        child = add_connection(child, registry, rng, params.add_connection_attempts)
    if rng.random() < params.p_add_node:
        child = add_node(child, registry, rng)
    return child


def crossover(a: Genome, b: Genome, rng: random.Random, p_reenable: float = 0.25) -> Genome:
    """Align by historical marking; the child has the fitter parent's structure.

    Matching genes take either parent's weight with equal odds. Disjoint and
    excess genes come from the fitter parent (``a`` on ties). A gene disabled
    in either parent is enabled in the child with probability ``p_reenable``.
    """
    fit, other = (a, b) if a.fitness >= b.fitness else (b, a)
    other_genes = {c.key: c for c in other.connections}
    conns = []
    for c in fit.connections:
        match = other_genes.get(c.key)
        weight = c.weight
        disabled = not c.enabled
        if match is not None:
            if rng.random() < 0.5:
                weight = match.weight
            disabled = disabled or not match.enabled
        enabled = (rng.random() < p_reenable) if disabled else True
        conns.append(ConnectionGene(c.innovation, c.src, c.dst, weight, enabled))
    return Genome(fit.nodes, tuple(conns), fitness=0.0, owner=fit.owner)


def compatibility(a: Genome, b: Genome, c1: float = 1.0, c2: float = 1.0, c3: float = 0.4) -> float:
    """NEAT distance (c1*E + c2*D)/N + c3*mean|dw| over matching genes."""
    wa, wb = a.gene_weights, b.gene_weights
    max_a, max_b = a.max_innovation, b.max_innovation
    excess = disjoint = 0
    diff = 0.0
    matching = 0
    for key, w in wa.items():
        other = wb.get(key)
        if other is not None:
            matching += 1
            diff += abs(w - other)
        elif key[0] > max_b:
            excess += 1
        else:
            disjoint += 1
    for key in wb:
        if key not in wa:
            if key[0] > max_a:
                excess += 1
            else:
                disjoint += 1
    size = max(len(wa), len(wb))
    norm = 1 if size < 20 else size
    mean_diff = diff / matching if matching else 0.0
    return (c1 * excess + c2 * disjoint) / norm + c3 * mean_diff


# ----------------------------------------------------------------- invariants

def genome_violations(genome: Genome, require_bias: Optional[bool] = None) -> list[str]:
    """Return a list of broken invariants (empty when the genome is valid)."""
    problems = []
    kinds: dict[int, str] = {}
    for n in genome.nodes:
        if n.id in kinds:
            problems.append(f"duplicate node id {n.id}")
        kinds[n.id] = n.kind
    if sorted(i for i, k in kinds.items() if k == INPUT) != list(INPUT_IDS):
        problems.append("input nodes must be exactly 0-6")
    if sorted(i for i, k in kinds.items() if k == OUTPUT) != list(OUTPUT_IDS):
        problems.append("output nodes must be exactly 7-8")
    bias = [i for i, k in kinds.items() if k == BIAS]
    if bias not in ([], [BIAS_ID]) or (require_bias is True and not bias) or (require_bias is False and bias):
        problems.append("bias node must be absent or id 9")
    for i, k in kinds.items():
        if k not in (INPUT, OUTPUT, HIDDEN, BIAS):
            problems.append(f"node {i} has unknown kind {k!r}")
        if k == HIDDEN and i < FIRST_HIDDEN_ID:
            problems.append(f"hidden node {i} uses a reserved id")
    seen_innov: set[int] = set()
    seen_pairs: set[tuple[int, int]] = set()
    for c in genome.connections:
        if c.innovation in seen_innov:
            problems.append(f"duplicate innovation {c.innovation}")
        seen_innov.add(c.innovation)
        if (c.src, c.dst) in seen_pairs:
            problems.append(f"duplicate connection {c.src}->{c.dst}")
        seen_pairs.add((c.src, c.dst))
        if c.src not in kinds or c.dst not in kinds:
            problems.append(f"connection {c.innovation} references a missing node")
            continue
        if kinds[c.dst] in (INPUT, BIAS):
            problems.append(f"connection {c.innovation} feeds into {kinds[c.dst]} node {c.dst}")
        if not (isinstance(c.weight, float) and math.isfinite(c.weight)):
            problems.append(f"connection {c.innovation} has non-finite weight")
    if not problems:
        try:
            topological_order(genome.nodes, [(c.src, c.dst) for c in genome.connections])
        except GenomeError:
            problems.append("connection graph contains a cycle")
    return problems


def check_genome(genome: Genome) -> Genome:
    problems = genome_violations(genome)
    if problems:
        raise GenomeError("; ".join(problems))
    return genome


# -------------------------------------------------------------- serialization

def genome_to_dict(genome: Genome) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "key": genome.key,
        "owner": genome.owner,
        "fitness": genome.fitness,
        "nodes": [[n.id, n.kind] for n in genome.nodes],
        "connections": [[c.innovation, c.src, c.dst, c.weight, c.enabled] for c in genome.connections],
    }


def genome_from_dict(data: dict) -> Genome:
    try:
        if data.get("format") != FORMAT_NAME or data.get("version") != FORMAT_VERSION:
            raise GenomeError(f"unsupported genome format {data.get('format')!r} v{data.get('version')!r}")
        nodes = tuple(NodeGene(int(i), str(k)) for i, k in data["nodes"])
        conns = tuple(ConnectionGene(int(n), int(s), int(d), float(w), bool(e))
                      for n, s, d, w, e in data["connections"])
        genome = Genome(nodes, conns, float(data["fitness"]), int(data["owner"]), str(data["key"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GenomeError):
            raise
        raise GenomeError(f"malformed genome record: {exc}") from None
    return check_genome(genome)


def dumps(genome: Genome) -> str:
    """Canonical, byte-stable JSON text for a genome."""
    return json.dumps(genome_to_dict(genome), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> Genome:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GenomeError(f"malformed genome text: {exc}") from None
    return genome_from_dict(data)

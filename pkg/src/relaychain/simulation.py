"""One simulated run: world, connectivity, controllers and (optionally) odNEAT."""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from . import neat
from .arena import World, spawn_world
from .config import SimConfig
from .connectivity import ConnectivityTracker
from .controllers import (ChainView, ControllerKind, WalkState, odneat_controller_step,
                          preprogrammed_step, random_walk_step)
from .odneat import Message, OdNeatAgent
from .seeding import STREAM_ODNEAT, STREAM_WALK, derive_seed


class RunTimeout(RuntimeError):
    """The per-run wall-clock budget ran out."""


@dataclass(frozen=True)
class SnapshotPolicy:
    start: bool = True
    end: bool = True
    every_n_steps: int = 0
    robots: Optional[tuple[int, ...]] = None  # None = every robot


@dataclass(frozen=True)
class TopologySnapshot:
    robot: int
    step: int
    genome: str  # canonical serialized genome

    def to_dict(self) -> dict:
        return {"robot": self.robot, "step": self.step, "genome": self.genome}


@dataclass
class RunResult:
    seed: int
    steps_to_connectivity: int
    connected: bool
    total_distance: float
    replacements: int = 0
    genome_stats: list[tuple[int, int]] = field(default_factory=list)
    speed_clamps: int = 0
    steps_run: int = 0


class Simulation:
    def __init__(self, cfg: SimConfig, seed: int, *, trace: bool = False, events: bool = False,
                 snapshots: Optional[SnapshotPolicy] = None):
        self.cfg = cfg
        self.seed = seed
        self.kind = ControllerKind(cfg.controller.kind)
        self.world: World = spawn_world(cfg.world, seed)
        n = self.world.n
        self.tracker = ConnectivityTracker(n, cfg.r_min, cfg.r_max)
        self.tracker.update(self.world)
        self.trace: Optional[list[dict]] = [self.tracker.trace_record(0)] if trace else None
        self.events: Optional[list[dict]] = [] if events else None
        self.snapshot_policy = snapshots
        self.snapshots: list[TopologySnapshot] = []
        self._snapshot_steps: set[int] = set()
        self.connected_at: Optional[int] = 0 if self.tracker.connected else None

        self.walks = [WalkState(cfg.controller.redraw_period) for _ in range(n)]
        self.rngs = [random.Random(derive_seed(seed, STREAM_WALK, i)) for i in range(n)]
        self.agents: list[OdNeatAgent] = []
        self.inboxes: list[list[Message]] = [[] for _ in range(n)]
        if self.kind is ControllerKind.ODNEAT:
            self.agents = [OdNeatAgent(i, derive_seed(seed, STREAM_ODNEAT, i), cfg.neat, cfg.odneat, self.events)
                           for i in range(n)]
            if snapshots is not None and snapshots.start:
                self._snapshot()
        elif snapshots is not None:
            raise ValueError("topology snapshots need the odneat controller")

    # ------------------------------------------------------------------ views

    def chain_view(self, i: int) -> ChainView:
        chain = self.tracker.chain
        return ChainView(self.tracker.connected, chain.member_flags[i], chain.in_optimal_range_flags[i])

    def _snapshot(self) -> None:
        policy = self.snapshot_policy
        robots = range(self.world.n) if policy.robots is None else policy.robots
        step = self.world.step
        if step in self._snapshot_steps:
            return
        self._snapshot_steps.add(step)
        for i in robots:
            self.snapshots.append(TopologySnapshot(i, step, neat.dumps(self.agents[i].genome)))

    # ------------------------------------------------------------------- step

    def step(self) -> None:
        world = self.world
        t = world.step + 1
        n = world.n
        vmax = self.cfg.world.max_wheel_speed
        left = [0.0] * n
        right = [0.0] * n
        if self.kind is ControllerKind.ODNEAT:
            self._exchange(t)
            readings = world.sense_all().tolist()
            for i, agent in enumerate(self.agents):
                cmd = odneat_controller_step(agent.genome, readings[i], self.chain_view(i), vmax)
                left[i], right[i] = cmd.left, cmd.right
        else:
            policy = random_walk_step if self.kind is ControllerKind.RANDOM_WALK else preprogrammed_step
            turn = self.cfg.controller.turn_mode
            for i in range(n):
                cmd = policy(self.walks[i], self.chain_view(i), t, self.rngs[i], vmax, turn)
                left[i], right[i] = cmd.left, cmd.right

        world.apply_wheels(left, right)
        world.accumulate_distance()
        self.tracker.update(world)

        if self.agents:
            chain = self.tracker.chain
            collided = world.collided.tolist()
            for i, agent in enumerate(self.agents):
                agent.end_step(collided[i], chain.member_flags[i], chain.in_optimal_range_flags[i])
            policy = self.snapshot_policy
            if policy is not None and policy.every_n_steps > 0 and t % policy.every_n_steps == 0:
                self._snapshot()
        if self.trace is not None:
            self.trace.append(self.tracker.trace_record(t))
        if self.connected_at is None and self.tracker.connected:
            self.connected_at = t

    def _exchange(self, t: int) -> None:
        """Broadcast/receive phase. Messages sent this step are delivered at
        the start of the next one."""
        inboxes, self.inboxes = self.inboxes, [[] for _ in range(self.world.n)]
        reach = self.cfg.odneat.broadcast_range
        pos = self.world.pos
        for i, agent in enumerate(self.agents):
            out = agent.begin_step(t, inboxes[i])
            if out is None:
                continue
            for j in range(self.world.n):
                if j == i:
                    continue
                if math.isinf(reach) or math.dist(pos[i], pos[j]) <= reach:
                    self.inboxes[j].append(Message(i, out))

    # -------------------------------------------------------------------- run

    def run(self) -> RunResult:
        cfg = self.cfg
        budget = cfg.run.wall_clock_budget
        started = time.monotonic()
        max_steps = cfg.world.max_steps
        while self.world.step < max_steps:
            if self.connected_at is not None and cfg.run.stop_on_connection:
                break
            self.step()
            if budget > 0 and time.monotonic() - started > budget:
                raise RunTimeout(f"run exceeded {budget} s at step {self.world.step}")
        if self.snapshot_policy is not None and self.snapshot_policy.end:
            self._snapshot()
        return self.result()

    def result(self) -> RunResult:
        connected = self.connected_at is not None
        return RunResult(
            seed=self.seed,
            steps_to_connectivity=self.connected_at if connected else self.cfg.world.max_steps,
            connected=connected,
            total_distance=self.world.total_distance,
            replacements=sum(a.replacements for a in self.agents),
            genome_stats=[(len(a.genome.nodes), len(a.genome.connections)) for a in self.agents],
            speed_clamps=self.world.speed_clamps,
            steps_run=self.world.step,
        )


def run_once(cfg: SimConfig, seed: int, **kwargs) -> RunResult:
    return Simulation(cfg, seed, **kwargs).run()

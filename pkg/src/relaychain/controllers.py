"""The three per-robot controllers: random walk, chain-building, and odNEAT."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from . import neat


class ControllerKind(str, Enum):
    RANDOM_WALK = "random_walk"
    PREPROGRAMMED = "preprogrammed"
    ODNEAT = "odneat"


DIRECTIONS = ("left", "right", "forward", "backward")


@dataclass(frozen=True)
class WheelCommand:
    left: float
    right: float


STOP = WheelCommand(0.0, 0.0)


@dataclass(frozen=True)
class ChainView:
    """What a robot knows about the chain this step."""

    full_connection: bool = False
    on_lhr: bool = False
    in_optimal_range: bool = False


def direction_command(direction: str, v: float, turn_mode: str = "arc") -> WheelCommand:
    if direction == "forward":
        return WheelCommand(v, v)
    if direction == "backward":
        return WheelCommand(-v, -v)
    if turn_mode == "spin":
        return WheelCommand(-v, v) if direction == "left" else WheelCommand(v, -v)
    return WheelCommand(0.0, v) if direction == "left" else WheelCommand(v, 0.0)


class WalkState:
    """Direction held between redraws, one per robot."""

    def __init__(self, redraw_period: int = 10):
        self.redraw_period = redraw_period
        self.direction: Optional[str] = None
        self.last_draw = 0

    def next_direction(self, step: int, rng: random.Random) -> str:
        if self.direction is None or step - self.last_draw >= self.redraw_period:
            self.direction = rng.choice(DIRECTIONS)
            self.last_draw = step
        return self.direction


def random_walk_step(state: WalkState, chain: ChainView, step: int, rng: random.Random,
                     max_speed: float = 0.20, turn_mode: str = "arc") -> WheelCommand:
    if chain.full_connection:
        return STOP
    return direction_command(state.next_direction(step, rng), max_speed, turn_mode)


def preprogrammed_step(state: WalkState, chain: ChainView, step: int, rng: random.Random,
                       max_speed: float = 0.20, turn_mode: str = "arc") -> WheelCommand:
    """Park while part of the longest home route with well-spaced chain
    neighbors; random-walk otherwise."""
    if chain.full_connection:
        return STOP
    if chain.on_lhr and chain.in_optimal_range:
        return STOP
    return direction_command(state.next_direction(step, rng), max_speed, turn_mode)


def outputs_to_wheels(outputs: Sequence[float], max_speed: float = 0.20) -> WheelCommand:
    """Map activations in (0, 1) to wheel speeds in (-max_speed, max_speed);
    output 0 drives the left wheel."""
    return WheelCommand((2.0 * outputs[0] - 1.0) * max_speed, (2.0 * outputs[1] - 1.0) * max_speed)


def odneat_controller_step(genome: neat.Genome, readings: Sequence[float], chain: ChainView,
                           max_speed: float = 0.20) -> WheelCommand:
    if chain.full_connection:
        return STOP
    if chain.on_lhr and chain.in_optimal_range:
        return STOP
    return outputs_to_wheels(neat.activate(genome, readings), max_speed)

import random

import numpy as np
import pytest

from relaychain.arena import World
from relaychain.config import SimConfig, WorldConfig
from relaychain.neat import InnovationRegistry, minimal_genome


def make_world(positions, headings=None, **overrides) -> World:
    """World with robots at explicit positions (default headings 0)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    overrides.setdefault("n_robots", len(positions))
    cfg = WorldConfig(**overrides)
    if headings is None:
        headings = np.zeros(len(positions))
    return World(cfg, positions, headings)


@pytest.fixture
def world_factory():
    return make_world


@pytest.fixture
def registry():
    return InnovationRegistry()


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def minimal(registry, rng):
    return minimal_genome(registry, rng)


@pytest.fixture
def fast_cfg():
    """Default config with a short cutoff for smoke runs."""
    return SimConfig().with_overrides({"world.max_steps": 200})


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

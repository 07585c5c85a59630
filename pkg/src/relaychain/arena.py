"""Walled 2D arena with differential-drive robots and IR proximity rays.

Robot state is kept as structure-of-arrays on `World` so that a whole swarm is
moved and sensed with a handful of numpy operations per step.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, WorldConfig

# front sensors left-to-right, then back-left, back-right (radians, CCW positive)
SENSOR_ANGLES = np.radians([40.0, 20.0, 0.0, -20.0, -40.0, 150.0, -150.0])
N_SENSORS = 7
SPAWN_ATTEMPTS = 2000
_CONTACT_EPS = 1e-9


class PlacementError(ConfigError):
    """Spawn could not place every robot without overlap."""


def wrap_angle(theta):
    """Normalize to [-pi, pi)."""
    return (theta + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class SensorArray:
    readings: tuple[float, ...]
    mount_angles: tuple[float, ...] = tuple(SENSOR_ANGLES.tolist())

    @property
    def front(self) -> tuple[float, ...]:
        return self.readings[:5]

    @property
    def back(self) -> tuple[float, ...]:
        return self.readings[5:]


def integrate_pose(pose: Pose, left: float, right: float, dt: float, wheel_base: float) -> Pose:
    """One explicit Euler step of the unobstructed differential-drive model."""
    v = (left + right) / 2.0
    omega = (right - left) / wheel_base
    return Pose(
        pose.x + v * math.cos(pose.heading) * dt,
        pose.y + v * math.sin(pose.heading) * dt,
        wrap_angle(pose.heading + omega * dt),
    )


class World:
    """Mutable simulation state for one arena and its robots.

    Attributes of interest: ``pos`` (n, 2), ``heading`` (n,), ``collided`` (n,)
    flags from the most recent step, ``distance`` (n,) accumulated path length
    and ``step`` counter.
    """

    def __init__(self, cfg: WorldConfig, positions, headings):
        self.cfg = cfg
        self.n = cfg.n_robots
        self.pos = np.array(positions, dtype=float).reshape(self.n, 2)
        self.heading = np.array(headings, dtype=float).reshape(self.n)
        self.home = np.array(cfg.home_pos, dtype=float)
        self.sink = np.array(cfg.sink_pos, dtype=float)
        self.collided = np.zeros(self.n, dtype=bool)
        self.distance = np.zeros(self.n)
        self.total_distance = 0.0
        self.step = 0
        self.speed_clamps = 0
        self._pending = np.zeros(self.n)
        half_w, half_h = cfg.width / 2 - cfg.robot_radius, cfg.height / 2 - cfg.robot_radius
        self._lo = np.array([-half_w, -half_h])
        self._hi = np.array([half_w, half_h])

    def pose(self, i: int) -> Pose:
        return Pose(float(self.pos[i, 0]), float(self.pos[i, 1]), float(self.heading[i]))

    def node_positions(self) -> np.ndarray:
        """Robot positions followed by HOME then SINK, shape (n + 2, 2)."""
        return np.vstack([self.pos, self.home, self.sink])

    # ------------------------------------------------------------------ motion

    def apply_wheels(self, left, right) -> None:
        """Move every robot by one step given per-robot wheel speeds.

        Speeds beyond ``max_wheel_speed`` are clamped and counted in
        ``speed_clamps``. A robot whose motion would penetrate a wall or another
        robot stops at contact and gets its ``collided`` flag set.
        """
        cfg = self.cfg
        vmax = cfg.max_wheel_speed
        left = np.asarray(left, dtype=float).reshape(self.n)
        right = np.asarray(right, dtype=float).reshape(self.n)
        over = (np.abs(left) > vmax) | (np.abs(right) > vmax)
        if over.any():
            self.speed_clamps += int(over.sum())
            left = np.clip(left, -vmax, vmax)
            right = np.clip(right, -vmax, vmax)

        v = (left + right) / 2.0
        omega = (right - left) / cfg.wheel_base
        old = self.pos
        target = old + np.column_stack((v * np.cos(self.heading), v * np.sin(self.heading))) * cfg.dt
        clamped = np.clip(target, self._lo, self._hi)
        hit_wall = (clamped != target).any(axis=1)

        frac = self._contact_fraction(old, clamped - old)
        new = old + frac[:, None] * (clamped - old)
        hit_robot = frac < 1.0

        reverted = self._resolve_overlaps(old, new)
        self.collided = hit_wall | hit_robot | reverted
        self._pending = self._pending + np.hypot(*(new - old).T)
        self.pos = new
        self.heading = wrap_angle(self.heading + omega * cfg.dt)
        self.step += 1

    def _contact_fraction(self, start: np.ndarray, delta: np.ndarray) -> np.ndarray:
        """Largest fraction of each robot's move before it touches another robot
        held at its start position."""
        n = self.n
        if n < 2:
            return np.ones(n)
        reach = 2 * self.cfg.robot_radius
        e = start[:, None, :] - start[None, :, :]  # (i, j, 2)
        a = np.einsum("ik,ik->i", delta, delta)[:, None]
        b = 2 * np.einsum("ijk,ik->ij", e, delta)
        c = np.einsum("ijk,ijk->ij", e, e) - reach * reach
        frac = np.ones((n, n))
        touching = c <= _CONTACT_EPS
        # already in contact and moving inwards: no progress allowed
        frac[touching & (b < 0)] = 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = b * b - 4 * a * c
            t_hit = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a)
        hits = (~touching) & (a > 0) & (disc > 0) & (t_hit >= 0) & (t_hit < 1)
        frac[hits] = np.maximum(t_hit[hits] - 1e-12, 0.0)
        np.fill_diagonal(frac, 1.0)
        return frac.min(axis=1)

    def _resolve_overlaps(self, old: np.ndarray, new: np.ndarray) -> np.ndarray:
        """Send robots that ended up overlapping back to where they started.

        Every robot's move was already checked against the others' start
        positions, so reverting overlapping pairs converges in at most n passes.
        """
        reverted = np.zeros(self.n, dtype=bool)
        if self.n < 2:
            return reverted
        limit = 2 * self.cfg.robot_radius - _CONTACT_EPS
        for _ in range(self.n):
            d = np.hypot(*(new[:, None, :] - new[None, :, :]).transpose(2, 0, 1))
            np.fill_diagonal(d, np.inf)
            bad = (d < limit).any(axis=1) & ~reverted
            if not bad.any():
                break
            new[bad] = old[bad]
            reverted |= bad
        return reverted

    def accumulate_distance(self) -> float:
        """Fold the displacement of the last step into the per-robot and swarm
        totals; returns the swarm total so far."""
        self.distance += self._pending
        self.total_distance += float(self._pending.sum())
        self._pending = np.zeros(self.n)
        return self.total_distance

    # ----------------------------------------------------------------- sensing

    def sense_all(self) -> np.ndarray:
        """IR readings for every robot, shape (n, 7)."""
        cfg = self.cfg
        r = cfg.robot_radius
        angles = self.heading[:, None] + SENSOR_ANGLES[None, :]
        ux, uy = np.cos(angles), np.sin(angles)
        ox, oy = self.pos[:, 0:1], self.pos[:, 1:2]
        half_w, half_h = cfg.width / 2, cfg.height / 2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tx = np.where(ux > 0, (half_w - ox) / ux, np.where(ux < 0, (-half_w - ox) / ux, np.inf))
            ty = np.where(uy > 0, (half_h - oy) / uy, np.where(uy < 0, (-half_h - oy) / uy, np.inf))
        t = np.minimum(tx, ty)

        if self.n > 1:
            e = self.pos[None, :, :] - self.pos[:, None, :]  # (i, j, 2): from i to j
            b = ux[:, :, None] * e[:, None, :, 0] + uy[:, :, None] * e[:, None, :, 1]
            c = (e * e).sum(axis=2) - r * r
            disc = b * b - c[:, None, :]
            with np.errstate(invalid="ignore"):
                th = b - np.sqrt(disc)
            ok = (disc >= 0) & (b > 0)
            ok[np.arange(self.n), :, np.arange(self.n)] = False
            th = np.where(ok, th, np.inf)
            t = np.minimum(t, th.min(axis=2))

        gap = np.maximum(t - r, 0.0)
        return np.where(gap <= cfg.sensor_range, np.maximum(0.0, 1.0 - gap / cfg.sensor_range), 0.0)

    def sense(self, robot_id: int) -> SensorArray:
        return SensorArray(tuple(float(v) for v in self.sense_all()[robot_id]))


def spawn_world(cfg: WorldConfig, seed: int | None = None) -> World:
    """Place ``n_robots`` uniformly in the disc of ``spawn_radius`` around home.

    Rejection sampling keeps robots inside the walls and pairwise further apart
    than one body diameter. Raises `PlacementError` when a robot cannot be
    placed within a bounded number of attempts.
    """
    rng = random.Random(cfg.rng_seed if seed is None else seed)
    r = cfg.robot_radius
    hx, hy = cfg.home_pos
    lim_x, lim_y = cfg.width / 2 - r, cfg.height / 2 - r
    placed: list[tuple[float, float]] = []
    headings = []
    for i in range(cfg.n_robots):
        for _ in range(SPAWN_ATTEMPTS):
            rho = cfg.spawn_radius * math.sqrt(rng.random())
            phi = rng.uniform(-math.pi, math.pi)
            x, y = hx + rho * math.cos(phi), hy + rho * math.sin(phi)
            if abs(x) > lim_x or abs(y) > lim_y:
                continue
            if all(math.hypot(x - px, y - py) > 2 * r for px, py in placed):
                placed.append((x, y))
                headings.append(rng.uniform(-math.pi, math.pi))
                break
        else:
            raise PlacementError(
                f"could not place robot {i} of {cfg.n_robots} within spawn_radius "
                f"{cfg.spawn_radius} m after {SPAWN_ATTEMPTS} attempts")
    return World(cfg, placed, headings)

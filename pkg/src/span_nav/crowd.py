"""Pedestrian world models: anticipatory crowd simulation and replay.

The simulator moves agents with a goal-seeking force plus a pairwise
repulsion derived from the interaction energy E(tau) = (k / tau^2)
exp(-tau / tau0), where tau is the time to collision under constant
velocities.  The replay engine serves recorded trajectory corpora;
replayed pedestrians never react to the robot.

Both expose the same interface to the episode loop: ``observe()`` returns
per-agent observation windows and current positions, ``advance(dt, ...)``
moves the world forward.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_PED_SPEED = 1.0


@dataclass
class Pedestrian:
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    radius: float = 0.4
    preferred_speed: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        self.preferred_speed = min(self.preferred_speed, MAX_PED_SPEED)


@dataclass(frozen=True)
class CrowdParams:
    k: float = 1.5
    tau0: float = 3.0
    interaction_horizon: float = 4.0
    relax_time: float = 0.5
    grad_step: float = 1e-3
    map_margin: float = 0.5
    map_gain: float = 2.0


def pairwise_ttc(pa, va, ra, pb, vb, rb) -> float:
    """Time to collision of two constant-velocity disks; +inf if never.

    Smallest positive root of ||dp + t dv|| = ra + rb; 0 if already
    overlapping.
    """
    dp = np.asarray(pa, dtype=float) - np.asarray(pb, dtype=float)
    dv = np.asarray(va, dtype=float) - np.asarray(vb, dtype=float)
    r = ra + rb
    c0 = float(dp @ dp) - r * r
    if c0 < 0.0:
        return 0.0
    c2 = float(dv @ dv)
    if c2 < 1e-12:
        return math.inf
    c1 = 2.0 * float(dp @ dv)
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc <= 0.0:
        return math.inf
    t = (-c1 - math.sqrt(disc)) / (2.0 * c2)
    return t if t > 0.0 else math.inf


def ttc(a: Pedestrian, b: Pedestrian) -> float:
    return pairwise_ttc(a.position, a.velocity, a.radius, b.position, b.velocity, b.radius)


def _interaction_energy(tau: float, params: CrowdParams) -> float:
    if not math.isfinite(tau) or tau > params.interaction_horizon:
        return 0.0
    tau = max(tau, 1e-3)  # energy diverges at contact; keep forces finite
    return (params.k / (tau * tau)) * math.exp(-tau / params.tau0)


def _repulsion_force(agent: Pedestrian, other_pos, other_vel, other_radius, params) -> np.ndarray:
    """-d E(tau) / d position, by central differences on the agent position."""
    h = params.grad_step
    force = np.zeros(2)
    for axis in range(2):
        for sign, slot in ((1.0, 0), (-1.0, 1)):
            pos = agent.position.copy()
            pos[axis] += sign * h
            tau = pairwise_ttc(pos, agent.velocity, agent.radius, other_pos, other_vel, other_radius)
            e = _interaction_energy(tau, params)
            if slot == 0:
                e_plus = e
            else:
                e_minus = e
        force[axis] = -(e_plus - e_minus) / (2.0 * h)
    return force


def _map_force(position, grid, params: CrowdParams) -> np.ndarray:
    """Push away from occupied cells: downhill on the occupancy field."""
    from .occupancy import query

    h = params.map_margin
    grad = np.zeros(2)
    for axis in range(2):
        lo = position.copy()
        hi = position.copy()
        lo[axis] -= h
        hi[axis] += h
        grad[axis] = (query(grid, hi) - query(grid, lo)) / (2.0 * h)
    return -params.map_gain * grad


def step_crowd(
    pedestrians: list[Pedestrian],
    dt: float,
    params: CrowdParams = CrowdParams(),
    robot_position=None,
    robot_velocity=None,
    robot_radius: float = 0.4,
    grid=None,
) -> None:
    """Advance all pedestrians one synchronous Euler step in place.

    Forces are computed from a snapshot of the previous state; the robot,
    when given, repels agents exactly like another pedestrian.  Speeds are
    clamped to 1 m/s.
    """
    snapshot = [(p.position.copy(), p.velocity.copy(), p.radius) for p in pedestrians]
    if robot_position is not None:
        rvel = np.zeros(2) if robot_velocity is None else np.asarray(robot_velocity, dtype=float)
        snapshot.append((np.asarray(robot_position, dtype=float), rvel, robot_radius))

    forces = []
    for i, agent in enumerate(pedestrians):
        to_goal = agent.goal - agent.position
        dist = float(np.linalg.norm(to_goal))
        if dist > agent.radius:
            desired = agent.preferred_speed * to_goal / dist
        else:
            desired = np.zeros(2)  # arrived; settle
        force = (desired - agent.velocity) / params.relax_time
        for j, (pos, vel, rad) in enumerate(snapshot):
            if j == i:
                continue
            force += _repulsion_force(agent, pos, vel, rad, params)
        if grid is not None:
            force += _map_force(agent.position, grid, params)
        forces.append(force)

    for agent, force in zip(pedestrians, forces):
        agent.velocity = agent.velocity + force * dt
        speed = float(np.linalg.norm(agent.velocity))
        if speed > MAX_PED_SPEED:
            agent.velocity *= MAX_PED_SPEED / speed
        agent.position = agent.position + agent.velocity * dt


@dataclass(frozen=True)
class ReplayTrack:
    """One recorded agent: strictly increasing timestamps and positions."""

    agent_id: str
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if times.ndim != 1 or points.shape != (times.size, 2):
            raise ValueError("track needs times (n,) and points (n, 2)")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError(f"track {self.agent_id}: timestamps must strictly increase")
        times.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    def position_at(self, t: float) -> np.ndarray:
        """Linear interpolation, clamped to the endpoints."""
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return np.array([x, y])

    def active_at(self, t: float) -> bool:
        return self.times[0] <= t <= self.times[-1]


def replay_positions(tracks, t: float, p: int, dt: float):
    """Observation windows for every track active at time t.

    Returns (windows, positions): windows is a list of (p, 2) arrays at
    times t - (p-1) dt ... t (clamped to each track's start, which pads
    early windows with the first recorded point), positions the current
    ground-truth points.
    """
    windows, positions = [], []
    ts = t - dt * np.arange(p - 1, -1, -1)
    for track in tracks:
        if not track.active_at(t):
            continue
        win = np.stack([track.position_at(float(tw)) for tw in ts])
        windows.append(win)
        positions.append(track.position_at(t))
    return windows, positions


def load_tracks(path) -> list[ReplayTrack]:
    """Load a trajectory corpus: CSV ``t,agent_id,x,y`` file or directory."""
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise FileNotFoundError(f"no CSV files under {path}")
    tracks: list[ReplayTrack] = []
    for fpath in files:
        rows: dict[str, list[tuple[float, float, float]]] = {}
        with open(fpath) as fh:
            header = fh.readline().strip().split(",")
            if [h.strip() for h in header] != ["t", "agent_id", "x", "y"]:
                raise ValueError(f"{fpath}: expected header 't,agent_id,x,y', got {header}")
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    t_tok, aid, x_tok, y_tok = line.split(",")
                    rows.setdefault(aid.strip(), []).append(
                        (float(t_tok), float(x_tok), float(y_tok))
                    )
                except ValueError as exc:
                    raise ValueError(f"{fpath}:{lineno}: bad row ({exc})") from None
        stem = fpath.stem
        for aid, recs in rows.items():
            recs.sort(key=lambda r: r[0])
            arr = np.asarray(recs)
            tracks.append(
                ReplayTrack(
                    agent_id=f"{stem}/{aid}" if len(files) > 1 else aid,
                    times=arr[:, 0],
                    points=arr[:, 1:3],
                )
            )
    return tracks


def shift_tracks(tracks, shifts) -> list[ReplayTrack]:
    """Overlay tracks recorded at different times by shifting their clocks.

    ``shifts`` maps agent_id to a time offset (seconds) added to that
    track's timestamps; missing ids are left unshifted.
    """
    out = []
    for track in tracks:
        delta = float(shifts.get(track.agent_id, 0.0))
        out.append(
            ReplayTrack(agent_id=track.agent_id, times=track.times + delta, points=track.points)
        )
    return out


class SimulatedCrowd:
    """Episode-loop world backed by the power-law simulator."""

    def __init__(self, pedestrians: list[Pedestrian], p: int, dt: float,
                 params: CrowdParams = CrowdParams(), grid=None, react_to_robot: bool = True):
        self.pedestrians = pedestrians
        self.p = p
        self.dt = dt
        self.params = params
        self.grid = grid
        self.react_to_robot = react_to_robot
        self._history = [deque([ped.position.copy()], maxlen=p) for ped in pedestrians]

    def observe(self):
        windows = []
        for hist in self._history:
            pts = list(hist)
            while len(pts) < self.p:  # warm-up: repeat the earliest observation
                pts.insert(0, pts[0])
            windows.append(np.stack(pts))
        positions = [ped.position.copy() for ped in self.pedestrians]
        return windows, positions

    def advance(self, dt: float, robot_position=None):
        step_crowd(
            self.pedestrians,
            dt,
            self.params,
            robot_position=robot_position if self.react_to_robot else None,
            grid=self.grid,
        )
        for hist, ped in zip(self._history, self.pedestrians):
            hist.append(ped.position.copy())


class ReplayCrowd:
    """Episode-loop world that plays back recorded tracks."""

    def __init__(self, tracks: list[ReplayTrack], p: int, dt: float, t0: float = 0.0):
        self.tracks = tracks
        self.p = p
        self.dt = dt
        self.t = t0

    def observe(self):
        return replay_positions(self.tracks, self.t, self.p, self.dt)

    def advance(self, dt: float, robot_position=None):
        self.t += dt

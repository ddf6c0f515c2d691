"""Scenario configuration, episode execution, logging, and metrics.

A scenario is a single versioned JSON document that pins every input of a
run: map, robot start/goal, pedestrian source, hyperparameters, solver
settings, and the seed.  Together with the seed it determines every byte
of the episode log; wall-clock timing is the one nondeterministic output
and is kept out of the log file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import crowd, occupancy, predictor
from .collision import CollisionConfig, static_collision_check
from .control import Control, EpisodeConfig, EpisodeLog, RobotState, StepRecord, run_episode
from .solver import SolverConfig

SCENARIO_VERSION = 1

_HYPER_DEFAULTS = {
    "kappa": 100.0,
    "gamma": 0.01,
    "epsilon": 0.25,
    "r_robot": 0.4,
    "r_ped": 0.4,
    "horizon": 4.0,
    "dt": 0.1,
    "m": 8,
    "p": 5,
    "v_bounds": [-1.0, 1.0],
    "omega_bounds": [0.0, 1.0],
    "eps_goal": 0.5,
    "t_max": 120.0,
    "sweep_count": 36,
}

_SOLVER_DEFAULTS = {
    "rho_begin": 0.25,
    "rho_end": 1e-3,
    "max_evals": 100,
    "restarts": 40,
}


class ScenarioError(ValueError):
    """Raised for malformed or incomplete scenario files."""


def _check_keys(obj: dict, allowed, where: str):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass
class Scenario:
    """Fully resolved scenario: parsed config plus loaded resources."""

    raw: dict
    seed: int
    start: RobotState
    goal: np.ndarray
    grid: occupancy.OccupancyGrid | None
    map_path: str | None
    model_path: str | None
    hyper: dict
    solver: dict
    ped_spec: dict
    base_dir: Path

    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def collision_config(self) -> CollisionConfig:
        h = self.hyper
        return CollisionConfig(
            epsilon=h["epsilon"],
            r_robot=h["r_robot"],
            r_ped=h["r_ped"],
            sweep_count=h["sweep_count"],
            dt=h["dt"],
            horizon=h["horizon"],
        )

    def episode_config(self, reactive: bool = False) -> EpisodeConfig:
        h = self.hyper
        return EpisodeConfig(
            kappa=h["kappa"],
            horizon=h["horizon"],
            dt=h["dt"],
            u_lower=(h["v_bounds"][0], h["omega_bounds"][0]),
            u_upper=(h["v_bounds"][1], h["omega_bounds"][1]),
            eps_goal=h["eps_goal"],
            t_max=h["t_max"],
            restarts=self.solver["restarts"],
            reactive=reactive,
            collision=self.collision_config(),
            solver=SolverConfig(
                rho_begin=self.solver["rho_begin"],
                rho_end=self.solver["rho_end"],
                max_evals=self.solver["max_evals"],
            ),
        )

    def make_world(self):
        h = self.hyper
        spec = self.ped_spec
        if spec["type"] == "simulated":
            params_cfg = dict(spec.get("params", {}))
            _check_keys(
                params_cfg,
                ("k", "tau0", "interaction_horizon", "relax_time"),
                "pedestrians.params",
            )
            params = crowd.CrowdParams(**params_cfg)
            peds = [
                crowd.Pedestrian(
                    position=a["position"],
                    velocity=a.get("velocity", [0.0, 0.0]),
                    goal=a["goal"],
                    radius=a.get("radius", h["r_ped"]),
                    preferred_speed=a.get("preferred_speed", 1.0),
                )
                for a in spec.get("agents", [])
            ]
            return crowd.SimulatedCrowd(
                peds,
                p=h["p"],
                dt=h["dt"],
                params=params,
                grid=self.grid,
                react_to_robot=spec.get("react_to_robot", True),
            )
        tracks = crowd.load_tracks(self.base_dir / spec["corpus"])
        shifts = spec.get("time_shifts", {})
        if shifts:
            tracks = crowd.shift_tracks(tracks, shifts)
        return crowd.ReplayCrowd(tracks, p=h["p"], dt=h["dt"], t0=spec.get("t0", 0.0))

    def load_model(self):
        if self.model_path is None:
            return None
        return predictor.load_model(self.base_dir / self.model_path)


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    _check_keys(
        raw,
        ("version", "seed", "map", "robot", "pedestrians", "model", "hyperparameters", "solver"),
        str(path),
    )
    if raw.get("version") != SCENARIO_VERSION:
        raise ScenarioError(f"{path}: unsupported scenario version {raw.get('version')}")
    if "seed" not in raw and seed_override is None:
        raise ScenarioError(f"{path}: a seed is mandatory")
    seed = int(seed_override if seed_override is not None else raw["seed"])
    if seed_override is not None:
        raw = dict(raw, seed=seed)

    robot = raw.get("robot", {})
    _check_keys(robot, ("start", "goal"), "robot")
    if "start" not in robot or "goal" not in robot:
        raise ScenarioError("robot.start and robot.goal are required")
    sx, sy, stheta = robot["start"]
    start = RobotState(x=sx, y=sy, theta=stheta)
    goal = np.asarray(robot["goal"], dtype=float)

    hyper = dict(_HYPER_DEFAULTS)
    hyper_raw = raw.get("hyperparameters", {})
    _check_keys(hyper_raw, _HYPER_DEFAULTS, "hyperparameters")
    hyper.update(hyper_raw)

    solver = dict(_SOLVER_DEFAULTS)
    solver_raw = raw.get("solver", {})
    _check_keys(solver_raw, _SOLVER_DEFAULTS, "solver")
    solver.update(solver_raw)

    ped_spec = raw.get("pedestrians", {"type": "simulated", "agents": []})
    if ped_spec.get("type") == "simulated":
        _check_keys(ped_spec, ("type", "agents", "params", "react_to_robot"), "pedestrians")
    elif ped_spec.get("type") == "replay":
        _check_keys(ped_spec, ("type", "corpus", "time_shifts", "t0"), "pedestrians")
    else:
        raise ScenarioError(f"pedestrians.type must be 'simulated' or 'replay', got {ped_spec.get('type')}")

    grid = None
    map_path = None
    map_spec = raw.get("map")
    if map_spec is not None:
        _check_keys(map_spec, ("path", "format"), "map")
        map_path = map_spec["path"]
        grid = occupancy.load(path.parent / map_path, map_spec.get("format"))

    return Scenario(
        raw=raw,
        seed=seed,
        start=start,
        goal=goal,
        grid=grid,
        map_path=map_path,
        model_path=raw.get("model"),
        hyper=hyper,
        solver=solver,
        ped_spec=ped_spec,
        base_dir=path.parent,
    )


def run_scenario(scenario: Scenario, reactive: bool = False) -> EpisodeLog:
    """Execute one episode exactly as the scenario specifies."""
    rng = np.random.default_rng(scenario.seed)
    model = scenario.load_model()
    if model is None and not reactive:
        raise ScenarioError("scenario has no model; required unless running the reactive baseline")
    world = scenario.make_world()
    log = run_episode(
        world=world,
        model=model,
        start=scenario.start,
        goal=scenario.goal,
        cfg=scenario.episode_config(reactive=reactive),
        rng=rng,
        grid=scenario.grid,
    )
    log.map_path = scenario.map_path
    return log


# ---------------------------------------------------------------------------
# Metrics


def recompute_collision_flags(log: EpisodeLog, grid=None) -> list[bool]:
    """Ground-truth collision per step from logged positions only."""
    cfg = CollisionConfig(
        epsilon=log.epsilon,
        r_robot=log.r_robot,
        r_ped=log.r_ped,
        dt=log.dt,
        horizon=max(log.dt, 4.0),
    )
    flags = []
    for step in log.steps:
        pos = step.state.position
        hit = any(
            float(np.linalg.norm(pos - p)) < cfg.r_sum for p in step.ped_positions
        )
        if not hit and grid is not None:
            hit = static_collision_check(pos, grid, cfg)
        flags.append(hit)
    return flags


def metrics(log: EpisodeLog, grid=None) -> dict:
    """TTG, DOC, and timing summary for one episode log."""
    flags = recompute_collision_flags(log, grid=grid)
    reached = log.outcome == "success"
    ttg = len(log.steps) * log.dt if reached else None
    doc = log.dt * sum(flags)
    times = [s.iter_ms for s in log.steps]
    return {
        "ttg_s": round(ttg, 9) if ttg is not None else None,
        "doc_s": round(doc, 9),
        "reached": reached,
        "mean_iter_ms": float(np.mean(times)) if times else 0.0,
        "max_iter_ms": float(np.max(times)) if times else 0.0,
    }


# ---------------------------------------------------------------------------
# Log serialization

_LOG_HEADER = "t,x,y,theta,v,omega,collision,peds"


def write_log(log: EpisodeLog, path, seed: int, scenario_hash: str) -> None:
    """Write the deterministic episode log CSV.

    Per-step wall times are deliberately excluded; they go to the timing
    sidecar so identical scenario + seed gives identical log bytes.
    """
    lines = [
        "# span-nav episode log v1",
        f"# scenario_hash={scenario_hash}",
        f"# seed={seed}",
        f"# goal={float(log.goal[0])!r},{float(log.goal[1])!r}",
        f"# dt={log.dt!r}",
        f"# eps_goal={log.eps_goal!r}",
        f"# r_robot={log.r_robot!r}",
        f"# r_ped={log.r_ped!r}",
        f"# epsilon={log.epsilon!r}",
        f"# map={log.map_path or ''}",
        f"# outcome={log.outcome}",
        _LOG_HEADER,
    ]
    for s in log.steps:
        peds = "|".join(f"{float(p[0])!r}:{float(p[1])!r}" for p in s.ped_positions)
        lines.append(
            f"{float(s.t)!r},{float(s.state.x)!r},{float(s.state.y)!r},"
            f"{float(s.state.theta)!r},{float(s.control.v)!r},"
            f"{float(s.control.omega)!r},{int(s.in_collision)},{peds}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_log(path) -> tuple[EpisodeLog, dict]:
    """Read a log CSV back into an EpisodeLog plus its header metadata."""
    meta: dict = {}
    steps: list[StepRecord] = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val
                continue
            if not line or line == _LOG_HEADER:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise ValueError(f"{path}: malformed log row: {line!r}")
            t, x, y, theta, v, om, coll, peds = parts
            ped_arr = (
                np.array([[float(a) for a in pair.split(":")] for pair in peds.split("|")])
                if peds
                else np.zeros((0, 2))
            )
            steps.append(
                StepRecord(
                    t=float(t),
                    state=RobotState(x=float(x), y=float(y), theta=float(theta)),
                    control=Control(v=float(v), omega=float(om)),
                    ped_positions=ped_arr,
                    in_collision=bool(int(coll)),
                    iter_ms=0.0,
                )
            )
    try:
        goal = np.asarray([float(g) for g in meta["goal"].split(",")])
        log = EpisodeLog(
            steps=steps,
            outcome=meta["outcome"],
            goal=goal,
            dt=float(meta["dt"]),
            eps_goal=float(meta["eps_goal"]),
            r_robot=float(meta["r_robot"]),
            r_ped=float(meta["r_ped"]),
            epsilon=float(meta["epsilon"]),
            map_path=meta.get("map") or None,
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing log header field {exc}") from None
    return log, meta


def write_timing(log: EpisodeLog, path) -> None:
    lines = ["step,iter_ms"] + [f"{i},{s.iter_ms:.3f}" for i, s in enumerate(log.steps)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_plot_data(log: EpisodeLog, path) -> None:
    """Tidy CSV of overlaid robot/pedestrian paths and distance to goal."""
    lines = ["kind,id,t,a,b"]
    for s in log.steps:
        t = float(s.t)
        lines.append(f"robot,0,{t!r},{float(s.state.x)!r},{float(s.state.y)!r}")
        for j, p in enumerate(s.ped_positions):
            lines.append(f"ped,{j},{t!r},{float(p[0])!r},{float(p[1])!r}")
        dist = float(np.linalg.norm(s.state.position - log.goal))
        lines.append(f"dist_to_goal,0,{t!r},{dist!r},")
    Path(path).write_text("\n".join(lines) + "\n")

"""Unicycle dynamics, the time-to-collision control cost, and the
receding-horizon controller.

Each control iteration minimizes ||x(T) - g|| + kappa / tau over constant
controls (v, omega) inside a box, where tau is the first time a constant
control rollout triggers a pedestrian or map collision check.  The
non-smooth cost is solved with the derivative-free solver from several
restarts, the best first step is applied, and the problem is re-solved at
the next step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import CollisionConfig, PredictionRollout, first_collision_time
from .occupancy import OccupancyGrid
from .solver import SolverConfig, minimize
from .sp import TrajectoryDistribution


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("robot state must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Control:
    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


def step_dynamics(state: RobotState, u: Control, dt: float) -> RobotState:
    """One Euler step of the velocity-controlled unicycle."""
    return RobotState(
        x=state.x + u.v * math.cos(state.theta) * dt,
        y=state.y + u.v * math.sin(state.theta) * dt,
        theta=state.theta + u.omega * dt,
    )


def rollout(state: RobotState, u: Control, T: float, dt: float) -> list[RobotState]:
    """States after each of round(T / dt) Euler steps under constant u."""
    out = []
    for _ in range(int(round(T / dt))):
        state = step_dynamics(state, u, dt)
        out.append(state)
    return out


def constant_control_positions(state: RobotState, u: Control, steps: int, dt: float) -> np.ndarray:
    """(steps, 2) positions after each Euler step, in closed vectorized form.

    Identical to iterating step_dynamics: position k sums v dt cos/sin of the
    heading before each step.
    """
    theta = state.theta + u.omega * dt * np.arange(steps)
    dx = np.cumsum(u.v * dt * np.cos(theta))
    dy = np.cumsum(u.v * dt * np.sin(theta))
    return np.stack([state.x + dx, state.y + dy], axis=-1)


@dataclass(frozen=True)
class ControlProblem:
    """One receding-horizon subproblem: reach the goal, stay out of trouble."""

    x0: RobotState
    goal: np.ndarray
    kappa: float = 100.0
    u_lower: tuple[float, float] = (-1.0, 0.0)
    u_upper: tuple[float, float] = (1.0, 1.0)
    preds: tuple[TrajectoryDistribution, ...] = ()
    grid: OccupancyGrid | None = None
    collision: CollisionConfig = field(default_factory=CollisionConfig)

    def __post_init__(self):
        goal = np.asarray(self.goal, dtype=float)
        if goal.shape != (2,):
            raise ValueError("goal must be a 2-D point")
        if np.any(np.asarray(self.u_lower) > np.asarray(self.u_upper)):
            raise ValueError("control bounds must be ordered")
        goal.setflags(write=False)
        object.__setattr__(self, "goal", goal)
        object.__setattr__(self, "preds", tuple(self.preds))


def cost(u: Control, problem: ControlProblem, _rollout: PredictionRollout | None = None) -> float:
    """Terminal distance to goal plus kappa over time-to-collision."""
    cfg = problem.collision
    if _rollout is None:
        _rollout = PredictionRollout(list(problem.preds), cfg)
    positions = constant_control_positions(problem.x0, u, _rollout.times.size, cfg.dt)
    tau = first_collision_time(positions, _rollout, problem.grid)
    terminal = math.hypot(
        positions[-1, 0] - problem.goal[0], positions[-1, 1] - problem.goal[1]
    )
    return terminal + (problem.kappa / tau if math.isfinite(tau) else 0.0)


def solve_step(
    problem: ControlProblem,
    solver_cfg: SolverConfig,
    rng: np.random.Generator,
    restarts: int = 40,
    prev: Control | None = None,
) -> Control:
    """Solve one receding-horizon subproblem from multiple restarts.

    Restart 1 is the previous solution (temporal coherence); the rest are
    uniform samples in the control box.  Returns the in-box candidate with
    the lowest cost, breaking ties lexicographically.
    """
    lower = np.asarray(problem.u_lower, dtype=float)
    upper = np.asarray(problem.u_upper, dtype=float)
    pred_rollout = PredictionRollout(list(problem.preds), problem.collision)

    def objective(z):
        return cost(Control(v=z[0], omega=z[1]), problem, pred_rollout)

    starts = [prev.as_array() if prev is not None else 0.5 * (lower + upper)]
    starts.extend(rng.uniform(lower, upper) for _ in range(max(restarts - 1, 0)))

    best_u, best_f = None, np.inf
    for x0 in starts:
        res = minimize(objective, np.clip(x0, lower, upper), lower, upper, solver_cfg)
        if res.fun < best_f or (
            res.fun == best_f and best_u is not None and tuple(res.x) < tuple(best_u)
        ):
            best_u, best_f = res.x, res.fun
    return Control(v=float(best_u[0]), omega=float(best_u[1]))


@dataclass
class StepRecord:
    """One control-loop iteration of an episode."""

    t: float
    state: RobotState
    control: Control
    ped_positions: np.ndarray  # (N, 2) ground-truth positions at t
    in_collision: bool
    iter_ms: float


@dataclass
class EpisodeLog:
    """Full trace of one episode plus its outcome."""

    steps: list[StepRecord]
    outcome: str  # "success" | "timeout"
    goal: np.ndarray
    dt: float
    eps_goal: float
    r_robot: float
    r_ped: float
    epsilon: float
    map_path: str | None = None


@dataclass(frozen=True)
class EpisodeConfig:
    """Controller-side knobs for a full episode run."""

    kappa: float = 100.0
    horizon: float = 4.0
    dt: float = 0.1
    u_lower: tuple[float, float] = (-1.0, 0.0)
    u_upper: tuple[float, float] = (1.0, 1.0)
    eps_goal: float = 0.5
    t_max: float = 120.0
    restarts: int = 40
    reactive: bool = False
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)


def _frozen_prediction(position: np.ndarray, basis, m: int) -> TrajectoryDistribution:
    """A near-point-mass SP pinned at the current position (reactive mode)."""
    from .sp import MatrixNormalParams

    params = MatrixNormalParams(
        M=np.zeros((m, 2)), U=1e-9 * np.eye(m), V=1e-9 * np.eye(2)
    )
    return TrajectoryDistribution(params=params, basis=basis, anchor=position)


def run_episode(
    world,
    model,
    start: RobotState,
    goal,
    cfg: EpisodeConfig,
    rng: np.random.Generator,
    grid: OccupancyGrid | None = None,
) -> EpisodeLog:
    """Run the receding-horizon loop until the goal or the time limit.

    ``world`` supplies ground-truth pedestrian positions and observation
    windows (see crowd.SimulatedCrowd / crowd.ReplayCrowd); ``model`` is a
    trained predictor, unused in reactive mode.
    """
    from .predictor import predict_batch

    goal = np.asarray(goal, dtype=float)
    # Reactive mode keeps the full rollout horizon; only the pedestrian
    # futures are frozen.  A one-step horizon leaves a unicycle with
    # omega >= 0 no reason to fix its heading and it orbits the goal.
    coll_cfg = cfg.collision

    state = start
    t = 0.0
    steps: list[StepRecord] = []
    prev_u: Control | None = None
    outcome = "timeout"

    while True:
        if float(np.linalg.norm(state.position - goal)) < cfg.eps_goal:
            outcome = "success"
            break
        if t > cfg.t_max:
            break

        tic = time.perf_counter()
        windows, positions = world.observe()
        if cfg.reactive:
            basis = model.basis if model is not None else None
            if basis is None:
                from .sp import BasisSpec

                basis = BasisSpec(m=2, horizon=cfg.horizon, gamma=0.01)
            preds = [_frozen_prediction(p, basis, basis.m) for p in positions]
        else:
            preds = predict_batch(model, windows)

        problem = ControlProblem(
            x0=state,
            goal=goal,
            kappa=cfg.kappa,
            u_lower=cfg.u_lower,
            u_upper=cfg.u_upper,
            preds=preds,
            grid=grid,
            collision=coll_cfg,
        )
        u = solve_step(problem, cfg.solver, rng, restarts=cfg.restarts, prev=prev_u)
        iter_ms = (time.perf_counter() - tic) * 1e3

        in_collision = _ground_truth_collision(state, positions, grid, coll_cfg)
        steps.append(
            StepRecord(
                t=t,
                state=state,
                control=u,
                ped_positions=np.asarray(positions, dtype=float).reshape(-1, 2),
                in_collision=in_collision,
                iter_ms=iter_ms,
            )
        )

        state = step_dynamics(state, u, cfg.dt)
        world.advance(cfg.dt, robot_position=state.position)
        prev_u = u
        t += cfg.dt

    return EpisodeLog(
        steps=steps,
        outcome=outcome,
        goal=goal,
        dt=cfg.dt,
        eps_goal=cfg.eps_goal,
        r_robot=coll_cfg.r_robot,
        r_ped=coll_cfg.r_ped,
        epsilon=coll_cfg.epsilon,
    )


def _ground_truth_collision(state, positions, grid, cfg: CollisionConfig) -> bool:
    """Actual (not chance-constrained) collision at the current instant."""
    from .collision import static_collision_check

    pos = state.position
    for p in positions:
        if float(np.linalg.norm(pos - np.asarray(p))) < cfg.r_sum:
            return True
    return static_collision_check(pos, grid, cfg)

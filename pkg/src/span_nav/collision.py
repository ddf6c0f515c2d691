"""Chance-constrained collision checks and time-to-collision.

Pedestrian positions are Gaussian at every time (from the trajectory SP);
the probability of the robot disk overlapping a pedestrian disk is bounded
above with an error-function expression, and a collision is declared when
that bound exceeds the chance threshold epsilon.  Static obstacles are
checked by sweeping the robot's circumference against the occupancy map.
The combined time-to-collision is the first rollout step either check fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfinv

from .occupancy import OccupancyGrid, query
from .sp import TrajectoryDistribution

NO_COLLISION = math.inf


@dataclass(frozen=True)
class CollisionConfig:
    """Thresholds and discretization for the collision predicates."""

    epsilon: float = 0.25
    r_robot: float = 0.4
    r_ped: float = 0.4
    sweep_count: int = 36
    dt: float = 0.1
    horizon: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.r_robot <= 0.0 or self.r_ped <= 0.0:
            raise ValueError("radii must be positive")
        if self.sweep_count < 8:
            raise ValueError(f"sweep_count must be >= 8, got {self.sweep_count}")
        if not 0.0 < self.dt <= self.horizon:
            raise ValueError("need 0 < dt <= horizon")

    @property
    def r_sum(self) -> float:
        return self.r_robot + self.r_ped

    def sweep_offsets(self) -> np.ndarray:
        """(K, 2) circle offsets r_robot * [sin, cos] at evenly spaced angles."""
        ang = np.linspace(-math.pi, math.pi, self.sweep_count, endpoint=False)
        return self.r_robot * np.stack([np.sin(ang), np.cos(ang)], axis=-1)

    def step_times(self) -> np.ndarray:
        """Rollout times dt, 2dt, ..., up to the horizon."""
        n = int(round(self.horizon / self.dt))
        return self.dt * np.arange(1, n + 1)


def _erf_bound(d: np.ndarray, sigma: np.ndarray, r_sum: float) -> np.ndarray:
    """Upper bound on the Gaussian disk integral, vectorized.

    ``d`` is (..., 2) offsets robot - mean, ``sigma`` (..., 2, 2) covariances.
    A zero offset (robot on the mean) conservatively yields 1.0.
    """
    nd = np.linalg.norm(d, axis=-1)
    safe = np.where(nd > 0.0, nd, 1.0)
    a = d / safe[..., None]
    var = np.einsum("...i,...ij,...j->...", a, sigma, a)
    var = np.maximum(var, 1e-300)
    bound = 0.5 * (1.0 + erf((r_sum - nd) / np.sqrt(2.0 * var)))
    bound = np.where(nd > 0.0, bound, 1.0)
    return np.clip(bound, 0.0, 1.0)


def ped_collision_bound(
    robot_pos, pred: TrajectoryDistribution, t: float, cfg: CollisionConfig
) -> float:
    """Upper bound on the probability of overlap with one pedestrian at t."""
    robot_pos = np.asarray(robot_pos, dtype=float)
    mean = pred.mean_at(t)
    cov = pred.cov_at(t)
    return float(_erf_bound(robot_pos - mean, cov, cfg.r_sum))


def ped_collision_check(
    robot_pos, preds: list[TrajectoryDistribution], t: float, cfg: CollisionConfig
) -> bool:
    """True iff any pedestrian's collision bound exceeds epsilon at t."""
    return any(ped_collision_bound(robot_pos, p, t, cfg) > cfg.epsilon for p in preds)


def static_collision_check(robot_pos, grid: OccupancyGrid | None, cfg: CollisionConfig) -> bool:
    """True iff, sweeping the robot's circle, any point exceeds epsilon occupancy."""
    if grid is None:
        return False
    pts = np.asarray(robot_pos, dtype=float) + cfg.sweep_offsets()
    return bool(np.max(query(grid, pts)) > cfg.epsilon)


class PredictionRollout:
    """Per-control-iteration cache of pedestrian moments along the horizon.

    The Gaussian moments at the rollout times do not depend on the candidate
    control, so they are evaluated once and reused by every cost evaluation.
    """

    def __init__(self, preds: list[TrajectoryDistribution], cfg: CollisionConfig):
        self.cfg = cfg
        self.times = cfg.step_times()
        n = len(preds)
        s = self.times.size
        self.means = np.empty((s, n, 2))
        covs = np.empty((s, n, 2, 2))
        for j, pred in enumerate(preds):
            self.means[:, j] = pred.mean_at(self.times)
            covs[:, j] = pred.cov_at(self.times)
        self.n_peds = n
        self.mean_x = np.ascontiguousarray(self.means[..., 0])
        self.mean_y = np.ascontiguousarray(self.means[..., 1])
        self.cov_xx = np.ascontiguousarray(covs[..., 0, 0])
        self.cov_xy = np.ascontiguousarray(covs[..., 0, 1])
        self.cov_yy = np.ascontiguousarray(covs[..., 1, 1])
        # bound > eps  <=>  erf(arg) > 2 eps - 1  <=>  r_sum - ||d|| > c sqrt(2 a^T S a)
        self._erf_threshold = float(erfinv(2.0 * cfg.epsilon - 1.0))

    def collision_mask(self, positions: np.ndarray) -> np.ndarray:
        """(S,) bool mask of steps where the pedestrian chance bound fires."""
        if self.n_peds == 0:
            return np.zeros(self.times.size, dtype=bool)
        dx = positions[:, 0:1] - self.mean_x
        dy = positions[:, 1:2] - self.mean_y
        nd2 = dx * dx + dy * dy
        # a^T Sigma a with a = d / ||d||, in covariance components
        quad = self.cov_xx * dx * dx + 2.0 * self.cov_xy * dx * dy + self.cov_yy * dy * dy
        nd2_safe = np.where(nd2 > 0.0, nd2, 1.0)
        var = quad / nd2_safe
        nd = np.sqrt(nd2)
        fire = (self.cfg.r_sum - nd) > self._erf_threshold * np.sqrt(2.0 * var)
        fire |= nd2 == 0.0  # robot on the predicted mean: bound is 1
        return fire.any(axis=1)


def first_collision_time(
    positions: np.ndarray,
    rollout: PredictionRollout,
    grid: OccupancyGrid | None,
) -> float:
    """Earliest step time in a position rollout where either check fires."""
    cfg = rollout.cfg
    mask = rollout.collision_mask(positions)
    if grid is not None:
        pts = positions[:, None, :] + cfg.sweep_offsets()
        occ = query(grid, pts)
        mask = mask | (occ.max(axis=1) > cfg.epsilon)
    hits = np.nonzero(mask)[0]
    if hits.size == 0:
        return NO_COLLISION
    return float(rollout.times[hits[0]])


def time_to_collision(state, control, preds, grid, cfg: CollisionConfig) -> float:
    """Time of first collision under constant controls, or +inf.

    Rolls the unicycle forward with Euler steps of cfg.dt from cfg.dt to the
    horizon and returns the first step time where the pedestrian
    chance-constraint or the swept map check fires.
    """
    from .control import constant_control_positions  # local import avoids a cycle

    positions = constant_control_positions(state, control, cfg.step_times().size, cfg.dt)
    return first_collision_time(positions, PredictionRollout(preds, cfg), grid)

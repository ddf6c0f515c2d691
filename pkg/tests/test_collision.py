"""Chance-constrained collision predicates and time-to-collision."""

import math

import numpy as np
import pytest

from span_nav.collision import (
    NO_COLLISION,
    CollisionConfig,
    _erf_bound,
    ped_collision_bound,
    ped_collision_check,
    static_collision_check,
    time_to_collision,
)
from span_nav.control import Control, RobotState
from span_nav.occupancy import OccupancyGrid
from span_nav.sp import BasisSpec, MatrixNormalParams, TrajectoryDistribution

CFG = CollisionConfig()  # epsilon 0.25, radii 0.4, dt 0.1, horizon 4


def point_prediction(position, scale=1e-9, m=4):
    """A near-deterministic SP pinned at a fixed position for all t."""
    basis = BasisSpec(m=m, horizon=4.0, gamma=0.01)
    params = MatrixNormalParams(
        M=np.zeros((m, 2)), U=scale * np.eye(m), V=scale * np.eye(2)
    )
    return TrajectoryDistribution(params=params, basis=basis, anchor=np.asarray(position, dtype=float))


def spread_prediction(position, var=0.25, m=4):
    """Stationary prediction with isotropic positional covariance ~ var at t=0."""
    basis = BasisSpec(m=m, horizon=4.0, gamma=0.01)
    phi_norm2 = float(np.exp(-2 * basis.gamma * basis.centers**2).sum())
    params = MatrixNormalParams(
        M=np.zeros((m, 2)), U=np.eye(m) / phi_norm2, V=var * np.eye(2)
    )
    return TrajectoryDistribution(params=params, basis=basis, anchor=np.asarray(position, dtype=float))


class TestPedCollisionBound:
    def test_half_at_touching_distance(self):
        pred = spread_prediction((0.0, 0.0), var=0.3)
        mean = pred.mean_at(1.0)
        robot = mean + np.array([CFG.r_sum, 0.0])
        assert ped_collision_bound(robot, pred, 1.0, CFG) == pytest.approx(0.5, rel=1e-9)

    def test_vanishes_far_away(self):
        pred = spread_prediction((0.0, 0.0), var=0.3)
        assert ped_collision_bound((500.0, 0.0), pred, 1.0, CFG) < 1e-12

    def test_robot_on_mean_is_certain(self):
        pred = spread_prediction((1.0, 2.0), var=0.3)
        mean = pred.mean_at(0.5)
        assert ped_collision_bound(mean, pred, 0.5, CFG) == 1.0

    def test_monotone_in_distance(self):
        pred = spread_prediction((0.0, 0.0), var=0.4)
        ds = np.linspace(0.01, 6.0, 80)
        bounds = [
            ped_collision_bound((d, 0.0), pred, 1.0, CFG) for d in ds
        ]
        assert all(b1 >= b2 - 1e-12 for b1, b2 in zip(bounds, bounds[1:]))

    def test_sound_against_monte_carlo(self):
        # small version of the soundness sweep; the full one is in acceptance
        rng = np.random.default_rng(30)
        n_mc = 20_000
        for _ in range(100):
            mean = rng.uniform(-2, 2, size=2)
            A = rng.normal(size=(2, 2))
            sigma = A @ A.T + 0.05 * np.eye(2)
            r_sum = rng.uniform(0.2, 1.5)
            robot = mean + rng.uniform(-3, 3, size=2)
            bound = float(_erf_bound(robot - mean, sigma, r_sum))
            pts = rng.multivariate_normal(mean, sigma, size=n_mc)
            hits = np.linalg.norm(pts - robot, axis=1) <= r_sum
            p = hits.mean()
            se = math.sqrt(max(p * (1 - p), 1e-12) / n_mc)
            assert p <= bound + 3 * se

    def test_scale_invariance_isotropic(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            d = rng.uniform(-2, 2, size=2)
            var = rng.uniform(0.01, 1.0)
            r_sum = rng.uniform(0.2, 1.5)
            s = rng.uniform(0.1, 10.0)
            b1 = float(_erf_bound(d, var * np.eye(2), r_sum))
            b2 = float(_erf_bound(s * d, s**2 * var * np.eye(2), s * r_sum))
            assert b2 == pytest.approx(b1, rel=1e-9, abs=1e-12)


class TestPedCollisionCheck:
    def test_no_pedestrians(self):
        assert ped_collision_check((0.0, 0.0), [], 1.0, CFG) is False

    def test_single_bound_above_threshold(self):
        pred = spread_prediction((0.0, 0.0), var=0.3)
        robot = pred.mean_at(1.0) + np.array([CFG.r_sum, 0.0])  # bound 0.5
        assert ped_collision_check(robot, [pred], 1.0, CFG) is True

    def test_max_below_threshold(self):
        # two pedestrians whose individual bounds stay under epsilon
        preds = [spread_prediction((3.0, 0.0), var=0.2),
                 spread_prediction((0.0, 2.5), var=0.2)]
        robot = np.zeros(2)
        bounds = [ped_collision_bound(robot, p, 1.0, CFG) for p in preds]
        assert all(0.0 < b < CFG.epsilon for b in bounds)
        assert ped_collision_check(robot, preds, 1.0, CFG) is False


def wall_grid(wall_x=2.0):
    """Free space with an occupied half-plane x >= wall_x."""
    res = 0.1
    origin = np.array([-1.0, -5.0])
    width, height = 110, 100
    xs = origin[0] + (np.arange(width) + 0.5) * res
    vals = np.tile((xs >= wall_x).astype(float), (height, 1))
    return OccupancyGrid(values=vals, resolution=res, origin=origin)


class TestStaticCollisionCheck:
    def test_free_map(self):
        grid = OccupancyGrid(values=np.zeros((40, 40)), resolution=0.5, origin=(-10, -10))
        for p in ((0.0, 0.0), (3.0, -2.0), (5.0, 5.0)):
            assert static_collision_check(p, grid, CFG) is False

    def test_occupied_map(self):
        grid = OccupancyGrid(values=np.ones((40, 40)), resolution=0.5, origin=(-10, -10))
        assert static_collision_check((0.0, 0.0), grid, CFG) is True

    def test_no_map(self):
        assert static_collision_check((0.0, 0.0), None, CFG) is False

    def test_disk_flip_distance(self):
        # occupied disk of radius 1 at the center of a fine grid
        res = 0.05
        n = 200
        origin = np.array([-5.0, -5.0])
        cx = origin[0] + (np.arange(n) + 0.5) * res
        X, Y = np.meshgrid(cx, cx)
        center = np.array([0.0, 0.0])
        vals = ((X - center[0]) ** 2 + (Y - center[1]) ** 2 <= 1.0).astype(float)
        grid = OccupancyGrid(values=vals, resolution=res, origin=origin)
        flip = 1.0 + CFG.r_robot  # disk radius + robot radius
        for d in np.linspace(0.2, 2.5, 40):
            expected = d <= flip
            got = static_collision_check((d, 0.0), grid, CFG)
            if abs(d - flip) > 2 * res:  # allow one-cell slack at the boundary
                assert got == expected, f"d={d}"


class TestTimeToCollision:
    STATE = RobotState(0.0, 0.0, 0.0)
    U = Control(1.0, 0.0)

    def test_free_space(self):
        assert time_to_collision(self.STATE, self.U, [], None, CFG) == NO_COLLISION

    def test_pedestrian_ahead(self):
        pred = point_prediction((2.0, 0.0))
        tau = time_to_collision(self.STATE, self.U, [pred], None, CFG)
        # first step with center distance below 0.8 is at ~1.2 s
        assert abs(tau - 1.2) <= 0.1 + 1e-9

    def test_wall_ahead(self):
        tau = time_to_collision(self.STATE, self.U, [], wall_grid(2.0), CFG)
        # circle of radius 0.4 grazes the interpolated wall edge near x=2
        assert abs(tau - 1.6) <= 0.1 + 1e-9

    def test_min_of_both(self):
        pred = point_prediction((2.0, 0.0))
        tau_ped = time_to_collision(self.STATE, self.U, [pred], None, CFG)
        tau_wall = time_to_collision(self.STATE, self.U, [], wall_grid(2.0), CFG)
        tau_both = time_to_collision(self.STATE, self.U, [pred], wall_grid(2.0), CFG)
        assert tau_both == min(tau_ped, tau_wall)

    def test_nonincreasing_in_epsilon(self):
        pred = spread_prediction((2.5, 0.0), var=0.5)
        taus = []
        for eps in (0.45, 0.35, 0.25, 0.15, 0.05):
            cfg = CollisionConfig(epsilon=eps)
            taus.append(time_to_collision(self.STATE, self.U, [pred], None, cfg))
        assert all(t2 <= t1 for t1, t2 in zip(taus, taus[1:]))

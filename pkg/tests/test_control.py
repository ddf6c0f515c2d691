"""Unicycle dynamics, rollout, control cost, and the receding-horizon loop."""

import math

import numpy as np
import pytest

from span_nav.collision import CollisionConfig
from span_nav.control import (
    Control,
    ControlProblem,
    EpisodeConfig,
    RobotState,
    constant_control_positions,
    cost,
    rollout,
    run_episode,
    solve_step,
    step_dynamics,
)
from span_nav.crowd import ReplayCrowd
from span_nav.solver import SolverConfig


def arc_position(v, w, t):
    """Closed-form constant-control position from the origin, heading +x."""
    if w == 0.0:
        return np.array([v * t, 0.0])
    return np.array([(v / w) * math.sin(w * t), (v / w) * (1 - math.cos(w * t))])


class TestStepDynamics:
    def test_zero_control_is_identity(self):
        s = RobotState(1.0, 2.0, 0.7)
        assert step_dynamics(s, Control(0.0, 0.0), 0.1) == s

    def test_straight_advance(self):
        s = step_dynamics(RobotState(0.0, 0.0, 0.0), Control(1.0, 0.0), 0.1)
        assert s.x == pytest.approx(0.1) and s.y == 0.0 and s.theta == 0.0

    def test_theta_stays_wrapped(self):
        s = RobotState(0.0, 0.0, 3.0)
        for _ in range(100):
            s = step_dynamics(s, Control(0.5, 1.0), 0.1)
            assert -math.pi <= s.theta < math.pi

    def test_displacement_bounded_by_speed(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            s = RobotState(*rng.uniform(-1, 1, 2), rng.uniform(-3, 3))
            v, w, dt = rng.uniform(-1, 1), rng.uniform(-1, 1), 0.1
            s2 = step_dynamics(s, Control(v, w), dt)
            moved = math.hypot(s2.x - s.x, s2.y - s.y)
            assert moved <= abs(v) * dt + 1e-12


class TestRollout:
    def test_length(self):
        states = rollout(RobotState(0, 0, 0), Control(1.0, 0.2), T=4.0, dt=0.1)
        assert len(states) == 40

    def test_composition(self):
        s0 = RobotState(0.3, -0.2, 0.5)
        u = Control(0.8, 0.6)
        full = rollout(s0, u, T=2.0, dt=0.1)
        half = rollout(s0, u, T=1.0, dt=0.1)
        rest = rollout(half[-1], u, T=1.0, dt=0.1)
        assert full == half + rest

    def test_arc_error_small_and_halving(self):
        v, w, T = 1.0, 1.0, 2.0
        exact = arc_position(v, w, T)
        errs = {}
        for dt in (0.1, 0.05):
            states = rollout(RobotState(0, 0, 0), Control(v, w), T=T, dt=dt)
            final = np.array([states[-1].x, states[-1].y])
            errs[dt] = np.linalg.norm(final - exact)
        assert errs[0.1] <= 0.35
        ratio = errs[0.05] / errs[0.1]
        assert 0.5 * 0.75 <= ratio <= 0.5 * 1.25

    def test_closed_form_positions_match_sequential(self):
        rng = np.random.default_rng(51)
        for _ in range(20):
            s0 = RobotState(*rng.uniform(-2, 2, 2), rng.uniform(-3, 3))
            u = Control(rng.uniform(-1, 1), rng.uniform(0, 1))
            seq = rollout(s0, u, T=3.0, dt=0.1)
            pos = constant_control_positions(s0, u, 30, 0.1)
            seq_pos = np.array([[s.x, s.y] for s in seq])
            np.testing.assert_allclose(pos, seq_pos, atol=1e-12)


class TestCost:
    CFG = CollisionConfig()

    def test_obstacle_free_equals_terminal_distance(self):
        goal = np.array([2.0, 1.0])
        prob = ControlProblem(x0=RobotState(0, 0, 0), goal=goal)
        u = Control(0.7, 0.3)
        pos = constant_control_positions(RobotState(0, 0, 0), u, 40, 0.1)
        expected = np.linalg.norm(pos[-1] - goal)
        assert cost(u, prob) == pytest.approx(expected, rel=1e-12)

    def test_steering_onto_goal_is_near_zero(self):
        # straight ahead at full speed for 4 s lands on a goal 4 m out
        prob = ControlProblem(x0=RobotState(0, 0, 0), goal=[4.0, 0.0])
        assert cost(Control(1.0, 0.0), prob) == pytest.approx(0.0, abs=1e-9)

    def test_collision_term_arithmetic(self):
        # kappa=100 and tau=4.0 adds exactly 25 to the goal term
        from span_nav.collision import PredictionRollout
        from test_collision import point_prediction

        ped = point_prediction((4.0, 0.0))
        prob = ControlProblem(
            x0=RobotState(0, 0, 0), goal=[0.0, 0.0], kappa=100.0, preds=(ped,)
        )
        u = Control(1.0, 0.0)
        # robot reaches distance < 0.8 of (4, 0) first at t ~ 3.3
        from span_nav.collision import first_collision_time

        pos = constant_control_positions(prob.x0, u, 40, 0.1)
        tau = first_collision_time(pos, PredictionRollout([ped], self.CFG), None)
        base = np.linalg.norm(pos[-1])
        assert cost(u, prob) == pytest.approx(base + 100.0 / tau, rel=1e-12)
        assert 100.0 / 4.0 == 25.0  # reference arithmetic for kappa/tau at 4 s


class TestSolveStep:
    def test_goal_straight_ahead(self):
        prob = ControlProblem(x0=RobotState(0, 0, 0), goal=[10.0, 0.0])
        u = solve_step(prob, SolverConfig(), np.random.default_rng(0),
                       restarts=10)
        assert u.v >= 0.9  # within 10% of v_max = 1
        assert abs(u.omega) <= 0.15

    def test_goal_behind_respects_omega_box(self):
        prob = ControlProblem(x0=RobotState(0, 0, 0), goal=[-10.0, 0.0])
        u = solve_step(prob, SolverConfig(), np.random.default_rng(1),
                       restarts=10)
        assert 0.0 - 1e-3 <= u.omega <= 1.0 + 1e-3
        assert -1.0 - 1e-3 <= u.v <= 1.0 + 1e-3

    def test_deterministic_given_seed(self):
        prob = ControlProblem(x0=RobotState(0, 0, 0), goal=[3.0, 2.0])
        a = solve_step(prob, SolverConfig(), np.random.default_rng(7), restarts=5)
        b = solve_step(prob, SolverConfig(), np.random.default_rng(7), restarts=5)
        assert a == b

    def test_always_in_box_random_problems(self):
        rng = np.random.default_rng(52)
        cfg = SolverConfig(max_evals=30)
        for _ in range(100):
            prob = ControlProblem(
                x0=RobotState(*rng.uniform(-3, 3, 2), rng.uniform(-3, 3)),
                goal=rng.uniform(-5, 5, 2),
            )
            u = solve_step(prob, cfg, rng, restarts=3)
            slack = 1e-3  # rho_end in normalized units maps to <= box halfwidth
            assert prob.u_lower[0] - slack <= u.v <= prob.u_upper[0] + slack
            assert prob.u_lower[1] - slack <= u.omega <= prob.u_upper[1] + slack


def empty_world():
    return ReplayCrowd([], p=5, dt=0.1)


class TestRunEpisode:
    def test_start_at_goal(self, trained_model):
        log = run_episode(
            empty_world(), trained_model, RobotState(0, 0, 0), (0.1, 0.0),
            EpisodeConfig(), np.random.default_rng(0),
        )
        assert log.outcome == "success" and len(log.steps) == 0

    def test_straight_run_five_meters(self, trained_model):
        cfg = EpisodeConfig(restarts=8)
        log = run_episode(
            empty_world(), trained_model, RobotState(0, 0, 0), (5.0, 0.0),
            cfg, np.random.default_rng(1),
        )
        assert log.outcome == "success"
        # full speed until ~4 m out, then the terminal-distance cost makes
        # v ~ d/4 optimal and the approach is exponential: ~1 s at v=1 plus
        # ~4 ln(4 / eps_goal) s of deceleration, about 9.3 s in total
        ttg = len(log.steps) * cfg.dt
        assert 4.0 <= ttg <= 10.5
        assert all(s.control.v >= 0.9 for s in log.steps[:10])

    def test_ttg_equals_step_count_times_dt(self, trained_model):
        cfg = EpisodeConfig(restarts=6)
        log = run_episode(
            empty_world(), trained_model, RobotState(0, 0, 0), (2.0, 0.0),
            cfg, np.random.default_rng(2),
        )
        from span_nav.harness import metrics

        m = metrics(log)
        assert m["reached"]
        assert m["ttg_s"] == pytest.approx(len(log.steps) * cfg.dt)

"""Anticipatory crowd navigation.

Predict pedestrian futures as continuous-time stochastic processes,
bound collision probabilities in closed form, and steer a unicycle robot
with a receding-horizon time-to-collision controller.
"""

from .collision import CollisionConfig, ped_collision_bound, ped_collision_check, static_collision_check, time_to_collision
from .control import Control, ControlProblem, EpisodeConfig, RobotState, cost, rollout, run_episode, solve_step, step_dynamics
from .occupancy import OccupancyGrid, load as load_map, query
from .predictor import PredictorModel, TrainConfig, build_dataset, decode, load_model, predict, save_model, train
from .solver import MinimizeResult, SolverConfig, minimize
from .sp import (
    BasisSpec,
    MatrixNormalParams,
    TrajectoryDistribution,
    basis_vector,
    evaluate,
    fit_weights,
    mn_nll,
    point_moments,
    sample_weights,
)

__all__ = [
    "BasisSpec",
    "CollisionConfig",
    "Control",
    "ControlProblem",
    "EpisodeConfig",
    "MatrixNormalParams",
    "MinimizeResult",
    "OccupancyGrid",
    "PredictorModel",
    "RobotState",
    "SolverConfig",
    "TrainConfig",
    "TrajectoryDistribution",
    "basis_vector",
    "build_dataset",
    "cost",
    "decode",
    "evaluate",
    "fit_weights",
    "load_map",
    "load_model",
    "minimize",
    "mn_nll",
    "ped_collision_bound",
    "ped_collision_check",
    "point_moments",
    "predict",
    "query",
    "rollout",
    "run_episode",
    "sample_weights",
    "save_model",
    "solve_step",
    "static_collision_check",
    "step_dynamics",
    "time_to_collision",
    "train",
]

__version__ = "0.1.0"

"""Closed-form collision bounds and time-to-collision.

Builds a pedestrian prediction heading straight at the robot's path,
prints how the per-time collision probability bound falls off with
distance, and shows the time-to-collision the controller sees for a few
candidate controls - all without sampling.
"""

from pathlib import Path

import math

import numpy as np

from span_nav import (
    CollisionConfig,
    Control,
    RobotState,
    load_model,
    ped_collision_bound,
    predict,
    time_to_collision,
)

ROOT = Path(__file__).resolve().parent.parent
model = load_model(ROOT / "scenarios" / "model.bin")
cfg = CollisionConfig()  # epsilon=0.25, both radii 0.4 m

# pedestrian 4 m ahead, walking toward the robot at 0.9 m/s
window = np.array([[4.0 + 0.09 * (4 - i), 0.0] for i in range(5)])
pred = predict(model, window)

print("bound on P(overlap) for a robot standing at x, pedestrian predicted at t=1s:")
mean = pred.mean_at(1.0)
for x in (mean[0], mean[0] + 0.8, mean[0] + 1.2, mean[0] + 2.0, mean[0] + 4.0):
    b = ped_collision_bound([x, 0.0], pred, 1.0, cfg)
    print(f"  robot at ({x:5.2f}, 0.00), gap {x - mean[0]:4.2f} m: bound = {b:.4f}")

print(f"\ntime-to-collision from the origin (threshold epsilon = {cfg.epsilon}):")
state = RobotState(x=0.0, y=0.0, theta=0.0)
for v, omega, label in (
    (1.0, 0.0, "drive straight at the pedestrian"),
    (1.0, 0.5, "arc away to the left"),
    (0.3, 0.0, "creep forward slowly"),
):
    tau = time_to_collision(state, Control(v=v, omega=omega), [pred], None, cfg)
    shown = f"{tau:.1f} s" if math.isfinite(tau) else "none within the 4 s horizon"
    print(f"  v={v:.1f} omega={omega:.1f} ({label}): {shown}")

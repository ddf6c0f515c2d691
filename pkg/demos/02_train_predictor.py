"""Train the pedestrian-motion predictor on a synthetic corpus.

The network maps 0.5 s of observed motion (5 points at 10 Hz, translated so
the last observation is the origin) to a matrix-normal distribution over
basis weights - i.e. a full distribution over the next 4 s of motion.  It
is trained by minimizing the matrix-normal negative log-likelihood of
weights fitted to the actual futures.

Writes artifacts/model.bin; this exact recipe (same seeds, same
hyperparameters) produced the bundled scenarios/model.bin.
"""

from pathlib import Path

import numpy as np

from span_nav import BasisSpec, PredictorModel, TrainConfig, save_model, train
from span_nav.predictor import build_dataset

OUT = Path(__file__).resolve().parent.parent / "artifacts"
OUT.mkdir(exist_ok=True)

# corpus: 1200 constant-velocity walkers with 1 cm observation noise
rng = np.random.default_rng(42)
tracks = []
for _ in range(1200):
    start = rng.uniform(-5.0, 5.0, size=2)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    speed = rng.uniform(0.2, 1.0)
    vel = speed * np.array([np.cos(ang), np.sin(ang)])
    ts = np.arange(0.0, 4.6, 0.1)
    pts = start + ts[:, None] * vel + rng.normal(0.0, 0.01, (ts.size, 2))
    tracks.append((ts, pts))

basis = BasisSpec(m=8, horizon=4.0, gamma=0.01)
X, targets, skipped = build_dataset(tracks, dt=0.1, p=5, basis=basis)
print(f"dataset: {X.shape[0]} window/future pairs ({skipped} tracks too short)")

model = PredictorModel(p=5, basis=basis, rng=np.random.default_rng(0))
cfg = TrainConfig(learning_rate=3e-3, epochs=300, grad_clip=50.0)
curve = train(model, X, targets, cfg, np.random.default_rng(1))
print(f"trained {cfg.epochs} epochs; mean NLL {curve[0]:.2f} -> {curve[-1]:.2f}")

save_model(model, OUT / "model.bin")
print(f"wrote {OUT / 'model.bin'}")

"""Shared fixtures: synthetic corpora, a trained model, scenario files."""

import json

import numpy as np
import pytest

from span_nav.predictor import PredictorModel, TrainConfig, build_dataset, save_model, train
from span_nav.sp import BasisSpec

DT = 0.1
P = 5
HORIZON = 4.0


@pytest.fixture(scope="session")
def basis8():
    return BasisSpec(m=8, horizon=HORIZON, gamma=0.01)


def make_cv_tracks(rng, n_tracks, noise=0.01, duration=4.6):
    """Constant-velocity tracks with small positional noise."""
    tracks = []
    for _ in range(n_tracks):
        start = rng.uniform(-5.0, 5.0, size=2)
        ang = rng.uniform(0.0, 2.0 * np.pi)
        speed = rng.uniform(0.2, 1.0)
        vel = speed * np.array([np.cos(ang), np.sin(ang)])
        ts = np.arange(0.0, duration, DT)
        pts = start + ts[:, None] * vel + rng.normal(0.0, noise, (ts.size, 2))
        tracks.append((ts, pts))
    return tracks


@pytest.fixture(scope="session")
def cv_dataset(basis8):
    """2400 training windows from 1200 constant-velocity tracks."""
    rng = np.random.default_rng(42)
    tracks = make_cv_tracks(rng, 1200)
    X, targets, skipped = build_dataset(tracks, dt=DT, p=P, basis=basis8)
    assert skipped == 0
    return X, targets


@pytest.fixture(scope="session")
def trained_model(basis8, cv_dataset):
    X, targets = cv_dataset
    model = PredictorModel(p=P, basis=basis8, rng=np.random.default_rng(0))
    cfg = TrainConfig(learning_rate=3e-3, epochs=300, grad_clip=50.0)
    train(model, X, targets, cfg, np.random.default_rng(1))
    return model


@pytest.fixture(scope="session")
def model_file(trained_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.bin"
    save_model(trained_model, path)
    return path


def line_track_rows(agent_id, start, vel, t0=0.0, t1=30.0, dt=DT):
    ts = np.arange(t0, t1, dt)
    pts = np.asarray(start, dtype=float) + (ts - t0)[:, None] * np.asarray(vel, dtype=float)
    return [(float(t), agent_id, float(x), float(y)) for t, (x, y) in zip(ts, pts)]


CROSSING_TRACKS = [
    ("a", (3.0, 4.5), (0.0, -0.8)),
    ("b", (4.5, -4.0), (0.0, 0.7)),
    ("c", (6.0, 5.0), (0.0, -0.9)),
    ("d", (5.0, 6.0), (0.0, -0.6)),
]


def write_corpus_csv(path, specs):
    rows = []
    for aid, start, vel in specs:
        rows.extend(line_track_rows(aid, start, vel))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        fh.write("t,agent_id,x,y\n")
        for t, aid, x, y in rows:
            fh.write(f"{t!r},{aid},{x!r},{y!r}\n")


@pytest.fixture(scope="session")
def crossing_scenario(model_file, tmp_path_factory):
    """Empty-map crossing scenario: 4 replayed pedestrians, goal 8 m ahead."""
    d = tmp_path_factory.mktemp("crossing")
    write_corpus_csv(d / "tracks.csv", CROSSING_TRACKS)
    scenario = {
        "version": 1,
        "seed": 7,
        "robot": {"start": [0.0, 0.0, 0.0], "goal": [8.0, 0.0]},
        "pedestrians": {"type": "replay", "corpus": "tracks.csv"},
        "model": str(model_file),
    }
    path = d / "crossing.json"
    path.write_text(json.dumps(scenario, indent=2))
    return path

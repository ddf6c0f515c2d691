"""Learned mapping from short observation windows to trajectory SPs.

A small fully connected network maps the last p observed positions of a
pedestrian (translated so the latest observation is the origin) to the
matrix-normal parameters (M, U, V) of the SP over the next few seconds.
Training minimizes the matrix-normal negative log-likelihood of weight
matrices fitted to the observed futures; gradients are derived by hand,
including the Cholesky-parameterized covariance heads, so no autodiff
framework is needed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .sp import (
    LOG_2PI,
    BasisSpec,
    MatrixNormalParams,
    TrajectoryDistribution,
    fit_weights,
)

_DIAG_FLOOR = 1e-6
_MODEL_MAGIC = b"SPNN"
_MODEL_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 200
    grad_clip: float = 10.0  # global-norm clip; the NLL head spikes near collapsed covariances


def head_size(m: int) -> int:
    """Raw output width: 2m mean entries, m(m+1)/2 for L_U, 3 for L_V."""
    return 2 * m + m * (m + 1) // 2 + 3


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def decode(raw: np.ndarray, m: int) -> MatrixNormalParams:
    """Map a raw network output vector to valid matrix-normal parameters.

    The first 2m values are M (row major); the next m(m+1)/2 fill a lower
    triangular L_U whose diagonal passes through softplus + 1e-6; the last
    3 build L_V the same way.  U = L_U L_U^T and V = L_V L_V^T are positive
    definite for every input.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (head_size(m),):
        raise ValueError(f"raw head must have length {head_size(m)}, got {raw.shape}")
    M, Lu, Lv = _decode_batch(raw[None, :], m)
    return MatrixNormalParams(M=M[0], U=Lu[0] @ Lu[0].T, V=Lv[0] @ Lv[0].T)


def _decode_batch(raw: np.ndarray, m: int):
    """(B, D) raw heads -> M (B, m, 2), L_U (B, m, m), L_V (B, 2, 2)."""
    B = raw.shape[0]
    M = raw[:, : 2 * m].reshape(B, m, 2)

    iu, ju = np.tril_indices(m)
    lu_raw = raw[:, 2 * m : 2 * m + iu.size]
    Lu = np.zeros((B, m, m))
    Lu[:, iu, ju] = lu_raw
    didx = np.arange(m)
    Lu[:, didx, didx] = _softplus(Lu[:, didx, didx]) + _DIAG_FLOOR

    iv, jv = np.tril_indices(2)
    lv_raw = raw[:, 2 * m + iu.size :]
    Lv = np.zeros((B, 2, 2))
    Lv[:, iv, jv] = lv_raw
    dv = np.arange(2)
    Lv[:, dv, dv] = _softplus(Lv[:, dv, dv]) + _DIAG_FLOOR
    return M, Lu, Lv


def _nll_and_grad(raw: np.ndarray, targets: np.ndarray, m: int):
    """Mean matrix-normal NLL over a batch and its gradient w.r.t. raw heads.

    ``raw`` is (B, D), ``targets`` (B, m, 2).  The gradient chains through
    U = L_U L_U^T (dL = 2 G_U L_U, lower triangle, sigmoid on the diagonal
    for the softplus reparameterization) and likewise for V.
    """
    B = raw.shape[0]
    M, Lu, Lv = _decode_batch(raw, m)
    # Invert through the triangular factors; U and V themselves can sit at
    # the diagonal floor and overflow a direct inverse.
    Lu_inv = np.linalg.solve(Lu, np.broadcast_to(np.eye(m), (B, m, m)).copy())
    Lv_inv = np.linalg.solve(Lv, np.broadcast_to(np.eye(2), (B, 2, 2)).copy())
    Uinv = np.swapaxes(Lu_inv, 1, 2) @ Lu_inv
    Vinv = np.swapaxes(Lv_inv, 1, 2) @ Lv_inv
    D = targets - M

    UD = Uinv @ D  # (B, m, 2)
    UDV = UD @ Vinv  # (B, m, 2)
    quad = np.einsum("bij,bij->b", D, UDV)
    logdet_u = 2.0 * np.sum(np.log(np.diagonal(Lu, axis1=1, axis2=2)), axis=1)
    logdet_v = 2.0 * np.sum(np.log(np.diagonal(Lv, axis1=1, axis2=2)), axis=1)
    nll = 0.5 * quad + m * LOG_2PI + 0.5 * m * logdet_v + logdet_u

    # d nll / dM, dU, dV (symmetric gradients).
    G_M = -UDV
    G_U = Uinv - 0.5 * UDV @ np.swapaxes(UD, 1, 2)
    G_V = 0.5 * m * Vinv - 0.5 * np.swapaxes(UDV, 1, 2) @ D @ Vinv

    dLu = 2.0 * G_U @ Lu
    dLv = 2.0 * G_V @ Lv

    iu, ju = np.tril_indices(m)
    didx = np.arange(m)
    lu_raw_diag = raw[:, 2 * m : 2 * m + iu.size][:, np.nonzero(iu == ju)[0]]
    dLu[:, didx, didx] *= _sigmoid(lu_raw_diag)

    iv, jv = np.tril_indices(2)
    dv = np.arange(2)
    lv_raw = raw[:, 2 * m + iu.size :]
    lv_raw_diag = lv_raw[:, np.nonzero(iv == jv)[0]]
    dLv[:, dv, dv] *= _sigmoid(lv_raw_diag)

    grad = np.empty_like(raw)
    grad[:, : 2 * m] = G_M.reshape(B, 2 * m)
    grad[:, 2 * m : 2 * m + iu.size] = dLu[:, iu, ju]
    grad[:, 2 * m + iu.size :] = dLv[:, iv, jv]
    # Mean over the batch.
    return float(np.mean(nll)), grad / B


class PredictorModel:
    """Fully connected tanh network with a matrix-normal output head.

    ``input_scale`` multiplies the relative-frame window features before the
    first layer; at 0.1 s spacing the default turns sub-0.1 m displacements
    into velocity-scale inputs the tanh layers can actually see.
    """

    def __init__(self, p: int, basis: BasisSpec, hidden=(100, 100, 100), rng=None,
                 input_scale: float = 10.0):
        self.p = p
        self.basis = basis
        self.input_scale = float(input_scale)
        sizes = [2 * p, *hidden, head_size(basis.m)]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        if rng is None:
            rng = np.random.default_rng(0)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def forward(self, X: np.ndarray, keep: bool = False):
        """Batch forward pass; ``keep`` retains activations for backprop."""
        h = X * self.input_scale
        acts = [h]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W + b)
            acts.append(h)
        raw = h @ self.weights[-1] + self.biases[-1]
        return (raw, acts) if keep else raw

    def loss_and_gradients(self, X: np.ndarray, targets: np.ndarray):
        """Mean NLL on a batch plus gradients for every weight and bias."""
        raw, acts = self.forward(X, keep=True)
        loss, delta = _nll_and_grad(raw, targets, self.basis.m)
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            gw[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (1.0 - acts[k] ** 2)
        return loss, gw, gb


def train(
    model: PredictorModel,
    X: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Mini-batch SGD with momentum on the matrix-normal NLL.

    Mutates ``model`` in place and returns the per-epoch mean loss curve.
    Raises TrainingDiverged if the loss goes non-finite.
    """
    if X.shape[0] == 0:
        raise ValueError("training set is empty")
    n = X.shape[0]
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    curve: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, gw, gb = model.loss_and_gradients(X[idx], targets[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
            total += loss * idx.size
            if cfg.grad_clip > 0.0:
                gnorm = np.sqrt(
                    sum(float(np.sum(g * g)) for g in gw)
                    + sum(float(np.sum(g * g)) for g in gb)
                )
                if gnorm > cfg.grad_clip:
                    scale = cfg.grad_clip / gnorm
                    gw = [g * scale for g in gw]
                    gb = [g * scale for g in gb]
            for k in range(len(model.weights)):
                vel_w[k] = cfg.momentum * vel_w[k] - cfg.learning_rate * gw[k]
                vel_b[k] = cfg.momentum * vel_b[k] - cfg.learning_rate * gb[k]
                model.weights[k] += vel_w[k]
                model.biases[k] += vel_b[k]
        curve.append(total / n)
    return curve


def window_features(window: np.ndarray) -> np.ndarray:
    """Translate a (p, 2) window to the relative frame and flatten it."""
    window = np.asarray(window, dtype=float)
    return (window - window[-1]).ravel()


def predict(model: PredictorModel, window: np.ndarray) -> TrajectoryDistribution:
    """Predict the SP over the next horizon from one observation window."""
    window = np.asarray(window, dtype=float)
    if window.shape != (model.p, 2):
        raise ValueError(f"window must be ({model.p}, 2), got {window.shape}")
    return predict_batch(model, [window])[0]


def predict_batch(model: PredictorModel, windows) -> list[TrajectoryDistribution]:
    """Predict SPs for many windows with one forward pass."""
    if len(windows) == 0:
        return []
    X = np.stack([window_features(w) for w in windows])
    raw = model.forward(X)
    m = model.basis.m
    M, Lu, Lv = _decode_batch(raw, m)
    out = []
    for i, w in enumerate(windows):
        params = MatrixNormalParams(M=M[i], U=Lu[i] @ Lu[i].T, V=Lv[i] @ Lv[i].T)
        out.append(
            TrajectoryDistribution(
                params=params, basis=model.basis, anchor=np.asarray(w, dtype=float)[-1]
            )
        )
    return out


def resample_track(times, points, dt: float):
    """Linearly resample a timestamped track onto a uniform dt grid."""
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    if times.size < 2:
        return times, points
    grid = np.arange(times[0], times[-1] + 1e-9, dt)
    x = np.interp(grid, times, points[:, 0])
    y = np.interp(grid, times, points[:, 1])
    return grid, np.stack([x, y], axis=-1)


def build_dataset(tracks, dt: float, p: int, basis: BasisSpec, lam: float = 1e-4):
    """Sliding-window training pairs from timestamped trajectories.

    ``tracks`` is a sequence of (times, points) arrays.  Each track is
    resampled to uniform ``dt``; every window of p observations whose
    future covers the basis horizon yields one pair: the window translated
    so its last point is the origin, and the weight matrix fitted (in that
    frame, time rebased to 0) to the subsequent horizon.

    Returns (X, targets, skipped) where X is (N, 2p), targets (N, m, 2) and
    skipped counts tracks too short to produce any pair.
    """
    future_steps = int(round(basis.horizon / dt))
    xs, ws = [], []
    skipped = 0
    for times, points in tracks:
        _, pts = resample_track(times, points, dt)
        n = pts.shape[0]
        if n < p + future_steps:
            skipped += 1
            continue
        for i in range(p - 1, n - future_steps):
            anchor = pts[i]
            window = pts[i - p + 1 : i + 1] - anchor
            fut_t = dt * np.arange(0, future_steps + 1)
            fut_p = pts[i : i + future_steps + 1] - anchor
            W = fit_weights(fut_t, fut_p, basis, lam)
            xs.append(window.ravel())
            ws.append(W)
    if not xs:
        return np.zeros((0, 2 * p)), np.zeros((0, basis.m, 2)), skipped
    return np.stack(xs), np.stack(ws), skipped


def save_model(model: PredictorModel, path) -> None:
    """Write a model file: versioned header, dimensions, then f64 params.

    Layout (little endian): magic "SPNN", u32 version, u32 p, u32 m,
    f64 gamma, f64 horizon, f64 input scale, u32 layer count, u32 sizes,
    then for each layer the weight matrix (row major) followed by the bias
    vector as f64.
    """
    sizes = model.layer_sizes
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<III", _MODEL_VERSION, model.p, model.basis.m))
        fh.write(struct.pack("<ddd", model.basis.gamma, model.basis.horizon, model.input_scale))
        fh.write(struct.pack("<I", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for W, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> PredictorModel:
    """Read a model file written by save_model."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a predictor model file (magic {magic!r})")
        version, p, m = struct.unpack("<III", fh.read(12))
        if version != _MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        gamma, horizon, input_scale = struct.unpack("<ddd", fh.read(24))
        (n_sizes,) = struct.unpack("<I", fh.read(4))
        sizes = list(struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes)))
        basis = BasisSpec(m=m, horizon=horizon, gamma=gamma)
        model = PredictorModel(p=p, basis=basis, hidden=tuple(sizes[1:-1]), input_scale=input_scale)
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            W = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            b = np.frombuffer(fh.read(8 * fan_out), dtype="<f8")
            if W.size != fan_in * fan_out or b.size != fan_out:
                raise ValueError(f"{path}: truncated parameter block for layer {k}")
            model.weights[k] = W.reshape(fan_in, fan_out).copy()
            model.biases[k] = b.copy()
    return model

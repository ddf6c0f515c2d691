"""Continuous-time stochastic-process representation of 2-D trajectories.

A trajectory is a weighted sum of squared-exponential basis functions in
time, o(t) = W^T phi(t), with W an m x 2 weight matrix.  A distribution
over trajectories is obtained by giving W a matrix normal distribution
MN(M, U, V); the position at any time t is then Gaussian with mean
M^T phi(t) and covariance (phi^T U phi) * V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class SingularSystemError(ValueError):
    """Raised when an unregularized least-squares system is rank deficient."""


@dataclass(frozen=True)
class BasisSpec:
    """Squared-exponential basis layout over the prediction horizon.

    ``m`` basis functions with centers evenly spaced on [0, horizon] and
    shared length-scale coefficient ``gamma``:
    phi_i(t) = exp(-gamma * (t - c_i)^2).
    """

    m: int
    horizon: float
    gamma: float
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"need at least one basis function, got m={self.m}")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        centers = np.linspace(0.0, self.horizon, self.m)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)


def basis_vector(t, basis: BasisSpec) -> np.ndarray:
    """Evaluate all basis functions at time(s) ``t``.

    Scalar ``t`` gives an (m,) vector; an array of k times gives a (k, m)
    design matrix.  Components are always in (0, 1].
    """
    t = np.asarray(t, dtype=float)
    diff = t[..., None] - basis.centers
    return np.exp(-basis.gamma * diff * diff)


def evaluate(W: np.ndarray, basis: BasisSpec, t) -> np.ndarray:
    """Deterministic trajectory position W^T phi(t); (2,) or (k, 2)."""
    W = np.asarray(W, dtype=float)
    if W.shape != (basis.m, 2):
        raise ValueError(f"weight matrix shape {W.shape} does not match (m, 2)=({basis.m}, 2)")
    return basis_vector(t, basis) @ W


def fit_weights(times, points, basis: BasisSpec, lam: float = 1e-4) -> np.ndarray:
    """Fit an m x 2 weight matrix to timestamped 2-D points by ridge least squares.

    Minimizes sum_i ||p_i - W^T phi(t_i)||^2 + lam * ||vec(W)||^2 in closed
    form via the regularized normal equations (Cholesky), falling back to an
    orthogonal factorization when the system is badly conditioned.

    With ``lam == 0`` the design matrix must have full column rank;
    otherwise SingularSystemError is raised.
    """
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    if times.ndim != 1 or points.shape != (times.size, 2):
        raise ValueError("times must be (n,) and points (n, 2)")
    if times.size == 0:
        raise ValueError("need at least one point to fit")
    if lam < 0.0:
        raise ValueError(f"lam must be nonnegative, got {lam}")

    Phi = basis_vector(times, basis)  # (n, m)
    if lam == 0.0:
        W, _, rank, _ = np.linalg.lstsq(Phi, points, rcond=None)
        if rank < basis.m:
            raise SingularSystemError(
                f"design matrix rank {rank} < m={basis.m} with lam=0"
            )
        return W

    A = Phi.T @ Phi + lam * np.eye(basis.m)
    if np.linalg.cond(A) > 1e12:
        # Augmented system [Phi; sqrt(lam) I] keeps the ridge solution
        # while avoiding the squared condition number of A.
        aug = np.vstack([Phi, math.sqrt(lam) * np.eye(basis.m)])
        rhs = np.vstack([points, np.zeros((basis.m, 2))])
        W, _, _, _ = np.linalg.lstsq(aug, rhs, rcond=None)
        return W
    L = np.linalg.cholesky(A)
    half = np.linalg.solve(L, Phi.T @ points)
    return np.linalg.solve(L.T, half)


@dataclass(frozen=True)
class MatrixNormalParams:
    """Matrix normal MN(M, U, V) over m x 2 weight matrices.

    M is the mean, U the m x m among-row covariance and V the 2 x 2
    among-column covariance; both must be symmetric positive definite.
    """

    M: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        U = np.asarray(self.U, dtype=float)
        V = np.asarray(self.V, dtype=float)
        m = M.shape[0]
        if M.ndim != 2 or M.shape[1] != 2:
            raise ValueError(f"M must be (m, 2), got {M.shape}")
        if U.shape != (m, m):
            raise ValueError(f"U must be ({m}, {m}), got {U.shape}")
        if V.shape != (2, 2):
            raise ValueError(f"V must be (2, 2), got {V.shape}")
        if not (np.isfinite(M).all() and np.isfinite(U).all() and np.isfinite(V).all()):
            raise ValueError("matrix normal parameters must be finite")
        if not np.allclose(U, U.T) or not np.allclose(V, V.T):
            raise ValueError("U and V must be symmetric")
        try:
            np.linalg.cholesky(U)
            np.linalg.cholesky(V)
        except np.linalg.LinAlgError as exc:
            raise ValueError("U and V must be positive definite") from exc
        for arr in (M, U, V):
            arr.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def m(self) -> int:
        return self.M.shape[0]


def point_moments(params: MatrixNormalParams, basis: BasisSpec, t):
    """Gaussian moments of the trajectory position at time ``t``.

    Returns (mean, cov) with mean = M^T phi(t) and cov = (phi^T U phi) V.
    Vectorizes over an array of times: shapes (k, 2) and (k, 2, 2).
    """
    phi = basis_vector(t, basis)
    mean = phi @ params.M
    scale = np.einsum("...i,ij,...j->...", phi, params.U, phi)
    cov = np.asarray(scale)[..., None, None] * params.V
    return mean, cov


def sample_weights(params: MatrixNormalParams, rng: np.random.Generator, size=None):
    """Draw weight matrices W = M + A Z B^T with A A^T = U, B B^T = V.

    ``size=None`` gives one (m, 2) sample, an integer n gives (n, m, 2).
    Deterministic given the generator state.
    """
    A = np.linalg.cholesky(params.U)
    B = np.linalg.cholesky(params.V)
    shape = (params.m, 2) if size is None else (size, params.m, 2)
    Z = rng.standard_normal(shape)
    return params.M + A @ Z @ B.T


def mn_nll(params: MatrixNormalParams, W: np.ndarray) -> float:
    """Negative log-density of W under MN(M, U, V).

    0.5 tr[V^-1 (W-M)^T U^-1 (W-M)] + m ln(2 pi) + (m/2) ln|V| + ln|U|.
    """
    W = np.asarray(W, dtype=float)
    if W.shape != params.M.shape:
        raise ValueError(f"W shape {W.shape} does not match M shape {params.M.shape}")
    m = params.m
    Lu = np.linalg.cholesky(params.U)
    Lv = np.linalg.cholesky(params.V)
    D = W - params.M
    # tr[V^-1 D^T U^-1 D] = ||Lu^-1 D Lv^-T||_F^2
    half = np.linalg.solve(Lu, D)
    half = np.linalg.solve(Lv, half.T).T
    quad = float(np.sum(half * half))
    logdet_u = 2.0 * float(np.sum(np.log(np.diag(Lu))))
    logdet_v = 2.0 * float(np.sum(np.log(np.diag(Lv))))
    return 0.5 * quad + m * LOG_2PI + 0.5 * m * logdet_v + logdet_u


@dataclass(frozen=True)
class TrajectoryDistribution:
    """A matrix-normal SP over trajectories anchored in the world frame.

    ``params`` and ``basis`` live in a relative frame whose origin is
    ``anchor`` (the last observed position); the world-frame mean at time t
    is anchor + M^T phi(t), and the covariance is frame independent.
    """

    params: MatrixNormalParams
    basis: BasisSpec
    anchor: np.ndarray

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=float)
        if anchor.shape != (2,):
            raise ValueError(f"anchor must be a 2-D point, got shape {anchor.shape}")
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)

    def mean_at(self, t):
        mean, _ = point_moments(self.params, self.basis, t)
        return mean + self.anchor

    def cov_at(self, t):
        _, cov = point_moments(self.params, self.basis, t)
        return cov

    def sample_paths(self, rng: np.random.Generator, ts, size: int):
        """Sample ``size`` world-frame trajectories evaluated at times ``ts``."""
        W = sample_weights(self.params, rng, size=size)
        Phi = basis_vector(np.asarray(ts, dtype=float), self.basis)
        return Phi @ W + self.anchor

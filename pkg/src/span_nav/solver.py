"""Derivative-free box-constrained local optimizer.

Thin deterministic wrapper around COBYLA (linear approximations over a
simplex in a shrinking trust region).  Variables are normalized to
[-1, 1]^n so the trust radii are scale free, every objective evaluation is
recorded, and the best box-feasible point seen is returned rather than the
solver's final iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _scipy_minimize


@dataclass(frozen=True)
class SolverConfig:
    """Trust-region radii (in normalized units) and evaluation budget."""

    rho_begin: float = 0.25
    rho_end: float = 1e-3
    max_evals: int = 100

    def __post_init__(self):
        if not 0.0 < self.rho_end <= self.rho_begin:
            raise ValueError("need 0 < rho_end <= rho_begin")
        if self.max_evals < 4:
            raise ValueError(f"max_evals too small: {self.max_evals}")


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    evals: int
    budget_exhausted: bool


def minimize(objective, x0, lower, upper, cfg: SolverConfig = SolverConfig()) -> MinimizeResult:
    """Minimize a black-box function over a box.

    Returns the best point seen whose box violation (in normalized units)
    is within cfg.rho_end, or the least-infeasible point if none qualifies.
    Ties in objective value break toward the lexicographically smaller
    point, so identical inputs always give identical output.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if lower.shape != (n,) or upper.shape != (n,) or np.any(lower > upper):
        raise ValueError("bounds must match x0 and satisfy lower <= upper")

    center = 0.5 * (lower + upper)
    halfwidth = np.maximum(0.5 * (upper - lower), 1e-12)

    def to_unit(x):
        return (x - center) / halfwidth

    def from_unit(z):
        return center + z * halfwidth

    best: dict = {"x": None, "f": np.inf, "viol": np.inf}
    evals = 0
    exhausted = False

    def record(z, f):
        viol = float(np.max(np.abs(z)) - 1.0)
        viol = max(viol, 0.0)
        feasible = viol <= cfg.rho_end
        if best["viol"] <= cfg.rho_end and not feasible:
            return
        better = (
            (feasible and best["viol"] > cfg.rho_end)
            or (feasible and f < best["f"])
            or (not feasible and best["viol"] > cfg.rho_end and viol < best["viol"])
        )
        if not better and feasible and f == best["f"] and best["x"] is not None:
            better = tuple(z) < tuple(best["x"])
        if better:
            best["x"] = np.array(z)
            best["f"] = f
            best["viol"] = viol

    def wrapped(z):
        nonlocal evals
        evals += 1
        f = float(objective(from_unit(np.clip(z, -1.0, 1.0))))
        record(z, f)
        return f

    cons = [
        {"type": "ineq", "fun": lambda z, i=i: 1.0 - z[i]} for i in range(n)
    ] + [
        {"type": "ineq", "fun": lambda z, i=i: 1.0 + z[i]} for i in range(n)
    ]

    z0 = np.clip(to_unit(x0), -1.0, 1.0)
    # COBYLA's maxiter counts objective evaluations, so it enforces the
    # budget directly.
    _scipy_minimize(
        wrapped,
        z0,
        method="COBYLA",
        constraints=cons,
        options={
            "rhobeg": cfg.rho_begin,
            "maxiter": cfg.max_evals,
            "tol": cfg.rho_end,
        },
    )
    exhausted = evals >= cfg.max_evals

    if best["x"] is None:  # objective never evaluated cleanly; fall back to x0
        zb = z0
        fb = float(objective(from_unit(zb)))
    else:
        zb = np.clip(best["x"], -1.0, 1.0)
        fb = best["f"]
    return MinimizeResult(x=from_unit(zb), fun=fb, evals=evals, budget_exhausted=exhausted)

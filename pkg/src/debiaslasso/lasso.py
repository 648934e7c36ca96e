"""Lasso by cyclic coordinate descent with warm-started paths.

The objective is ``(1/n) ||y - X b||^2 + 2 lam ||b||_1``; its KKT threshold
is ``lam`` itself, so ``lam`` values coincide with those of the common
``(1/2n) RSS + lam ||b||_1`` parameterisation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _cd
from .data import Dataset
from .errors import DegenerateError

__all__ = [
    "SolverConfig",
    "LassoFit",
    "LambdaGrid",
    "fit_lasso",
    "solve_lasso",
    "lambda_max",
    "lambda_path",
    "fit_path",
    "solve_path",
    "kkt_violation",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-9
    max_sweeps: int = 100_000
    kkt_tol: float = 1e-7
    polish_every: int = 10
    check_descent: bool = False

    def __post_init__(self):
        if not (self.tol > 0 and self.max_sweeps > 0 and self.kkt_tol > 0 and self.polish_every > 0):
            raise ValueError("solver tolerances and limits must be positive")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True, eq=False)
class LassoFit:
    beta: np.ndarray
    lam: float
    iterations: int
    converged: bool
    objective: float
    intercept: float = 0.0

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


@dataclass(frozen=True, eq=False)
class LambdaGrid:
    """Strictly decreasing positive penalty levels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size == 0:
            raise ValueError("lambda grid is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("lambda grid values must be finite and positive")
        if np.any(np.diff(v) >= 0):
            raise ValueError("lambda grid must be strictly decreasing (no duplicates)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values.tolist())


def _prepare(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    return X, y


def solve_lasso(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    warm: np.ndarray | None = None,
) -> LassoFit:
    """Array-level Lasso fit; ``X`` and ``y`` are taken as already centered."""
    X, y = _prepare(X, y)
    lam = float(lam)
    if not lam >= 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    p = X.shape[1]
    if warm is None:
        beta = np.zeros(p)
    else:
        beta = np.array(warm, dtype=np.float64)
        if beta.shape != (p,):
            raise ValueError(f"warm start has shape {beta.shape}, expected ({p},)")
    sweeps, converged, descent_ok = _cd.coordinate_descent(
        X, y, beta, lam, cfg.tol, cfg.max_sweeps, cfg.kkt_tol, cfg.polish_every, cfg.check_descent
    )
    if cfg.check_descent and not descent_ok:
        raise AssertionError(f"objective increased during a sweep at lambda={lam}")
    if not converged:
        logger.warning(
            "lasso did not converge at lambda=%.3g after %d sweeps (KKT violation %.2e)",
            lam,
            sweeps,
            _cd.kkt_violation(X, y, beta, lam),
        )
    beta.setflags(write=False)
    return LassoFit(
        beta=beta,
        lam=lam,
        iterations=int(sweeps),
        converged=bool(converged),
        objective=float(_cd.objective(X, y, beta, lam)),
    )


def fit_lasso(
    d: Dataset,
    lam: float,
    cfg: SolverConfig = DEFAULT_CONFIG,
    warm: np.ndarray | None = None,
) -> LassoFit:
    """Fit the Lasso on a centered dataset at penalty ``lam``."""
    if not d.centered:
        raise ValueError("fit_lasso expects a centered dataset")
    return solve_lasso(d.X, d.y, lam, cfg, warm)


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the all-zero vector solves the problem."""
    return float(np.max(np.abs(X.T @ y)) / X.shape[0])


def _geometric_grid(top: float, count: int, ratio: float) -> LambdaGrid:
    if count < 2:
        raise ValueError("a lambda path needs at least 2 values")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if not top > 0:
        raise DegenerateError("lambda_max is zero: the response is orthogonal to every column")
    return LambdaGrid(np.geomspace(top, ratio * top, count))


def lambda_path(d: Dataset, count: int = 100, ratio: float = 1e-4) -> LambdaGrid:
    """Log-spaced grid from ``lambda_max`` down to ``ratio * lambda_max``."""
    if not d.centered:
        raise ValueError("lambda_path expects a centered dataset")
    return _geometric_grid(lambda_max(d.X, d.y), count, ratio)


def default_path_ratio(n: int, p: int) -> float:
    """glmnet's default ``lambda.min.ratio``."""
    return 0.01 if n < p else 1e-4


def solve_path(
    X: np.ndarray,
    y: np.ndarray,
    grid: LambdaGrid | Sequence[float],
    cfg: SolverConfig = DEFAULT_CONFIG,
    warm: np.ndarray | None = None,
) -> list[LassoFit]:
    """Fits in grid order, each warm-started from its predecessor."""
    X, y = _prepare(X, y)
    values = grid.values if isinstance(grid, LambdaGrid) else np.asarray(grid, dtype=float)
    if values.size == 0:
        raise ValueError("lambda grid is empty")
    fits = []
    prev = warm
    for lam in values:
        fit = solve_lasso(X, y, lam, cfg, prev)
        fits.append(fit)
        prev = fit.beta
    return fits


def fit_path(d: Dataset, grid: LambdaGrid, cfg: SolverConfig = DEFAULT_CONFIG) -> list[LassoFit]:
    if not d.centered:
        raise ValueError("fit_path expects a centered dataset")
    return solve_path(d.X, d.y, grid, cfg)


def kkt_violation(d: Dataset, fit: LassoFit) -> float:
    """Largest breach of the Lasso stationarity conditions (0 at an exact solution)."""
    X, y = _prepare(d.X, d.y)
    beta = np.ascontiguousarray(fit.beta, dtype=np.float64)
    if beta.shape != (X.shape[1],):
        raise ValueError("fit does not match the dataset's column count")
    return max(0.0, float(_cd.kkt_violation(X, y, beta, float(fit.lam))))

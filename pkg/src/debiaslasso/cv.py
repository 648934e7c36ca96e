"""K-fold cross-validation over a lambda grid (min-MSE and one-SE choices)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .lasso import DEFAULT_CONFIG, LambdaGrid, SolverConfig, solve_path

__all__ = ["CvResult", "fold_labels", "kfold_cv", "cv_arrays"]


@dataclass(frozen=True, eq=False)
class CvResult:
    lambdas: np.ndarray
    mse: np.ndarray
    se: np.ndarray
    fold_assignment: np.ndarray
    lambda_min: float
    lambda_1se: float

    @property
    def index_min(self) -> int:
        return int(np.flatnonzero(self.lambdas == self.lambda_min)[0])

    @property
    def index_1se(self) -> int:
        return int(np.flatnonzero(self.lambdas == self.lambda_1se)[0])


def fold_labels(n: int, k: int, seed: int) -> np.ndarray:
    """Shuffle rows with ``seed``, then cut into ``k`` contiguous near-equal blocks."""
    if not 2 <= k <= n:
        raise ValueError(f"fold count must lie in [2, n={n}], got {k}")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    for f, block in enumerate(np.array_split(order, k)):
        if block.size < 2:
            raise ValueError(f"fold {f} would hold {block.size} row(s); need at least 2")
        labels[block] = f
    return labels


def _choose(lambdas: np.ndarray, mse: np.ndarray, se: np.ndarray) -> tuple[int, int]:
    # lambdas are decreasing, so the first index among ties is the largest lambda
    i_min = int(np.flatnonzero(mse == mse.min())[0])
    i_1se = int(np.flatnonzero(mse <= mse[i_min] + se[i_min])[0])
    return i_min, i_1se


def cv_arrays(
    X: np.ndarray,
    y: np.ndarray,
    grid: LambdaGrid,
    k: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CvResult:
    """Cross-validate the Lasso of ``y`` on ``X``.

    Each training block is re-centered; held-out rows are predicted with the
    training means, so no information leaks from the held-out block.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    labels = fold_labels(n, k, seed)
    lambdas = grid.values
    fold_mse = np.empty((k, lambdas.size))
    for f in range(k):
        test = labels == f
        Xtr, ytr = X[~test], y[~test]
        xm, ym = Xtr.mean(axis=0), ytr.mean()
        fits = solve_path(Xtr - xm, ytr - ym, grid, cfg)
        B = np.column_stack([fit.beta for fit in fits])
        resid = (y[test] - ym)[:, None] - (X[test] - xm) @ B
        fold_mse[f] = np.mean(resid**2, axis=0)
    mse = fold_mse.mean(axis=0)
    se = fold_mse.std(axis=0, ddof=1) / np.sqrt(k)
    i_min, i_1se = _choose(lambdas, mse, se)
    labels.setflags(write=False)
    return CvResult(
        lambdas=lambdas,
        mse=mse,
        se=se,
        fold_assignment=labels,
        lambda_min=float(lambdas[i_min]),
        lambda_1se=float(lambdas[i_1se]),
    )


def kfold_cv(
    d: Dataset,
    grid: LambdaGrid,
    k: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> CvResult:
    return cv_arrays(d.X, d.y, grid, k, seed, cfg)

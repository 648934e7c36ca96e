"""Slow but independent reference computations used by the tests."""

from __future__ import annotations

import itertools

import numpy as np

from debiaslasso.data import Dataset, center


def centered(X, y) -> Dataset:
    X = np.asarray(X, dtype=float)
    d, _ = center(Dataset(y=np.asarray(y, dtype=float), X=X, column_names=tuple(f"x{k}" for k in range(X.shape[1]))))
    return d


def random_centered(n, p, seed, signal=None) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    k = min(p, 5) if signal is None else signal
    beta[:k] = rng.uniform(0.5, 2.0, k) * rng.choice([-1.0, 1.0], k)
    y = X @ beta + rng.standard_normal(n)
    return centered(X, y)


def objective(X, y, beta, lam) -> float:
    r = y - X @ beta
    return float(r @ r / X.shape[0] + 2.0 * lam * np.abs(beta).sum())


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def projected_gradient(X, y, lam, iters=200_000, tol=1e-15) -> np.ndarray:
    """Lasso via projected gradient on ``beta = u - v`` with ``u, v >= 0``.

    The split problem is a smooth bound-constrained quadratic, so projection
    onto the nonnegative orthant is exact.
    """
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    L = 2.0 * np.linalg.eigvalsh(G)[-1] + 1e-12
    step = 1.0 / L
    u = np.zeros(p)
    v = np.zeros(p)
    for _ in range(iters):
        g = 2.0 * (G @ (u - v) - c)
        u_new = np.maximum(u - step * (g + 2.0 * lam), 0.0)
        v_new = np.maximum(v - step * (-g + 2.0 * lam), 0.0)
        delta = max(np.abs(u_new - u).max(), np.abs(v_new - v).max())
        u, v = u_new, v_new
        if delta < tol:
            break
    return u - v


def enumerate_lasso(X, y, lam) -> np.ndarray:
    """Exact minimiser for small p: try every support and sign pattern."""
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    best, best_obj = np.zeros(p), objective(X, y, np.zeros(p), lam)
    for k in range(1, p + 1):
        for S in itertools.combinations(range(p), k):
            S = list(S)
            for signs in itertools.product([-1.0, 1.0], repeat=k):
                s = np.array(signs)
                try:
                    b = np.linalg.solve(G[np.ix_(S, S)], c[S] - lam * s)
                except np.linalg.LinAlgError:
                    continue
                if np.any(b * s <= 0):
                    continue
                beta = np.zeros(p)
                beta[S] = b
                obj = objective(X, y, beta, lam)
                if obj < best_obj:
                    best, best_obj = beta, obj
    return best

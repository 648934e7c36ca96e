"""Compiled kernels for cyclic coordinate descent on

    (1/n) ||y - X b||^2 + 2 lam ||b||_1

whose stationarity threshold is ``lam``.  ``X`` must be Fortran ordered.

Plain coordinate descent stalls when the active set approaches rank n (tiny
``lam`` with p > n).  Every few active-set sweeps the kernel therefore tries
an exact step on the current support: it solves the sign-restricted normal
equations and moves toward that solution, dropping any coordinate that
crosses zero.  If the active columns are rank deficient it moves along a
null direction instead, which drops a coordinate without raising the
objective.  Every step is a descent step, so the sweep-level objective is
still nonincreasing.
"""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit
from numba.core.errors import NumbaPerformanceWarning

# a single-column array is both C and F contiguous; numba types it as C and
# then warns about strided column slices, which are harmless at that size
warnings.filterwarnings("ignore", message=r"np\.dot\(\) is faster on contiguous arrays", category=NumbaPerformanceWarning)


@njit(cache=True)
def _sweep(X, r, beta, colsq, lam, idx, n):
    dmax = 0.0
    for j in idx:
        cj = colsq[j]
        if cj == 0.0:
            continue
        bj = beta[j]
        xj = X[:, j]
        z = np.dot(xj, r) / n + cj * bj
        if z > lam:
            new = (z - lam) / cj
        elif z < -lam:
            new = (z + lam) / cj
        else:
            new = 0.0
        d = new - bj
        if d != 0.0:
            r -= d * xj
            beta[j] = new
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True)
def objective(X, y, beta, lam):
    r = y - X @ beta
    return np.dot(r, r) / X.shape[0] + 2.0 * lam * np.sum(np.abs(beta))


@njit(cache=True)
def kkt_violation(X, y, beta, lam):
    n, p = X.shape
    g = X.T @ (y - X @ beta) / n
    worst = 0.0
    for j in range(p):
        if beta[j] > 0.0:
            v = abs(g[j] - lam)
        elif beta[j] < 0.0:
            v = abs(g[j] + lam)
        else:
            v = abs(g[j]) - lam
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def _polish(X, y, beta, lam):
    """Feature-sign refinement on the current support.

    Returns True when ``beta`` ends on the exact minimiser restricted to
    its support and signs.  On False, ``beta`` may still have moved
    (always downhill).
    """
    n, p = X.shape
    for _ in range(2 * p + 2):
        idx = np.nonzero(beta)[0]
        k = idx.size
        if k == 0:
            return True
        XA = np.empty((n, k))
        for i in range(k):
            XA[:, i] = X[:, idx[i]]
        s = np.sign(beta[idx])
        cur = beta[idx]
        solved = False
        bA = np.empty(k)
        if k < n:
            G = XA.T @ XA / n
            try:
                L = np.linalg.cholesky(G)
                rhs = XA.T @ y / n - lam * s
                bA = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
                solved = np.all(np.isfinite(bA))
            except Exception:  # noqa: BLE001 - numba only exposes the generic error
                solved = False
        if solved:
            t = 1.0
            hit = -1
            for i in range(k):
                if bA[i] * s[i] <= 0.0:
                    ti = cur[i] / (cur[i] - bA[i])
                    if ti < t:
                        t = ti
                        hit = i
            if hit < 0:
                for i in range(k):
                    beta[idx[i]] = bA[i]
                return True
            d = bA - cur
        else:
            _, sv, vt = np.linalg.svd(XA)
            if k <= n and sv[k - 1] > 1e-10 * sv[0]:
                return False
            d = vt[k - 1].copy()
            grad = -(XA.T @ (y - XA @ cur)) / n + lam * s
            if np.dot(grad, d) > 0.0:
                d = -d
            t = np.inf
            hit = -1
            for i in range(k):
                if d[i] * s[i] < 0.0:
                    ti = -cur[i] / d[i]
                    if ti < t:
                        t = ti
                        hit = i
            if hit < 0:
                # direction is flat for the objective; walk the other way
                d = -d
                for i in range(k):
                    if d[i] * s[i] < 0.0:
                        ti = -cur[i] / d[i]
                        if ti < t:
                            t = ti
                            hit = i
            if hit < 0:
                return False
        for i in range(k):
            v = cur[i] + t * d[i]
            if i == hit or v * s[i] <= 0.0:
                v = 0.0
            beta[idx[i]] = v
    return False


@njit(cache=True)
def coordinate_descent(X, y, beta, lam, tol, max_sweeps, kkt_tol, polish_every, check_descent):
    """Minimise in place starting from ``beta``.

    Returns ``(sweeps, converged, descent_ok)``.  Convergence means a full
    sweep moved no coefficient by more than ``tol`` and the KKT violation is
    at most ``kkt_tol``.
    """
    n, p = X.shape
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = np.dot(X[:, j], X[:, j]) / n
        if colsq[j] == 0.0:
            beta[j] = 0.0
    r = y - X @ beta
    allidx = np.arange(p)
    sweeps = 0
    descent_ok = True
    prev = np.inf
    if check_descent:
        prev = np.dot(r, r) / n + 2.0 * lam * np.sum(np.abs(beta))
    while sweeps < max_sweeps:
        dmax = _sweep(X, r, beta, colsq, lam, allidx, n)
        sweeps += 1
        if check_descent:
            cur = np.dot(r, r) / n + 2.0 * lam * np.sum(np.abs(beta))
            if cur > prev + 1e-12 * (1.0 + abs(prev)):
                descent_ok = False
            prev = cur
        if dmax < tol:
            _polish(X, y, beta, lam)
            r[:] = y - X @ beta
            if kkt_violation(X, y, beta, lam) <= kkt_tol:
                return sweeps, True, descent_ok
            continue
        idx = np.nonzero(beta)[0]
        inner = 0
        while sweeps < max_sweeps:
            dmax = _sweep(X, r, beta, colsq, lam, idx, n)
            sweeps += 1
            inner += 1
            if check_descent:
                cur = np.dot(r, r) / n + 2.0 * lam * np.sum(np.abs(beta))
                if cur > prev + 1e-12 * (1.0 + abs(prev)):
                    descent_ok = False
                prev = cur
            if dmax < tol:
                break
            if inner % polish_every == 0:
                done = _polish(X, y, beta, lam)
                r[:] = y - X @ beta
                if done:
                    break
                idx = np.nonzero(beta)[0]
    return sweeps, False, descent_ok

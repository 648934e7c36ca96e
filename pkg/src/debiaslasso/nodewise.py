"""Node-wise Lasso for one column of the precision matrix.

Regressing column ``j`` on the others with penalty ``lam`` gives

    gamma             the node-wise coefficients
    tau_tilde_sq      ||X_j - X_{-j} gamma||^2 / n
    tau_hat_sq        tau_tilde_sq + lam ||gamma||_1
    theta             (1, -gamma) / tau_hat_sq, placed back in column order

from which the variance factor ``omega = theta' S theta`` (S = X'X/n) and the
bias factor ``f = ||S theta - e_j||_inf / sqrt(omega)`` follow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError
from .lasso import DEFAULT_CONFIG, LambdaGrid, SolverConfig, solve_lasso

__all__ = [
    "NodewiseFit",
    "TuneTrace",
    "nodewise_problem",
    "nodewise_lambda_max",
    "fit_nodewise",
    "omega",
    "omega_from_tau",
    "bias_factor",
    "trace_grid",
]

_TAU_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class NodewiseFit:
    target_index: int
    gamma: np.ndarray
    lam: float
    tau_tilde_sq: float
    tau_hat_sq: float
    theta: np.ndarray
    converged: bool = True


def nodewise_problem(X: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X_{-j}, X_j)``: the design and response of the node-wise regression."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    if p < 2:
        raise ValueError("node-wise regression needs at least two columns")
    if not 0 <= j < p:
        raise ValueError(f"target column {j} out of range for p={p}")
    others = np.delete(np.arange(p), j)
    return np.asfortranarray(X[:, others]), np.ascontiguousarray(X[:, j])


def nodewise_lambda_max(X: np.ndarray, j: int = 0) -> float:
    """``max_{k != j} |X_k' X_j| / n``: the smallest penalty giving gamma = 0."""
    Z, x = nodewise_problem(X, j)
    return float(np.max(np.abs(Z.T @ x)) / X.shape[0])


def _assemble(j: int, p: int, gamma: np.ndarray, lam: float, Z, x, converged: bool) -> NodewiseFit:
    n = x.shape[0]
    resid = x - Z @ gamma
    tau_tilde_sq = float(resid @ resid / n)
    if tau_tilde_sq < _TAU_FLOOR:
        raise DegenerateError(
            f"node-wise residual variance {tau_tilde_sq:.3g} is degenerate at lambda={lam:.3g}"
        )
    tau_hat_sq = tau_tilde_sq + lam * float(np.sum(np.abs(gamma)))
    theta = np.empty(p)
    theta[j] = 1.0
    theta[np.arange(p) != j] = -gamma
    theta /= tau_hat_sq
    gamma = np.array(gamma)
    gamma.setflags(write=False)
    theta.setflags(write=False)
    return NodewiseFit(
        target_index=j,
        gamma=gamma,
        lam=float(lam),
        tau_tilde_sq=tau_tilde_sq,
        tau_hat_sq=tau_hat_sq,
        theta=theta,
        converged=converged,
    )


def fit_nodewise(
    X: np.ndarray,
    j: int = 0,
    lam: float = 0.0,
    cfg: SolverConfig = DEFAULT_CONFIG,
    warm: np.ndarray | None = None,
) -> NodewiseFit:
    """Node-wise Lasso of column ``j`` on the remaining columns of centered ``X``.

    ``lam = 0`` is allowed only when the other columns number fewer than n;
    it is then an ordinary least-squares fit.
    """
    Z, x = nodewise_problem(X, j)
    n, q = Z.shape
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if lam == 0.0:
        if q >= n:
            raise DegenerateError(f"lambda = 0 needs p - 1 < n (p - 1 = {q}, n = {n})")
        gamma, *_ = np.linalg.lstsq(Z, x, rcond=None)
        return _assemble(j, q + 1, gamma, 0.0, Z, x, True)
    fit = solve_lasso(Z, x, lam, cfg, warm)
    return _assemble(j, q + 1, fit.beta, lam, Z, x, fit.converged)


def omega(fit: NodewiseFit, X: np.ndarray) -> float:
    """Variance factor ``theta' (X'X/n) theta``."""
    v = np.asarray(X) @ fit.theta
    return float(v @ v / X.shape[0])


def omega_from_tau(fit: NodewiseFit) -> float:
    """The same variance factor via ``tau_tilde_sq / tau_hat_sq**2``."""
    return fit.tau_tilde_sq / fit.tau_hat_sq**2


def gram_residual(fit: NodewiseFit, X: np.ndarray) -> np.ndarray:
    """``(X'X/n) theta - e_j``."""
    X = np.asarray(X)
    out = X.T @ (X @ fit.theta) / X.shape[0]
    out[fit.target_index] -= 1.0
    return out


def bias_factor(fit: NodewiseFit, X: np.ndarray) -> float:
    om = omega(fit, X)
    if not om > 0:
        raise DegenerateError("variance factor is not positive")
    return float(np.max(np.abs(gram_residual(fit, X))) / np.sqrt(om))


@dataclass(frozen=True, eq=False)
class TuneTrace:
    """Bias and variance factors over a grid, ordered by increasing lambda."""

    lambdas: np.ndarray
    f_values: np.ndarray
    omega_values: np.ndarray
    tau_tilde_sq: np.ndarray
    fits: tuple[NodewiseFit, ...] = field(repr=False, default=())

    def __len__(self) -> int:
        return self.lambdas.size

    def rows(self):
        """``(lambda, f, omega, tau_tilde_sq)`` tuples, ascending in lambda."""
        return list(zip(self.lambdas.tolist(), self.f_values.tolist(),
                        self.omega_values.tolist(), self.tau_tilde_sq.tolist()))

    def fit_at(self, lam: float) -> NodewiseFit:
        hits = np.flatnonzero(self.lambdas == lam)
        if hits.size == 0 or not self.fits:
            raise KeyError(f"lambda {lam!r} is not on the traced grid")
        return self.fits[int(hits[0])]

    def is_monotone(self, f_slack: float = 1e-8, tau_slack: float = 1e-10) -> bool:
        return bool(
            np.all(np.diff(self.f_values) >= -f_slack)
            and np.all(np.diff(self.tau_tilde_sq) >= -tau_slack)
        )


def trace_grid(
    X: np.ndarray,
    j: int,
    grid: LambdaGrid,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> TuneTrace:
    """Fit the node-wise Lasso at every grid value.

    Fits run from the largest lambda down with warm starts; the trace is
    reported in increasing lambda.
    """
    if not isinstance(grid, LambdaGrid):
        grid = LambdaGrid(np.sort(np.asarray(grid, dtype=float))[::-1])
    X = np.asfortranarray(X, dtype=np.float64)
    Z, x = nodewise_problem(X, j)
    p = X.shape[1]
    fits = []
    warm = None
    for lam in grid.values:
        try:
            sol = solve_lasso(Z, x, lam, cfg, warm)
            fits.append(_assemble(j, p, sol.beta, lam, Z, x, sol.converged))
        except DegenerateError as exc:
            raise DegenerateError(f"trace failed at lambda={lam:.6g}: {exc}") from exc
        warm = sol.beta
    fits.reverse()
    om = np.array([omega(fit, X) for fit in fits])
    f = np.array([np.max(np.abs(gram_residual(fit, X))) for fit in fits]) / np.sqrt(om)
    return TuneTrace(
        lambdas=grid.values[::-1].copy(),
        f_values=f,
        omega_values=om,
        tau_tilde_sq=np.array([fit.tau_tilde_sq for fit in fits]),
        fits=tuple(fits),
    )

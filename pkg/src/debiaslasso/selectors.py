"""Tuning-parameter selectors for the node-wise Lasso.

STPS picks a small penalty: among candidates whose bias factor is below a
data-driven threshold it finds the smallest achievable standard deviation,
inflates it by 10%, and then takes the least-biased candidate under that
variance cap.  ZZ runs the same rule with the threshold sqrt(2 log p / n).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .cv import cv_arrays
from .errors import DegenerateError
from .lasso import DEFAULT_CONFIG, LambdaGrid, SolverConfig, _geometric_grid, default_path_ratio
from .nodewise import (
    NodewiseFit,
    TuneTrace,
    fit_nodewise,
    nodewise_lambda_max,
    nodewise_problem,
    trace_grid,
)

__all__ = [
    "Branch",
    "CandidateGrid",
    "StpsResult",
    "build_candidate_grid",
    "eta_star",
    "select_stps",
    "select_zz",
    "select_cv_nodewise",
    "select_by_rule",
    "universal_lambda",
    "zz_threshold",
    "VARIANCE_INFLATION",
]

VARIANCE_INFLATION = 1.1
SMALL_GRID_SIZE = 20


class Branch(str, enum.Enum):
    ALL_ABOVE = "all_above"
    CONSTRAINED = "constrained"


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Ascending candidate penalties; ``lambda_min`` and ``lambda_max`` are its ends."""

    values: np.ndarray
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size == 0 or np.any(v <= 0) or np.any(np.diff(v) <= 0):
            raise ValueError("candidate grid must be nonempty, positive and strictly increasing")
        if v[0] != self.lambda_min or v[-1] != self.lambda_max:
            raise ValueError("lambda_min / lambda_max must be the grid's end points")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values) -> "CandidateGrid":
        v = np.unique(np.asarray(values, dtype=float))
        return cls(values=v, lambda_min=float(v[0]), lambda_max=float(v[-1]))

    def descending(self) -> LambdaGrid:
        return LambdaGrid(self.values[::-1])

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class StpsResult:
    lambda1: float
    eta_star: float
    branch: Branch
    trace: TuneTrace
    fit: NodewiseFit
    lambda_star: float | None = None
    omega_star_half: float | None = None
    cv_lambda: float | None = None

    def to_dict(self, include_trace: bool = True) -> dict:
        out = {
            "lambda1": self.lambda1,
            "eta_star": self.eta_star,
            "branch": self.branch.value,
            "lambda_star": self.lambda_star,
            "omega_star_half": self.omega_star_half,
            "cv_lambda": self.cv_lambda,
        }
        if include_trace:
            out["trace"] = [
                {"lambda": lam, "f": f, "omega": om, "tau_tilde_sq": t}
                for lam, f, om, t in self.trace.rows()
            ]
        return out


def build_candidate_grid(
    X: np.ndarray,
    j: int = 0,
    kappa: float = 0.001,
    path_size: int = 100,
    path_ratio: float | None = None,
) -> CandidateGrid:
    """Union of ``{kappa, 2 kappa, ..., 20 kappa} / sqrt(n)`` and a geometric path.

    The path runs from ``max_{k != j} |X_k' X_j| / n`` down by ``path_ratio``
    (glmnet's default when omitted); path values below ``kappa / sqrt(n)``
    are dropped.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if path_size < 1:
        raise ValueError("path_size must be at least 1")
    n, p = np.shape(X)
    top = nodewise_lambda_max(X, j)
    norms = np.sqrt(np.sum(np.asarray(X) ** 2, axis=0))
    if not top > 1e-12 * norms[j] * norms.max() / n:
        raise DegenerateError(f"column {j} is orthogonal to every other column; lambda_max = {top:.3g}")
    if path_ratio is None:
        path_ratio = default_path_ratio(n, p - 1)
    if path_size == 1:
        path = np.array([top])
    else:
        path = _geometric_grid(top, path_size, path_ratio).values
    small = kappa * np.arange(1, SMALL_GRID_SIZE + 1) / math.sqrt(n)
    floor = small[0]
    small = small[small < top]
    # nothing below kappa / sqrt(n): that value is the smallest candidate by definition
    values = np.unique(np.concatenate([small, path[path >= floor]]))
    return CandidateGrid(values=values, lambda_min=float(values[0]), lambda_max=float(values[-1]))


def _as_lambda_grid(grid) -> LambdaGrid:
    if isinstance(grid, CandidateGrid):
        return grid.descending()
    if isinstance(grid, LambdaGrid):
        return grid
    return CandidateGrid.from_values(grid).descending()


def select_cv_nodewise(
    X: np.ndarray,
    j: int,
    grid,
    k_folds: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> float:
    """Penalty minimising the cross-validated error of the node-wise regression."""
    Z, x = nodewise_problem(X, j)
    return cv_arrays(Z, x, _as_lambda_grid(grid), k_folds, seed, cfg).lambda_min


def eta_star(
    X: np.ndarray,
    j: int,
    grid,
    k_folds: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> tuple[float, float]:
    """Return ``(tau_tilde(lambda_cv) / sqrt(n), lambda_cv)``.

    ``tau_tilde`` comes from a full-data refit at the cross-validated penalty.
    """
    lam_cv = select_cv_nodewise(X, j, grid, k_folds, seed, cfg)
    fit = fit_nodewise(X, j, lam_cv, cfg)
    return math.sqrt(fit.tau_tilde_sq / X.shape[0]), lam_cv


def zz_threshold(n: int, p: int) -> float:
    return math.sqrt(2.0 * math.log(p) / n)


def universal_lambda(tau1: float, n: int, p: int) -> float:
    if not tau1 > 0:
        raise ValueError(f"tau1 must be positive, got {tau1}")
    return tau1 * math.sqrt(2.0 * math.log(p) / n)


def _last_argmin(values: np.ndarray, mask: np.ndarray) -> int:
    """Index of the minimum over ``mask``; ties go to the largest index (largest lambda)."""
    idx = np.flatnonzero(mask)
    sub = values[idx]
    return int(idx[np.flatnonzero(sub == sub.min())[-1]])


def select_by_rule(trace: TuneTrace, eta: float) -> tuple[Branch, int, int | None, float | None]:
    """Apply the two-branch selection rule to a trace.

    Returns ``(branch, index of lambda1, index of lambda_star, variance cap)``.
    """
    f = trace.f_values
    sd = np.sqrt(trace.omega_values)
    feasible = f <= eta
    if not feasible.any():
        return Branch.ALL_ABOVE, 0, None, None
    i_star = _last_argmin(sd, feasible)
    cap = VARIANCE_INFLATION * float(sd[i_star])
    i_one = _last_argmin(f, sd <= cap)
    return Branch.CONSTRAINED, i_one, i_star, cap


def _result(trace: TuneTrace, eta: float, cv_lambda: float | None) -> StpsResult:
    branch, i_one, i_star, cap = select_by_rule(trace, eta)
    return StpsResult(
        lambda1=float(trace.lambdas[i_one]),
        eta_star=float(eta),
        branch=branch,
        trace=trace,
        fit=trace.fits[i_one],
        lambda_star=None if i_star is None else float(trace.lambdas[i_star]),
        omega_star_half=cap,
        cv_lambda=cv_lambda,
    )


def select_stps(
    X: np.ndarray,
    j: int,
    grid,
    k_folds: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    trace: TuneTrace | None = None,
    cv_lambda: float | None = None,
) -> StpsResult:
    """STPS selection over ``grid``.

    A precomputed ``trace`` (over the same grid) and ``cv_lambda`` may be
    passed to avoid refitting; the threshold then reuses the traced refit.
    """
    lgrid = _as_lambda_grid(grid)
    if trace is None:
        trace = trace_grid(X, j, lgrid, cfg)
    if cv_lambda is None:
        cv_lambda = select_cv_nodewise(X, j, lgrid, k_folds, seed, cfg)
    eta = math.sqrt(trace.fit_at(cv_lambda).tau_tilde_sq / X.shape[0])
    return _result(trace, eta, cv_lambda)


def select_zz(
    X: np.ndarray,
    j: int,
    grid,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    trace: TuneTrace | None = None,
    eta: float | None = None,
) -> StpsResult:
    """Same rule with threshold ``sqrt(2 log p / n)`` (override with ``eta``)."""
    lgrid = _as_lambda_grid(grid)
    if trace is None:
        trace = trace_grid(X, j, lgrid, cfg)
    n, p = np.shape(X)
    if eta is None:
        eta = zz_threshold(n, p)
    return _result(trace, eta, None)

"""Debiased estimate, confidence interval and error decomposition for one coefficient."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .cv import CvResult, kfold_cv
from .data import Dataset
from .errors import DegenerateError
from .lasso import DEFAULT_CONFIG, LambdaGrid, LassoFit, SolverConfig, fit_path
from .nodewise import NodewiseFit, gram_residual, omega

__all__ = [
    "InferenceResult",
    "OutcomeTuning",
    "tune_outcome",
    "sigma_hat_1se",
    "debias",
    "decomposition_check",
]

_ALTERNATIVES = ("two-sided", "less", "greater")


@dataclass(frozen=True)
class InferenceResult:
    b1: float
    beta1_lasso: float
    omega: float
    sigma_hat: float
    std_error: float
    ci_lower: float
    ci_upper: float
    t_stat: float
    p_value: float
    lambda0: float
    lambda1: float
    level: float
    target_index: int
    alternative: str = "two-sided"

    def contains(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper

    @property
    def length(self) -> float:
        return self.ci_upper - self.ci_lower

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class OutcomeTuning:
    """Lasso of the response tuned by CV: the min-MSE fit and the one-SE noise scale."""

    cv: CvResult
    lasso: LassoFit
    fit_1se: LassoFit
    sigma_hat: float


def tune_outcome(
    d: Dataset,
    grid: LambdaGrid,
    k: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> OutcomeTuning:
    cv = kfold_cv(d, grid, k, seed, cfg)
    fits = fit_path(d, grid, cfg)
    fit_1se = fits[cv.index_1se]
    resid = d.y - d.X @ fit_1se.beta
    sigma = math.sqrt(float(resid @ resid) / d.n)
    if not sigma > 0:
        raise DegenerateError("residuals at the one-SE penalty are identically zero")
    return OutcomeTuning(cv=cv, lasso=fits[cv.index_min], fit_1se=fit_1se, sigma_hat=sigma)


def sigma_hat_1se(
    d: Dataset,
    grid: LambdaGrid,
    k: int = 10,
    seed: int = 0,
    cfg: SolverConfig = DEFAULT_CONFIG,
) -> float:
    """Root mean squared residual of the Lasso at the one-standard-error penalty."""
    return tune_outcome(d, grid, k, seed, cfg).sigma_hat


def debias(
    d: Dataset,
    lasso: LassoFit,
    node: NodewiseFit,
    sigma_hat: float,
    level: float = 0.95,
    alternative: str = "two-sided",
) -> InferenceResult:
    """One-step correction of the Lasso coefficient ``node.target_index``.

    The interval is always two-sided with normal quantiles; ``alternative``
    only changes the p-value of the test of a zero coefficient.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    if not sigma_hat > 0:
        raise ValueError(f"sigma_hat must be positive, got {sigma_hat}")
    if lasso.beta.shape != (d.p,) or node.theta.shape != (d.p,):
        raise ValueError("fit shapes do not match the dataset")
    j = node.target_index
    n = d.n
    resid = d.y - d.X @ lasso.beta
    b1 = float(lasso.beta[j] + node.theta @ (d.X.T @ resid) / n)
    om = omega(node, d.X)
    if not om > 0:
        raise DegenerateError("variance factor is not positive")
    se = sigma_hat * math.sqrt(om / n)
    z = float(norm.ppf(0.5 + level / 2.0))
    t = b1 / se
    if alternative == "two-sided":
        pval = 2.0 * float(norm.sf(abs(t)))
    elif alternative == "greater":
        pval = float(norm.sf(t))
    else:
        pval = float(norm.cdf(t))
    return InferenceResult(
        b1=b1,
        beta1_lasso=float(lasso.beta[j]),
        omega=om,
        sigma_hat=float(sigma_hat),
        std_error=se,
        ci_lower=b1 - z * se,
        ci_upper=b1 + z * se,
        t_stat=t,
        p_value=pval,
        lambda0=float(lasso.lam),
        lambda1=float(node.lam),
        level=float(level),
        target_index=j,
        alternative=alternative,
    )


def decomposition_check(
    d: Dataset,
    lasso: LassoFit,
    node: NodewiseFit,
    beta0: np.ndarray,
    eps: np.ndarray,
) -> tuple[float, float]:
    """Split ``sqrt(n) (b1 - beta0_j)`` into its noise and bias parts.

    Returns ``(w1, delta1)`` with ``w1 = theta' X' eps / sqrt(n)`` and
    ``delta1 = sqrt(n) (S theta - e_j)' (beta0 - beta_hat)``.
    """
    beta0 = np.asarray(beta0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if beta0.shape != (d.p,) or eps.shape != (d.n,):
        raise ValueError("beta0 / eps shapes do not match the dataset")
    rn = math.sqrt(d.n)
    w1 = float(node.theta @ (d.X.T @ eps)) / rn
    delta1 = rn * float(gram_residual(node, d.X) @ (beta0 - lasso.beta))
    return w1, delta1

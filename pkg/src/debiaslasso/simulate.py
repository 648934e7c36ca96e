"""Seeded Monte Carlo coverage studies for the debiased Lasso.

Two data-generating processes are supported.  In ``Setting.ONE`` the
covariates are jointly Gaussian with a chosen covariance and the response is
``1 + X beta0 + eps``.  In ``Setting.TWO`` the first covariate is itself
generated from the others, ``X_1 = 0.5 + X_{-1} gamma0 + eta``, so that
``gamma0`` controls how dense the first precision column is.  The true first
coefficient is always 1.5.

Each replication draws from its own Philox stream keyed on
``(seed, replication index)``, so results do not depend on how replications
are scheduled across workers.
"""

from __future__ import annotations

import enum
import functools
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import linalg as sla
from scipy.stats import norm
from threadpoolctl import threadpool_limits

from .data import Dataset, center
from .errors import CalibrationError, DebiasLassoError, DegenerateError, SimulationAborted
from .inference import InferenceResult, debias, decomposition_check, tune_outcome
from .lasso import DEFAULT_CONFIG, SolverConfig, default_path_ratio, lambda_path
from .nodewise import fit_nodewise, trace_grid
from .selectors import (
    build_candidate_grid,
    select_cv_nodewise,
    select_stps,
    select_zz,
    universal_lambda,
)

__all__ = [
    "Setting",
    "Pattern",
    "SigmaStructure",
    "Method",
    "SimConfig",
    "Design",
    "MethodSummary",
    "SimReport",
    "build_sigma",
    "pattern_vector",
    "build_beta",
    "build_gamma",
    "calibrate_cy",
    "calibrate_cx",
    "population_tau1_sq",
    "mvn_factor",
    "sample_mvn",
    "build_design",
    "draw_data",
    "empirical_r2",
    "replication_rng",
    "run_replication",
    "run_simulation",
    "phi_max_1",
    "TRUE_TARGET",
]

logger = logging.getLogger(__name__)

TRUE_TARGET = 1.5
DECOMPOSITION_EVERY = 100


class _LowerEnum(str, enum.Enum):
    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        for member in cls:
            if member.value == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown {cls.__name__}: {text!r} (choose from {[m.value for m in cls]})")


class Setting(_LowerEnum):
    ONE = "1"
    TWO = "2"


class Pattern(_LowerEnum):
    SPARSE = "sparse"
    MODERATE = "moderate"
    DENSE = "dense"


class SigmaStructure(_LowerEnum):
    IDENTITY = "identity"
    TOEPLITZ = "toeplitz"
    EQUICORR = "equicorr"


class Method(_LowerEnum):
    ORACLE = "oracle"
    STPS = "stps"
    UNIV = "univ"
    CV = "cv"
    ZZ = "zz"


METHOD_ORDER = (Method.ORACLE, Method.STPS, Method.UNIV, Method.CV, Method.ZZ)
_DEBIASED = (Method.STPS, Method.UNIV, Method.CV, Method.ZZ)
_LABELS = {
    Method.ORACLE: "Oracle",
    Method.STPS: "STPS",
    Method.UNIV: "Univ",
    Method.CV: "CV",
    Method.ZZ: "ZZ",
}


# ---------------------------------------------------------------- design pieces


def build_sigma(structure, rho: float, dim: int) -> np.ndarray:
    structure = SigmaStructure.parse(structure)
    if dim < 1:
        raise ValueError("dimension must be positive")
    if structure is SigmaStructure.IDENTITY:
        return np.eye(dim)
    if structure is SigmaStructure.TOEPLITZ:
        if not -1.0 < rho < 1.0:
            raise ValueError(f"Toeplitz rho must lie in (-1, 1), got {rho}")
        idx = np.arange(dim)
        return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    if not 0.0 < rho < 1.0:
        raise ValueError(f"equicorrelation rho must lie in (0, 1), got {rho}")
    S = np.full((dim, dim), float(rho))
    np.fill_diagonal(S, 1.0)
    return S


def pattern_vector(pattern, dim: int, *, kind: str = "beta") -> np.ndarray:
    """Coefficient pattern at unit strength (``c = 1``), without the fixed 1.5 entry."""
    pattern = Pattern.parse(pattern)
    v = np.zeros(dim)
    if kind == "beta":
        if pattern is Pattern.SPARSE:
            if dim < 6:
                raise ValueError("sparse beta needs dimension >= 6")
            v[1:6] = 1.0
        elif pattern is Pattern.MODERATE:
            if dim < 21:
                raise ValueError("moderately sparse beta needs dimension >= 21")
            v[1:11] = 5.0
            v[11:21] = 1.0
        else:
            if dim < 2:
                raise ValueError("dense beta needs dimension >= 2")
            v[1:] = 1.0 / np.sqrt(np.arange(1, dim))
    elif kind == "gamma":
        if pattern is Pattern.SPARSE:
            if dim < 8:
                raise ValueError("sparse gamma needs dimension >= 8")
            v[4:8] = 1.0
        elif pattern is Pattern.DENSE:
            v[:] = 1.0 / np.sqrt(np.arange(1, dim + 1))
        else:
            raise ValueError("gamma patterns are sparse or dense")
    else:
        raise ValueError(f"unknown pattern kind {kind!r}")
    return v


def build_beta(pattern, dim: int, c_y: float) -> np.ndarray:
    beta = c_y * pattern_vector(pattern, dim, kind="beta")
    beta[0] = TRUE_TARGET
    return beta


def build_gamma(pattern, dim: int, c_x: float) -> np.ndarray:
    return c_x * pattern_vector(pattern, dim, kind="gamma")


def calibrate_cy(
    pattern,
    Sigma: np.ndarray,
    r2_y: float,
    noise_var: float = 1.0,
    fixed: float = TRUE_TARGET,
) -> float:
    """Signal strength ``c`` giving population R^2 = ``r2_y``.

    Solves ``beta(c)' Sigma beta(c) = r2_y noise_var / (1 - r2_y)`` with
    ``beta(c) = fixed e_1 + c v`` and returns the largest root, which must be
    nonnegative.
    """
    if not 0.0 < r2_y < 1.0:
        raise ValueError(f"r2_y must lie in (0, 1), got {r2_y}")
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    Sigma = np.asarray(Sigma, dtype=float)
    v = pattern_vector(pattern, Sigma.shape[0], kind="beta")
    target = r2_y * noise_var / (1.0 - r2_y)
    a = float(v @ Sigma @ v)
    b = 2.0 * fixed * float(Sigma[0] @ v)
    c0 = fixed**2 * float(Sigma[0, 0]) - target
    if a <= 0:
        raise CalibrationError("pattern carries no signal under this covariance")
    disc = b * b - 4.0 * a * c0
    if disc < 0:
        raise CalibrationError("no real signal strength reaches the target R^2")
    root = (-b + math.sqrt(disc)) / (2.0 * a)
    scale = max(abs(b), math.sqrt(abs(a * c0)), 1.0) / a
    if root < -1e-12 * scale:
        raise CalibrationError(
            f"target R^2 {r2_y} is below the contribution of the fixed coefficient alone"
        )
    return max(root, 0.0)


def calibrate_cx(pattern, Sigma: np.ndarray, r2_x: float) -> float:
    """Strength of ``gamma0`` giving R^2 = ``r2_x`` in the first-covariate equation."""
    if not 0.0 < r2_x < 1.0:
        raise ValueError(f"r2_x must lie in (0, 1), got {r2_x}")
    v = pattern_vector(pattern, np.shape(Sigma)[0], kind="gamma")
    q = float(v @ np.asarray(Sigma) @ v)
    if q <= 0:
        raise CalibrationError("gamma pattern carries no signal under this covariance")
    return math.sqrt(r2_x / ((1.0 - r2_x) * q))


def population_tau1_sq(Sigma: np.ndarray, j: int = 0) -> float:
    """Conditional variance of coordinate ``j`` given the rest (a Schur complement)."""
    Sigma = np.asarray(Sigma, dtype=float)
    others = np.delete(np.arange(Sigma.shape[0]), j)
    S_oo = Sigma[np.ix_(others, others)]
    s_jo = Sigma[j, others]
    try:
        cf = sla.cho_factor(S_oo, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("covariance of the remaining coordinates is singular") from exc
    return float(Sigma[j, j] - s_jo @ sla.cho_solve(cf, s_jo))


def mvn_factor(Sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; a singular covariance fails here, before any draw."""
    try:
        return np.linalg.cholesky(np.asarray(Sigma, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("covariance matrix is not positive definite") from exc


def sample_mvn(factor: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, factor.shape[0])) @ factor.T


def phi_max_1(X: np.ndarray) -> float:
    """Largest column mean square, ``max_j ||X_j||^2 / n``."""
    X = np.asarray(X, dtype=float)
    return float(np.max(np.sum(X * X, axis=0)) / X.shape[0])


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SimConfig:
    setting: Setting = Setting.ONE
    n: int = 100
    p: int | None = None
    beta_pattern: Pattern = Pattern.SPARSE
    gamma_pattern: Pattern = Pattern.SPARSE
    sigma_structure: SigmaStructure = SigmaStructure.IDENTITY
    rho: float = 0.0
    r2_y: float = 0.8
    r2_x: float = 0.5
    reps: int = 100
    seed: int = 0
    methods: tuple[Method, ...] = (Method.ORACLE, Method.STPS, Method.UNIV, Method.CV, Method.ZZ)
    level: float = 0.95
    folds: int = 10
    kappa: float = 0.001

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "setting", Setting.parse(self.setting))
        set_(self, "beta_pattern", Pattern.parse(self.beta_pattern))
        set_(self, "gamma_pattern", Pattern.parse(self.gamma_pattern))
        set_(self, "sigma_structure", SigmaStructure.parse(self.sigma_structure))
        methods = self.methods
        if isinstance(methods, str):
            methods = [m for m in methods.replace(",", " ").split() if m]
        wanted = {Method.parse(m) for m in methods}
        set_(self, "methods", tuple(m for m in METHOD_ORDER if m in wanted))
        if self.p is None:
            set_(self, "p", 2 * int(self.n))
        set_(self, "n", int(self.n))
        set_(self, "p", int(self.p))
        set_(self, "reps", int(self.reps))
        set_(self, "seed", int(self.seed))
        set_(self, "folds", int(self.folds))
        if self.n < 20:
            raise ValueError("n must be at least 20")
        if self.p < 8:
            raise ValueError("p must be at least 8")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.methods:
            raise ValueError("no methods requested")
        for name in ("r2_y", "r2_x", "level"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.setting is Setting.TWO and self.gamma_pattern is Pattern.MODERATE:
            raise ValueError("gamma patterns are sparse or dense")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            if key in ("n", "p", "reps", "seed", "folds"):
                kwargs[key] = int(value)
            elif key in ("rho", "r2_y", "r2_x", "level", "kappa"):
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif f.name == "methods":
                v = ",".join(m.value for m in v)
            out[f.name] = v
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())


@dataclass(frozen=True, eq=False)
class Design:
    """Population quantities fixed across replications."""

    beta0: np.ndarray
    gamma0: np.ndarray | None
    factor: np.ndarray
    c_y: float
    c_x: float | None
    tau1_sq: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta0)


def _full_covariance_setting2(Sigma_rest: np.ndarray, gamma0: np.ndarray) -> np.ndarray:
    sg = Sigma_rest @ gamma0
    top = float(gamma0 @ sg) + 1.0
    return np.block([[np.array([[top]]), sg[None, :]], [sg[:, None], Sigma_rest]])


def build_design(cfg: SimConfig) -> Design:
    if cfg.setting is Setting.ONE:
        Sigma = build_sigma(cfg.sigma_structure, cfg.rho, cfg.p + 1)
        factor = mvn_factor(Sigma)
        c_y = calibrate_cy(cfg.beta_pattern, Sigma, cfg.r2_y)
        return Design(
            beta0=build_beta(cfg.beta_pattern, cfg.p + 1, c_y),
            gamma0=None,
            factor=factor,
            c_y=c_y,
            c_x=None,
            tau1_sq=population_tau1_sq(Sigma),
        )
    Sigma_rest = build_sigma(cfg.sigma_structure, cfg.rho, cfg.p)
    factor = mvn_factor(Sigma_rest)
    c_x = calibrate_cx(cfg.gamma_pattern, Sigma_rest, cfg.r2_x)
    gamma0 = build_gamma(cfg.gamma_pattern, cfg.p, c_x)
    full = _full_covariance_setting2(Sigma_rest, gamma0)
    # R^2 of the outcome equation counts the control part only; with the
    # treatment's share included the target is unreachable for r2_x >= 0.5.
    c_y = calibrate_cy(cfg.beta_pattern, full, cfg.r2_y, fixed=0.0)
    return Design(
        beta0=build_beta(cfg.beta_pattern, cfg.p + 1, c_y),
        gamma0=gamma0,
        factor=factor,
        c_y=c_y,
        c_x=c_x,
        tau1_sq=1.0,
    )


def draw_data(cfg: SimConfig, design: Design, rng: np.random.Generator):
    """One sample: ``(X, y, eps)`` with ``X`` of width p + 1."""
    n = cfg.n
    if cfg.setting is Setting.ONE:
        X = sample_mvn(design.factor, n, rng)
    else:
        rest = sample_mvn(design.factor, n, rng)
        eta = rng.standard_normal(n)
        X = np.column_stack([0.5 + rest @ design.gamma0 + eta, rest])
    eps = rng.standard_normal(n)
    y = 1.0 + X @ design.beta0 + eps
    return X, y, eps


def empirical_r2(cfg: SimConfig, design: Design, n: int, rng: np.random.Generator) -> tuple[float, float | None]:
    """Sample R^2 ``1 - SSR / SST`` of the outcome equation (and of the first-covariate equation in setting 2).

    Residuals are the true noise draws.  In setting 2 the outcome equation is
    taken net of the first covariate, matching how ``c_y`` is calibrated there.
    """
    big = replace(cfg, n=n)
    X, y, eps = draw_data(big, design, rng)

    def r2(response, noise):
        return 1.0 - float(np.sum(noise**2) / np.sum((response - response.mean()) ** 2))

    if cfg.setting is Setting.ONE:
        return r2(y, eps), None
    part = X[:, 1:] @ design.gamma0
    eta = X[:, 0] - 0.5 - part
    return r2(y - design.beta0[0] * X[:, 0], eps), r2(X[:, 0], eta)


# ---------------------------------------------------------------- replications


@dataclass(frozen=True)
class Estimate:
    estimate: float
    std_error: float
    ci_lower: float
    ci_upper: float
    lambda1: float = math.nan

    def __post_init__(self):
        # plain floats keep reprs (and so the dump CSV) free of numpy scalar types
        for name in ("estimate", "std_error", "ci_lower", "ci_upper", "lambda1"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def length(self) -> float:
        return self.ci_upper - self.ci_lower

    def covers(self, value: float = TRUE_TARGET) -> bool:
        return bool(self.ci_lower <= value <= self.ci_upper)

    @classmethod
    def from_inference(cls, res: InferenceResult) -> "Estimate":
        return cls(res.b1, res.std_error, res.ci_lower, res.ci_upper, res.lambda1)


@dataclass(frozen=True)
class RepRecord:
    rep: int
    estimates: dict = field(default_factory=dict)
    decomposition_residual: float | None = None
    error: str | None = None


def replication_rng(seed: int, rep: int) -> tuple[np.random.Generator, int, int]:
    """Data stream and two CV seeds for replication ``rep``."""
    data_ss, outcome_ss, node_ss = np.random.SeedSequence(seed, spawn_key=(rep,)).spawn(3)
    rng = np.random.Generator(np.random.Philox(data_ss))
    return rng, int(outcome_ss.generate_state(1)[0]), int(node_ss.generate_state(1)[0])


def _oracle(d: Dataset, support: np.ndarray, level: float) -> Estimate:
    Xs = d.X[:, support]
    coef, *_ = np.linalg.lstsq(Xs, d.y, rcond=None)
    resid = d.y - Xs @ coef
    dof = d.n - support.size - 1
    s2 = float(resid @ resid) / dof
    cov00 = float(np.linalg.inv(Xs.T @ Xs)[0, 0])
    se = math.sqrt(s2 * cov00)
    # normal quantiles, as for the debiased intervals
    q = float(norm.ppf(0.5 + level / 2.0))
    return Estimate(float(coef[0]), se, coef[0] - q * se, coef[0] + q * se)


def run_replication(
    cfg: SimConfig,
    design: Design,
    rep: int,
    solver: SolverConfig = DEFAULT_CONFIG,
) -> RepRecord:
    rng, seed_outcome, seed_node = replication_rng(cfg.seed, rep)
    X, y, eps = draw_data(cfg, design, rng)
    names = tuple(f"x{k}" for k in range(X.shape[1]))
    d, _ = center(Dataset(y=y, X=X, column_names=names))
    n, p = d.X.shape
    estimates = {}
    if Method.ORACLE in cfg.methods and cfg.beta_pattern is not Pattern.DENSE:
        estimates[Method.ORACLE] = _oracle(d, design.support, cfg.level)
    wanted = [m for m in _DEBIASED if m in cfg.methods]
    residual = None
    if wanted:
        grid0 = lambda_path(d, 100, default_path_ratio(n, p))
        outcome = tune_outcome(d, grid0, cfg.folds, seed_outcome, solver)
        cand = build_candidate_grid(d.X, 0, cfg.kappa)
        trace = trace_grid(d.X, 0, cand.descending(), solver)
        lam_cv = None
        if Method.STPS in wanted or Method.CV in wanted:
            lam_cv = select_cv_nodewise(d.X, 0, cand, cfg.folds, seed_node, solver)
        first = None
        for m in wanted:
            if m is Method.STPS:
                node = select_stps(d.X, 0, cand, trace=trace, cv_lambda=lam_cv).fit
            elif m is Method.ZZ:
                node = select_zz(d.X, 0, cand, trace=trace).fit
            elif m is Method.CV:
                node = trace.fit_at(lam_cv)
            else:
                lam_u = universal_lambda(math.sqrt(design.tau1_sq), n, p)
                near = int(np.argmin(np.abs(trace.lambdas - lam_u)))
                node = fit_nodewise(d.X, 0, lam_u, solver, warm=trace.fits[near].gamma)
            res = debias(d, outcome.lasso, node, outcome.sigma_hat, cfg.level)
            estimates[m] = Estimate.from_inference(res)
            if first is None:
                first = (node, res)
        if rep % DECOMPOSITION_EVERY == 0:
            node, res = first
            w1, delta1 = decomposition_check(d, outcome.lasso, node, design.beta0, eps)
            residual = abs(w1 + delta1 - math.sqrt(n) * (res.b1 - TRUE_TARGET))
    return RepRecord(rep=rep, estimates=estimates, decomposition_residual=residual)


def _safe_replication(cfg: SimConfig, design: Design, rep: int) -> RepRecord:
    try:
        return run_replication(cfg, design, rep)
    except (DebiasLassoError, np.linalg.LinAlgError) as exc:
        return RepRecord(rep=rep, error=f"{type(exc).__name__}: {exc}")


def _init_worker():
    threadpool_limits(1)


# ---------------------------------------------------------------- reporting


@dataclass(frozen=True)
class MethodSummary:
    bias: float
    sd: float
    coverage: float
    mean_length: float
    mean_lambda1: float
    count: int


def _summarise(values: list[Estimate]) -> MethodSummary:
    est = np.array([v.estimate for v in values])
    lam = np.array([v.lambda1 for v in values])
    return MethodSummary(
        bias=float(est.mean() - TRUE_TARGET),
        sd=float(est.std(ddof=1)) if est.size > 1 else 0.0,
        coverage=float(np.mean([v.covers() for v in values])),
        mean_length=float(np.mean([v.length for v in values])),
        mean_lambda1=float(lam.mean()) if np.all(np.isfinite(lam)) else math.nan,
        count=int(est.size),
    )


@dataclass(frozen=True, eq=False)
class SimReport:
    config: SimConfig
    summaries: dict
    records: list
    failures: list
    wall_clock: float
    decomposition_max: float | None

    @property
    def methods(self) -> list[Method]:
        return [m for m in METHOD_ORDER if m in self.summaries]

    def summary(self, method) -> "MethodSummary":
        return self.summaries[Method.parse(method)]

    def lambda1(self, method) -> np.ndarray:
        method = Method.parse(method)
        return np.array([r.estimates[method].lambda1 for r in self.records if r.error is None])

    def estimates(self, method) -> list[Estimate]:
        method = Method.parse(method)
        return [r.estimates[method] for r in self.records if r.error is None]

    def to_table_csv(self, decimals: int = 3) -> str:
        """Bias / SD / Cover / Length rows, one column per method."""
        buf = io.StringIO()
        buf.write("," + ",".join(_LABELS[m] for m in self.methods) + "\n")
        for label, attr in (("Bias", "bias"), ("SD", "sd"), ("Cover", "coverage"), ("Length", "mean_length")):
            cells = [f"{getattr(self.summaries[m], attr):.{decimals}f}" for m in self.methods]
            buf.write(label + "," + ",".join(cells) + "\n")
        return buf.getvalue()

    def estimates_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rep,method,estimate,std_error,ci_lower,ci_upper,lambda1,covered\n")
        for r in self.records:
            if r.error is not None:
                continue
            for m in self.methods:
                e = r.estimates[m]
                buf.write(
                    f"{r.rep},{m.value},{e.estimate!r},{e.std_error!r},{e.ci_lower!r},"
                    f"{e.ci_upper!r},{e.lambda1!r},{int(e.covers())}\n"
                )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "summaries": {
                m.value: {k: getattr(s, k) for k in ("bias", "sd", "coverage", "mean_length", "mean_lambda1", "count")}
                for m, s in self.summaries.items()
            },
            "failures": [{"rep": rep, "error": msg} for rep, msg in self.failures],
            "decomposition_max_residual": self.decomposition_max,
            "wall_clock_seconds": self.wall_clock,
        }


def run_simulation(cfg: SimConfig, jobs: int = 1) -> SimReport:
    """Run ``cfg.reps`` replications on ``jobs`` worker processes.

    Aggregation is in replication order, so the report does not depend on
    ``jobs``.  More than 1% failed replications raises ``SimulationAborted``.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    design = build_design(cfg)
    start = time.perf_counter()
    task = functools.partial(_safe_replication, cfg, design)
    if jobs == 1:
        with threadpool_limits(1):
            records = [task(r) for r in range(cfg.reps)]
    else:
        chunk = max(1, cfg.reps // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker) as pool:
            records = list(pool.map(task, range(cfg.reps), chunksize=chunk))
    records.sort(key=lambda r: r.rep)
    elapsed = time.perf_counter() - start
    failures = [(r.rep, r.error) for r in records if r.error is not None]
    for rep, msg in failures:
        logger.warning("replication %d (seed %d) failed: %s", rep, cfg.seed, msg)
    if len(failures) > 0.01 * cfg.reps:
        raise SimulationAborted(f"{len(failures)} of {cfg.reps} replications failed; first: {failures[0][1]}")
    ok = [r for r in records if r.error is None]
    summaries = {}
    for m in METHOD_ORDER:
        vals = [r.estimates[m] for r in ok if m in r.estimates]
        if vals:
            summaries[m] = _summarise(vals)
    residuals = [r.decomposition_residual for r in ok if r.decomposition_residual is not None]
    return SimReport(
        config=cfg,
        summaries=summaries,
        records=records,
        failures=failures,
        wall_clock=elapsed,
        decomposition_max=max(residuals) if residuals else None,
    )


def iter_table_configs(n: int = 100) -> Iterable[SimConfig]:
    """The (pattern, covariance) blocks of the coverage tables at sample size ``n``."""
    S1 = [
        ("sparse", "identity", 0.0),
        ("sparse", "equicorr", 0.3),
        ("sparse", "equicorr", 0.9),
        ("sparse", "toeplitz", 0.9),
        ("moderate", "identity", 0.0),
        ("moderate", "equicorr", 0.9),
        ("moderate", "toeplitz", 0.9),
        ("dense", "equicorr", 0.9),
        ("dense", "toeplitz", 0.9),
    ]
    for beta, sig, rho in S1:
        yield SimConfig(setting="1", n=n, beta_pattern=beta, sigma_structure=sig, rho=rho)
    S2 = [
        ("sparse", "sparse", 0.5),
        ("sparse", "sparse", 0.9),
        ("moderate", "dense", 0.3),
        ("moderate", "dense", 0.8),
        ("dense", "dense", 0.8),
    ]
    for beta, gam, r2x in S2:
        yield SimConfig(setting="2", n=n, beta_pattern=beta, gamma_pattern=gam, r2_x=r2x)

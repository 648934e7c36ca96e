"""Exit criteria for the package, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.  The two coverage studies take tens of minutes on one core.
Set ``HOUSING_CSV`` to a prepared housing file to run the real-data check.
"""

import math
import os
import time

import numpy as np
import pytest
from oracles import objective, projected_gradient

from debiaslasso.data import Dataset, center, expand_interactions, load_csv
from debiaslasso.inference import debias, decomposition_check, tune_outcome
from debiaslasso.lasso import default_path_ratio, fit_lasso, kkt_violation, lambda_max, lambda_path
from debiaslasso.nodewise import fit_nodewise, nodewise_lambda_max, trace_grid
from debiaslasso.selectors import build_candidate_grid, select_zz
from debiaslasso.simulate import (
    SimConfig,
    build_design,
    build_sigma,
    draw_data,
    empirical_r2,
    iter_table_configs,
    population_tau1_sq,
    run_simulation,
)

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []
JOBS = os.cpu_count() or 1


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _centered(X, y):
    names = tuple(f"x{k}" for k in range(X.shape[1]))
    return center(Dataset(y=y, X=X, column_names=names))[0]


def test_solver_correctness():
    rng = np.random.default_rng(20240)
    worst_kkt = 0.0
    for _ in range(200):
        n, p = int(rng.integers(20, 101)), int(rng.integers(5, 201))
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[: min(p, 5)] = rng.normal(0, 2, min(p, 5))
        d = _centered(X, X @ beta + rng.standard_normal(n))
        lam = rng.uniform(0.01, 1.0) * lambda_max(d.X, d.y)
        worst_kkt = max(worst_kkt, kkt_violation(d, fit_lasso(d, lam)))
    worst_rel = 0.0
    for _ in range(50):
        n, p = int(rng.integers(20, 101)), int(rng.integers(1, 5))
        X = rng.standard_normal((n, p))
        d = _centered(X, X @ rng.normal(0, 1, p) + rng.standard_normal(n))
        lam = rng.uniform(0.01, 1.0) * lambda_max(d.X, d.y)
        ours = objective(d.X, d.y, fit_lasso(d, lam).beta, lam)
        ref = objective(d.X, d.y, projected_gradient(d.X, d.y, lam), lam)
        worst_rel = max(worst_rel, abs(ours - ref) / abs(ref))
    record(
        "solver correctness",
        worst_kkt <= 1e-7 and worst_rel <= 1e-8,
        f"max KKT violation {worst_kkt:.2e} (<= 1e-7), max relative objective gap {worst_rel:.2e} (<= 1e-8)",
    )


def test_population_values():
    toe = population_tau1_sq(build_sigma("toeplitz", 0.9, 201))
    ident = population_tau1_sq(build_sigma("identity", 0.0, 201))
    equi = population_tau1_sq(build_sigma("equicorr", 0.3, 201))
    ok = abs(toe - 0.19) <= 1e-12 and ident == 1.0 and abs(equi - 0.701) <= 0.005
    record("population tau1^2", ok, f"toeplitz {toe:.15f}, identity {ident!r}, equicorr(0.3, 201) {equi:.5f}")


def test_exact_inverse_identity():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((100, 30))
        beta = np.zeros(30)
        beta[:4] = [1.5, 1.0, -1.0, 0.5]
        d = _centered(X, X @ beta + rng.standard_normal(100))
        ols, *_ = np.linalg.lstsq(d.X, d.y, rcond=None)
        node = fit_nodewise(d.X, 0, 0.0)
        top = lambda_max(d.X, d.y)
        for frac in (0.02, 0.2, 0.7):
            res = debias(d, fit_lasso(d, frac * top), node, 1.0)
            worst = max(worst, abs(res.b1 - ols[0]))
    record("exact-inverse identity", worst <= 1e-8, f"max |b1 - OLS| over 60 fits {worst:.2e} (<= 1e-8)")


def test_decomposition_identity_and_bound():
    cfg = SimConfig(setting="1", n=100)
    design = build_design(cfg)
    worst_id, worst_excess = 0.0, -math.inf
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X, y, eps = draw_data(cfg, design, rng)
        d = _centered(X, y)
        outcome = tune_outcome(d, lambda_path(d, 100, default_path_ratio(d.n, d.p)), 10, seed)
        node = select_zz(d.X, 0, build_candidate_grid(d.X, 0)).fit
        res = debias(d, outcome.lasso, node, outcome.sigma_hat)
        w1, delta1 = decomposition_check(d, outcome.lasso, node, design.beta0, eps)
        rn = math.sqrt(d.n)
        worst_id = max(worst_id, abs(w1 + delta1 - rn * (res.b1 - 1.5)))
        bound = rn * node.lam / node.tau_hat_sq * np.abs(outcome.lasso.beta - design.beta0).sum()
        worst_excess = max(worst_excess, abs(delta1) - bound)
    record(
        "decomposition identity and bias bound",
        worst_id <= 1e-9 and worst_excess <= 1e-9,
        f"max identity residual {worst_id:.2e} (<= 1e-9), max |delta| - bound {worst_excess:.2e} (<= 1e-9)",
    )


def test_monotone_traces():
    worst = 0.0
    for seed in range(20):
        X = np.random.default_rng(seed).standard_normal((100, 200))
        X = np.asfortranarray(X - X.mean(axis=0))
        tr = trace_grid(X, 0, build_candidate_grid(X, 0).descending())
        drops = np.concatenate([-np.diff(tr.tau_tilde_sq), -np.diff(tr.f_values)])
        worst = max(worst, float(drops.max()))
    record("trace monotonicity", worst <= 1e-8, f"largest decrease along lambda {worst:.2e} (<= 1e-8)")


def test_coverage_identity_sparse():
    cfg = SimConfig(setting="1", n=100, beta_pattern="sparse", sigma_structure="identity",
                    reps=500, seed=2024, methods="oracle,stps,univ,cv")
    start = time.perf_counter()
    rep = run_simulation(cfg, jobs=JOBS)
    stps, cv, univ = rep.summary("stps"), rep.summary("cv"), rep.summary("univ")
    checks = {
        "STPS cover in [0.91, 0.97]": 0.91 <= stps.coverage <= 0.97,
        "STPS length within 15% of 0.671": abs(stps.mean_length - 0.671) <= 0.15 * 0.671,
        "CV cover <= 0.92": cv.coverage <= 0.92,
        "Univ cover <= 0.91": univ.coverage <= 0.91,
    }
    failed = [k for k, v in checks.items() if not v]
    record(
        "coverage study, identity design, sparse signal",
        not failed,
        f"STPS cover {stps.coverage:.3f} length {stps.mean_length:.3f}, CV cover {cv.coverage:.3f}, "
        f"Univ cover {univ.coverage:.3f}, oracle cover {rep.summary('oracle').coverage:.3f}, "
        f"{len(rep.failures)} failed reps, {time.perf_counter() - start:.0f}s"
        + (f"; missed: {', '.join(failed)}" if failed else ""),
    )


def test_coverage_dense_dense_separation():
    cfg = SimConfig(setting="2", n=100, beta_pattern="dense", gamma_pattern="dense", r2_x=0.8,
                    reps=300, seed=2025, methods="stps,zz")
    start = time.perf_counter()
    rep = run_simulation(cfg, jobs=JOBS)
    stps, zz = rep.summary("stps"), rep.summary("zz")
    smaller = float(np.mean(rep.lambda1("stps") < rep.lambda1("zz")))
    checks = {
        "STPS cover >= 0.90": stps.coverage >= 0.90,
        "ZZ cover <= 0.80": zz.coverage <= 0.80,
        "strictly smaller lambda1 in >= 95%": smaller >= 0.95,
    }
    failed = [k for k, v in checks.items() if not v]
    record(
        "coverage study, structural design, dense nuisance",
        not failed,
        f"STPS cover {stps.coverage:.3f} bias {stps.bias:.3f}, ZZ cover {zz.coverage:.3f} bias {zz.bias:.3f}, "
        f"smaller lambda1 share {smaller:.3f}, {time.perf_counter() - start:.0f}s"
        + (f"; missed: {', '.join(failed)}" if failed else ""),
    )


def test_calibration():
    worst = 0.0
    rng = np.random.default_rng(7)
    for cfg in iter_table_configs(100):
        design = build_design(cfg)
        r2y, r2x = empirical_r2(cfg, design, 5000, rng)
        worst = max(worst, abs(r2y - cfg.r2_y))
        if r2x is not None:
            worst = max(worst, abs(r2x - cfg.r2_x))
    n_cfg = len(list(iter_table_configs(100)))
    record("R^2 calibration", worst <= 0.02, f"max |empirical - target| over {n_cfg} designs {worst:.4f} (<= 0.02)")


def test_worker_count_determinism():
    cfg = SimConfig(setting="1", n=100, sigma_structure="toeplitz", rho=0.9, reps=16, seed=11,
                    methods="oracle,stps,univ,cv,zz")
    one = run_simulation(cfg, jobs=1)
    eight = run_simulation(cfg, jobs=8)
    same = one.to_table_csv().encode() == eight.to_table_csv().encode()
    same_dump = one.estimates_csv() == eight.estimates_csv()
    record("determinism across worker counts", same and same_dump,
           f"report CSV identical: {same}, estimate dump identical: {same_dump}")


@pytest.mark.skipif("HOUSING_CSV" not in os.environ, reason="set HOUSING_CSV to run the housing check")
def test_housing():
    from debiaslasso.cli import infer_pipeline

    path = os.environ["HOUSING_CSV"]
    response = os.environ.get("HOUSING_RESPONSE", "LMV")
    target = os.environ.get("HOUSING_TARGET", "NOX2")
    with open(path, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    controls = [c for c in header if c not in (response, target)]
    d = load_csv(path, response, [target, *controls])
    ctrl = expand_interactions(Dataset(y=d.y, X=d.X[:, 1:], column_names=d.column_names[1:]))
    full = Dataset(y=d.y, X=np.column_stack([d.X[:, 0], ctrl.X]), column_names=(target, *ctrl.column_names))
    res = infer_pipeline(full, selector="stps")
    ok = ctrl.p == 78 and abs(res["b1"] + 0.652) <= 0.05 and abs(res["std_error"] - 0.148) <= 0.02
    record("housing data", ok, f"{ctrl.p} controls, estimate {res['b1']:.4f}, SE {res['std_error']:.4f}")

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debiaslasso.errors import DegenerateError
from debiaslasso.lasso import LambdaGrid
from debiaslasso.nodewise import (
    bias_factor,
    fit_nodewise,
    gram_residual,
    nodewise_lambda_max,
    omega,
    omega_from_tau,
    trace_grid,
)


def design(n, p, seed, rho=0.0):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    if rho:
        Z = np.sqrt(1 - rho) * Z + np.sqrt(rho) * rng.standard_normal((n, 1))
    Z -= Z.mean(axis=0)
    return np.asfortranarray(Z)


def test_null_fit_at_lambda_max():
    X = design(50, 20, 0)
    top = nodewise_lambda_max(X, 0)
    fit = fit_nodewise(X, 0, top)
    s11 = X[:, 0] @ X[:, 0] / 50
    assert np.all(fit.gamma == 0)
    assert fit.tau_tilde_sq == pytest.approx(s11, rel=1e-14)
    assert fit.tau_hat_sq == fit.tau_tilde_sq
    assert omega(fit, X) == pytest.approx(50 / (X[:, 0] @ X[:, 0]), rel=1e-12)
    # with gamma = 0 the bias factor reduces to lambda_max / sqrt(S_11)
    assert bias_factor(fit, X) == pytest.approx(top / np.sqrt(s11), rel=1e-12)


def test_independent_column_concentrates():
    X = design(500, 50, 1)
    fit = fit_nodewise(X, 0, 0.1)
    assert abs(fit.tau_hat_sq - 1.0) <= 0.15


@pytest.mark.parametrize("j", [0, 3])
def test_zero_lambda_is_exact_inverse(j):
    X = design(100, 30, 2, rho=0.4)
    S = X.T @ X / 100
    Sinv = np.linalg.inv(S)
    fit = fit_nodewise(X, j, 0.0)
    np.testing.assert_allclose(fit.theta, Sinv[:, j], atol=1e-8)
    assert omega(fit, X) == pytest.approx(Sinv[j, j], abs=1e-8)
    assert bias_factor(fit, X) <= 1e-8
    assert fit.tau_hat_sq == fit.tau_tilde_sq


def test_zero_lambda_needs_fewer_columns_than_rows():
    with pytest.raises(DegenerateError):
        fit_nodewise(design(20, 25, 0), 0, 0.0)


def test_degenerate_residual():
    X = design(40, 5, 3)
    X[:, 0] = X[:, 1] - 2 * X[:, 2]
    with pytest.raises(DegenerateError):
        fit_nodewise(X, 0, 0.0)


def test_argument_errors():
    X = design(20, 5, 0)
    with pytest.raises(ValueError):
        fit_nodewise(X, 0, -0.1)
    with pytest.raises(ValueError):
        fit_nodewise(X, 5, 0.1)
    with pytest.raises(ValueError):
        fit_nodewise(X[:, :1], 0, 0.1)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(20, 80),
    p=st.integers(3, 120),
    frac=st.floats(1e-3, 1.2),
    rho=st.sampled_from([0.0, 0.5, 0.9]),
    j=st.integers(0, 2),
    seed=st.integers(0, 2**31),
)
def test_fit_identities(n, p, frac, rho, j, seed):
    X = design(n, p, seed, rho)
    lam = frac * nodewise_lambda_max(X, j)
    fit = fit_nodewise(X, j, lam)
    xj = X[:, j]
    others = np.delete(np.arange(p), j)
    assert fit.tau_hat_sq >= fit.tau_tilde_sq > 0
    # stationarity in the gamma direction gives tau_hat^2 = X_j'(X_j - X_{-j} gamma)/n
    assert fit.tau_hat_sq == pytest.approx(xj @ (xj - X[:, others] @ fit.gamma) / n, abs=1e-9)
    g = gram_residual(fit, X)
    assert abs(g[j]) <= 1e-9
    assert np.max(np.abs(g)) <= lam / fit.tau_hat_sq + 1e-9
    om = omega(fit, X)
    assert om == pytest.approx(omega_from_tau(fit), rel=1e-9)
    assert bias_factor(fit, X) <= (lam / fit.tau_hat_sq) / np.sqrt(om) + 1e-9
    if np.any(fit.gamma != 0):
        assert fit.tau_hat_sq > fit.tau_tilde_sq


def test_two_point_trace_ordered():
    X = design(60, 40, 4, rho=0.3)
    top = nodewise_lambda_max(X, 0)
    tr = trace_grid(X, 0, LambdaGrid([top, top / 2]))
    assert tr.lambdas.tolist() == [top / 2, top]
    assert tr.f_values[0] <= tr.f_values[1] + 1e-8


def test_full_trace_monotone():
    X = design(100, 200, 5)
    top = nodewise_lambda_max(X, 0)
    grid = LambdaGrid(np.geomspace(top, 1e-4 * top, 120))
    tr = trace_grid(X, 0, grid)
    assert len(tr) == 120
    assert np.all(np.diff(tr.lambdas) > 0)
    assert np.all(np.diff(tr.tau_tilde_sq) >= -1e-10)
    assert np.all(np.diff(tr.f_values) >= -1e-8)
    assert tr.is_monotone()
    rows = tr.rows()
    assert rows[0][0] == tr.lambdas[0] and len(rows[0]) == 4


def test_trace_matches_cold_fits():
    X = design(40, 60, 6)
    top = nodewise_lambda_max(X, 1)
    grid = LambdaGrid(np.geomspace(top, 0.01 * top, 15))
    tr = trace_grid(X, 1, grid)
    for lam, fit in zip(tr.lambdas, tr.fits):
        cold = fit_nodewise(X, 1, lam)
        np.testing.assert_allclose(fit.gamma, cold.gamma, atol=1e-7)
        assert tr.fit_at(lam) is fit
    with pytest.raises(KeyError):
        tr.fit_at(123.0)


def test_trace_rejects_duplicates():
    X = design(30, 10, 0)
    with pytest.raises(ValueError):
        trace_grid(X, 0, [0.1, 0.1, 0.2])

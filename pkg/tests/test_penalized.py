import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from pencox import (PenaltyConfig, SurvivalDataset, fit_l1, fit_path,
                    gradient, lambda_max, log_partial_likelihood,
                    soft_threshold, standardize)
from pencox.penalized import kkt_residual

from conftest import random_survival_data


def standardized_instance(rng, n, p, signal=3, censor_scale=3.0):
    beta = np.zeros(p)
    beta[:signal] = rng.choice([-1.0, 1.0], signal) * rng.uniform(0.5, 1.0, signal)
    data = random_survival_data(rng, n, p, beta=beta, censor_scale=censor_scale)
    std, _ = standardize(data)
    return std


def penalized_objective(data, beta, lam, wpen):
    act = beta != 0
    return (-log_partial_likelihood(data, beta) / data.n
            + lam * np.sum(wpen[act] * np.abs(beta[act])))


def test_soft_threshold_closed_form(rng):
    for _ in range(200):
        z = rng.normal(scale=2.0)
        t = abs(rng.normal())
        expected = np.sign(z) * max(abs(z) - t, 0.0)
        assert soft_threshold(z, t) == pytest.approx(expected, abs=1e-15)


def test_lambda_max_duplicate_column_tie(rng):
    std = standardized_instance(rng, 40, 4)
    X = np.column_stack([std.covariates, std.covariates[:, 0]])
    dup = SurvivalDataset(X, std.times, std.status)
    g = np.abs(gradient(dup, np.zeros(5))) / dup.n
    assert g[0] == pytest.approx(g[4], abs=1e-12)


def test_lambda_max_weight_homogeneity(rng):
    std = standardized_instance(rng, 40, 4)
    w = np.ones(4)
    base = lambda_max(std, w)
    w2 = w.copy()
    w2[:] = 2.0
    assert lambda_max(std, w2) == pytest.approx(base / 2.0, rel=1e-12)


def test_fit_above_lambda_max_is_identically_zero(rng):
    for trial in range(5):
        std = standardized_instance(rng, 50, 8)
        w = np.ones(8) if trial % 2 == 0 else rng.uniform(0.5, 2.0, 8)
        lmax = lambda_max(std, w)
        fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=1.0001 * lmax))
        assert np.all(fit.beta == 0.0)
        fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=lmax))
        assert np.all(fit.beta == 0.0)


def test_kkt_residuals_on_random_instances(rng):
    """Subgradient optimality at the solver's output, checked with the exact
    gradient of the partial likelihood (20 instances, unit and random weights)."""
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(40, 80))
        p = int(rng.integers(5, 15))
        std = standardized_instance(rng, n, p)
        w = np.ones(p) if trial % 2 == 0 else rng.uniform(0.4, 2.5, p)
        lam = rng.uniform(0.15, 0.6) * lambda_max(std, w)
        fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=lam))
        assert fit.converged
        grad_scaled = gradient(std, fit.beta) / std.n
        worst = max(worst, kkt_residual(grad_scaled, fit.beta, lam, w))
    assert worst <= 1e-4


def test_p1_solution_matches_scalar_minimizer(rng):
    for _ in range(5):
        std = standardized_instance(rng, 60, 1, signal=1)
        lam = rng.uniform(0.02, 0.2)
        w = np.ones(1)
        fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=lam))
        res = minimize_scalar(
            lambda b: penalized_objective(std, np.array([b]), lam, w),
            bounds=(-4.0, 4.0), method="bounded",
            options={"xatol": 1e-10})
        assert fit.beta[0] == pytest.approx(res.x, abs=1e-5)


def test_infinite_weight_pins_coordinate_at_zero(rng):
    std = standardized_instance(rng, 50, 6)
    w = np.ones(6)
    w[2] = np.inf
    fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=0.05),
                 beta0=np.full(6, 0.3))
    assert fit.beta[2] == 0.0
    assert np.count_nonzero(fit.beta) > 0


def test_weight_lambda_scaling_consistency(rng):
    std = standardized_instance(rng, 50, 6)
    w = rng.uniform(0.5, 2.0, 6)
    lam = 0.3 * lambda_max(std, w)
    a = fit_l1(std, PenaltyConfig(weights=w, lambda_=lam))
    c = 3.7
    b = fit_l1(std, PenaltyConfig(weights=c * w, lambda_=lam / c))
    assert np.allclose(a.beta, b.beta, atol=1e-8)


def test_objective_never_worse_than_null(rng):
    for _ in range(5):
        std = standardized_instance(rng, 40, 10)
        w = np.ones(10)
        lam = 0.2 * lambda_max(std, w)
        fit = fit_l1(std, PenaltyConfig(weights=w, lambda_=lam))
        assert penalized_objective(std, fit.beta, lam, w) \
            <= penalized_objective(std, np.zeros(10), lam, w) + 1e-12


def test_sweep_order_independence_at_convergence(rng):
    std = standardized_instance(rng, 60, 8)
    lam = 0.25 * lambda_max(std, np.ones(8))
    fit = fit_l1(std, PenaltyConfig(lambda_=lam))
    perm = rng.permutation(8)
    permuted = SurvivalDataset(std.covariates[:, perm], std.times, std.status)
    fit_p = fit_l1(permuted, PenaltyConfig(lambda_=lam))
    back = np.empty(8)
    back[perm] = fit_p.beta
    assert np.allclose(fit.beta, back, atol=1e-6)


def test_path_first_fit_zero_and_endpoints(rng):
    std = standardized_instance(rng, 60, 10)
    path = fit_path(std, PenaltyConfig())
    assert np.all(path.fits[0].beta == 0.0)
    assert path.n_active[0] == 0
    assert np.all(np.diff(path.lambdas) < 0)
    assert path.grid.size == 100


def test_path_objective_chain_weakly_decreases(rng):
    """Optimal objective value at each lambda evaluated at its own solution is
    bounded by the previous solution's objective at the same lambda."""
    std = standardized_instance(rng, 50, 8)
    w = np.ones(8)
    path = fit_path(std, PenaltyConfig(weights=w))
    for k in range(1, min(len(path.fits), 40)):
        lam = path.lambdas[k]
        own = penalized_objective(std, path.fits[k].beta, lam, w)
        prev = penalized_objective(std, path.fits[k - 1].beta, lam, w)
        assert own <= prev + 1e-9


def test_path_reproducible(rng):
    std = standardized_instance(rng, 50, 8)
    a = fit_path(std, PenaltyConfig())
    b = fit_path(std, PenaltyConfig())
    assert np.array_equal(a.lambdas, b.lambdas)
    for fa, fb in zip(a.fits, b.fits):
        assert np.array_equal(fa.beta, fb.beta)


def test_unstandardized_data_is_flagged(rng):
    data = random_survival_data(rng, 30, 3)
    data = SurvivalDataset(data.covariates * 10 + 3, data.times, data.status)
    fit = fit_l1(data, PenaltyConfig(lambda_=0.1))
    assert "unstandardized-data" in fit.flags


def test_all_infinite_weights_rejected(rng):
    std = standardized_instance(rng, 30, 3)
    with pytest.raises(ValueError, match="infinite"):
        fit_l1(std, PenaltyConfig(weights=np.full(3, np.inf), lambda_=0.1))

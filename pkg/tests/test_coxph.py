import numpy as np
import pytest

from pencox import (IllPosedError, SurvivalDataset, gradient, hazard_ratios,
                    hessian, log_partial_likelihood, newton_fit, risk_scores,
                    standardize)
from pencox.coxph import CoxFit, RiskSetIndex, eta_gradient_diag_hessian

from conftest import random_survival_data


def brute_force_log_product(data, beta):
    """Direct evaluation of the partial-likelihood product: each event term is
    exp(beta'X_j) over the sum of exp(beta'X_k) for k with t_k >= t_j.

    Independent of the package's suffix-sum/stabilization path; on distinct
    event times this is exactly the textbook product form.
    """
    total = 0.0
    for j in range(data.n):
        if data.status[j] == 1:
            risk = data.times >= data.times[j]
            num = data.covariates[j] @ beta
            den = np.log(np.sum(np.exp(data.covariates[risk] @ beta)))
            total += num - den
    return total


def central_difference_gradient(data, beta, h=1e-5):
    g = np.zeros(data.p)
    for j in range(data.p):
        up, dn = beta.copy(), beta.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (log_partial_likelihood(data, up)
                - log_partial_likelihood(data, dn)) / (2 * h)
    return g


def test_null_likelihood_is_sum_of_log_risk_set_sizes():
    data = SurvivalDataset(np.zeros((3, 1)), [1.0, 2.0, 3.0], [1, 1, 1])
    expected = -(np.log(3) + np.log(2) + np.log(1))
    assert log_partial_likelihood(data, np.zeros(1)) == pytest.approx(expected,
                                                                      abs=1e-12)


def test_all_censored_likelihood_and_gradient_are_zero(rng):
    # The validated container refuses all-censored data, but the likelihood
    # code is defensive about the degenerate case: empty event sum -> 0.
    from types import SimpleNamespace
    X = rng.standard_normal((6, 2))
    censored = SimpleNamespace(covariates=X, times=np.arange(1.0, 7.0),
                               status=np.zeros(6), n=6, p=2)
    beta = rng.standard_normal(2)
    assert log_partial_likelihood(censored, beta) == 0.0
    assert np.array_equal(gradient(censored, beta), np.zeros(2))


def test_likelihood_matches_brute_force_product(rng):
    for _ in range(25):
        n = int(rng.integers(4, 9))
        p = int(rng.integers(1, 4))
        data = random_survival_data(rng, n, p, censor_scale=2.0)
        beta = rng.standard_normal(p)
        assert log_partial_likelihood(data, beta) == pytest.approx(
            brute_force_log_product(data, beta), abs=1e-10)


def test_likelihood_breslow_ties_match_shared_denominator_form(rng):
    for _ in range(10):
        data = random_survival_data(rng, 8, 2, censor_scale=2.0, tie_prob=1.0)
        beta = rng.standard_normal(2)
        assert log_partial_likelihood(data, beta) == pytest.approx(
            brute_force_log_product(data, beta), abs=1e-10)


def test_likelihood_nonpositive(rng):
    for _ in range(20):
        data = random_survival_data(rng, 10, 3, censor_scale=1.0, tie_prob=0.3)
        beta = rng.standard_normal(3) * 2
        assert log_partial_likelihood(data, beta) <= 1e-12


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(6, 20))
        p = int(rng.integers(1, 5))
        data = random_survival_data(rng, n, p, censor_scale=2.0, tie_prob=0.3)
        beta = rng.standard_normal(p) * 0.7
        g = gradient(data, beta)
        fd = central_difference_gradient(data, beta)
        scale = np.maximum(np.abs(fd), 1.0)
        worst = max(worst, np.max(np.abs(g - fd) / scale))
    assert worst < 1e-5


def test_gradient_constant_covariate_is_zero_at_null():
    X = np.ones((5, 1)) * 2.7
    data = SurvivalDataset(X, [1.0, 2, 3, 4, 5], [1, 1, 0, 1, 1])
    assert gradient(data, np.zeros(1))[0] == pytest.approx(0.0, abs=1e-12)


def test_hessian_matches_finite_difference_of_gradient(rng):
    data = random_survival_data(rng, 12, 3, censor_scale=2.0)
    beta = rng.standard_normal(3) * 0.5
    H = hessian(data, beta)
    h = 1e-5
    for j in range(3):
        up, dn = beta.copy(), beta.copy()
        up[j] += h
        dn[j] -= h
        col = -(gradient(data, up) - gradient(data, dn)) / (2 * h)
        assert np.allclose(H[:, j], col, rtol=1e-4, atol=1e-6)


def test_concavity_sampled(rng):
    for _ in range(20):
        data = random_survival_data(rng, 12, 3, censor_scale=2.0, tie_prob=0.3)
        b1, b2 = rng.standard_normal(3), rng.standard_normal(3)
        t = rng.uniform(0.05, 0.95)
        mid = log_partial_likelihood(data, t * b1 + (1 - t) * b2)
        chord = (t * log_partial_likelihood(data, b1)
                 + (1 - t) * log_partial_likelihood(data, b2))
        assert mid >= chord - 1e-9


def test_translation_invariance(rng):
    data = random_survival_data(rng, 30, 3, censor_scale=2.0)
    shifted = SurvivalDataset(data.covariates + np.array([5.0, -2.0, 11.0]),
                              data.times, data.status)
    beta = rng.standard_normal(3) * 0.5
    assert log_partial_likelihood(shifted, beta) == pytest.approx(
        log_partial_likelihood(data, beta), abs=1e-8)
    assert np.allclose(gradient(shifted, beta), gradient(data, beta), atol=1e-8)
    fit_a = newton_fit(data, ridge_lambda=0.0)
    fit_b = newton_fit(shifted, ridge_lambda=0.0)
    assert np.allclose(fit_a.beta, fit_b.beta, atol=1e-8)


def test_newton_balanced_binary_covariate_is_symmetric():
    X = np.array([[0.0], [1.0], [0.0], [1.0], [0.0], [1.0]])
    times = np.array([1.0, 1.0, 2.0, 2.0, 3.0, 3.0])
    status = np.ones(6)
    fit = newton_fit(SurvivalDataset(X, times, status), ridge_lambda=0.0)
    assert fit.converged
    assert fit.beta[0] == pytest.approx(0.0, abs=1e-8)


def test_newton_large_ridge_shrinks_with_stationarity(rng):
    data = random_survival_data(rng, 40, 3,
                                beta=np.array([0.8, -0.5, 0.0]),
                                censor_scale=3.0)
    lam = 1e4
    fit = newton_fit(data, ridge_lambda=lam)
    assert np.max(np.abs(fit.beta)) < 0.01
    g = gradient(data, fit.beta)
    assert np.allclose(g, 2 * lam * fit.beta, atol=1e-6)


def test_newton_recovers_truth_with_stationarity(rng):
    rng = np.random.default_rng(99)
    beta_true = np.array([0.5, 0.5, 0.5])
    data = random_survival_data(rng, 100, 3, beta=beta_true)
    fit = newton_fit(data, ridge_lambda=0.0)
    assert fit.converged
    assert np.linalg.norm(gradient(data, fit.beta)) < 1e-6
    se = np.sqrt(np.diag(np.linalg.inv(hessian(data, fit.beta))))
    assert np.all(np.abs(fit.beta - beta_true) <= 3 * se)


def test_newton_refuses_ill_posed():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 10))
    data = SurvivalDataset(X, np.arange(1.0, 7.0), np.ones(6))
    with pytest.raises(IllPosedError):
        newton_fit(data, ridge_lambda=0.0)


def test_newton_highdim_ridge_matches_row_space_solution(rng):
    """p > n reduced solve must agree with the direct p x p Newton."""
    data = random_survival_data(rng, 15, 25, censor_scale=3.0)
    lam = 5.0
    fit = newton_fit(data, ridge_lambda=lam)
    g = gradient(data, fit.beta)
    assert np.allclose(g, 2 * lam * fit.beta, atol=1e-6)


def test_hazard_ratios():
    fit = CoxFit(beta=np.array([0.0, np.log(2.0), -1.0]),
                 log_partial_likelihood=-1.0, n_iterations=1, converged=True)
    hr = hazard_ratios(fit)
    assert hr[0] == pytest.approx(1.0)
    assert hr[1] == pytest.approx(2.0)
    assert np.allclose(hr, np.exp(fit.beta))


def test_risk_scores(rng):
    data = random_survival_data(rng, 10, 1)
    assert np.array_equal(risk_scores(data, np.zeros(1)), np.zeros(10))
    assert np.allclose(risk_scores(data, np.ones(1)), data.covariates[:, 0])
    beta = rng.standard_normal(1)
    g, _ = eta_gradient_diag_hessian(data, beta)
    assert np.allclose(gradient(data, beta), data.covariates.T @ g)


def test_risk_set_index_nested(rng):
    data = random_survival_data(rng, 15, 1, censor_scale=1.0, tie_prob=1.0)
    idx = RiskSetIndex.from_dataset(data)
    sizes = data.n - idx.starts
    assert np.all(np.diff(sizes) < 0)          # later start -> smaller risk set
    assert idx.d_group.sum() == data.status.sum()

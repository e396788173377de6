"""Scikit-learn style estimators wrapping the penalized Cox solvers.

These compose with sklearn tooling (get_params/set_params, clone,
pipelines). The survival target y may be a (n, 2) array with columns
(time, status), a (time, status) tuple of vectors, or a structured array
with 'time' and 'status'/'event' fields.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import crossval, penalized, weights as weights_mod
from .data import SurvivalDataset, standardize
from .metrics import cpe_k_index, harrell_c
from .penalized import PenaltyConfig


def check_survival_y(y):
    """Coerce the survival target into (times, status) vectors."""
    if isinstance(y, tuple) and len(y) == 2:
        times, status = y
    elif hasattr(y, "dtype") and getattr(y.dtype, "names", None):
        names = y.dtype.names
        time_field = "time" if "time" in names else names[-1]
        event_field = next((f for f in ("status", "event", "delta")
                            if f in names), names[0])
        times, status = y[time_field], y[event_field]
    else:
        arr = np.asarray(y, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("y must be (time, status) pairs: an (n, 2) array, "
                             "a tuple of two vectors, or a structured array")
        times, status = arr[:, 0], arr[:, 1]
    return (np.asarray(times, dtype=float),
            np.asarray(status, dtype=float).astype(float))


class CoxLasso(BaseEstimator):
    """L1-penalized Cox regression with cross-validated penalty selection.

    Parameters
    ----------
    lambda_ : "cv" or float
        Penalty level on the (1/n)-scaled objective; "cv" selects it by
        K-fold cross-validated partial likelihood.
    folds : int
        Folds for the CV curve.
    cv_mode : {"vvh", "basic"}
        Verweij-Van Houwelingen or basic cross-validation error.
    with_standardization : bool
        Standardize columns before fitting; coefficients are always reported
        on the original scale.
    seed : int
        Drives fold assignment (and any weight computation in subclasses).
    """

    _penalty_kind = "lasso"

    def __init__(self, lambda_="cv", folds=10, cv_mode="vvh",
                 with_standardization=True, seed=0):
        self.lambda_ = lambda_
        self.folds = folds
        self.cv_mode = cv_mode
        self.with_standardization = with_standardization
        self.seed = seed

    def _weight_vector(self, data):
        return None, 1.0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        times, status = check_survival_y(y)
        data = SurvivalDataset(X, times, status)
        self.n_features_in_ = data.p
        if self.with_standardization:
            work, transform = standardize(data)
        else:
            work, transform = data, None
        wv, gamma = self._weight_vector(work)
        self.weights_ = wv
        self.gamma_ = gamma
        config = PenaltyConfig(kind=self._penalty_kind, weights=wv)
        if self.lambda_ == "cv":
            cv = crossval.cv_path(work, config, folds=self.folds,
                                  mode=self.cv_mode, seed=self.seed,
                                  warn_unstandardized=False)
            self.cv_result_ = cv
            lam = cv.lambda_min
            path = penalized.fit_path(work, config,
                                      lambdas=cv.lambdas[:cv.index_min + 1],
                                      warn_unstandardized=False)
            fit = path.fits[-1]
        else:
            lam = float(self.lambda_)
            self.cv_result_ = None
            fit = penalized.fit_l1(
                work, PenaltyConfig(kind=self._penalty_kind, weights=wv,
                                    lambda_=lam),
                warn_unstandardized=False)
        self.fit_ = fit
        self.lambda_selected_ = lam
        beta = fit.beta if transform is None \
            else transform.coefficients_to_original(fit.beta)
        self.coef_ = beta
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit before predict/score")

    def predict(self, X):
        """Risk scores (linear predictor); larger means higher hazard."""
        self._check_fitted()
        return np.asarray(X, dtype=float) @ self.coef_

    def score(self, X, y):
        """Harrell's concordance of the risk scores on (X, y)."""
        self._check_fitted()
        times, status = check_survival_y(y)
        return harrell_c(times, status, self.predict(X))

    def k_index(self, X):
        """Gonen-Heller concordance probability estimate of the scores."""
        self._check_fitted()
        return cpe_k_index(self.predict(X))


class CoxAdaptiveLasso(CoxLasso):
    """Adaptive-lasso Cox regression with a pluggable weight strategy.

    weight_method is one of "ridge", "pca", "uni", "rsf"; gamma may be a
    float in [0.2, 2] or "cv" for grid selection by cross-validated partial
    likelihood.
    """

    _penalty_kind = "adaptive_lasso"

    def __init__(self, weight_method="ridge", gamma=1.0, lambda_="cv",
                 folds=10, cv_mode="vvh", with_standardization=True, seed=0):
        super().__init__(lambda_=lambda_, folds=folds, cv_mode=cv_mode,
                         with_standardization=with_standardization, seed=seed)
        self.weight_method = weight_method
        self.gamma = gamma

    def _weight_vector(self, data):
        gamma = 1.0 if self.gamma == "cv" else float(self.gamma)
        wv = weights_mod.compute_weights(self.weight_method, data, gamma=gamma,
                                         seed=self.seed)
        if self.gamma == "cv":
            best_gamma, _ = weights_mod.select_gamma(
                data, wv, kind=self._penalty_kind, folds=self.folds,
                mode=self.cv_mode, seed=self.seed)
            wv = wv.with_gamma(best_gamma)
            return wv, best_gamma
        return wv, gamma

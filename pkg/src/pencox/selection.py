"""Multi-partition best-model selection.

The data is split N times; each split gets a cross-validated penalized fit on
its training half and a K-index score on its test half. Coefficient
magnitudes are aggregated into a per-covariate importance index

    I_j = sum_k |beta_j^(k)| K^(k)  /  max_j sum_k |beta_j^(k)| K^(k),

models are scored by how much of their coefficient mass lands on the
top-K important covariates (the power index), and the winning iteration's
support is refit on all data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import coxph, crossval, penalized, weights as weights_mod
from .coxph import CoxFit
from .data import SurvivalDataset, split, standardize
from .metrics import cpe_k_index
from .penalized import PenaltyConfig


@dataclass(frozen=True)
class IterationRecord:
    seed: int
    beta: np.ndarray             # original-scale coefficients, full length p
    k_index: float
    lambda_: float
    n_active: int
    flags: tuple[str, ...] = field(default=())


@dataclass(frozen=True)
class SelectionRun:
    n_iterations: int
    records: tuple[IterationRecord, ...]
    importance: np.ndarray
    k_top: int
    power: np.ndarray
    best_index: int              # 0-based position of the winning iteration
    final_fit: CoxFit
    literal_power_index: bool = False

    @property
    def best_record(self) -> IterationRecord:
        return self.records[self.best_index]


def top_k_count(n: int) -> int:
    """Number of importance slots entering the power index: ceil(sqrt(n/2))."""
    return int(math.ceil(math.sqrt(n / 2.0)))


def importance_index(betas: np.ndarray, k_indices: np.ndarray) -> np.ndarray:
    """Normalized K-index-weighted aggregate of |beta_j| across iterations."""
    raw = np.abs(betas).T @ np.asarray(k_indices, dtype=float)
    peak = raw.max()
    if peak <= 0:
        raise ValueError("every iteration selected nothing; importance "
                         "index is undefined")
    return raw / peak


def power_index(importance: np.ndarray, beta: np.ndarray, k_top: int,
                literal: bool = False) -> float:
    """Share of one model's coefficient mass on the top-K important covariates.

    ``literal`` switches the member set from {j : I_j >= I_(K)} to the
    printed-but-implausible {j : I_j <= I_(K)} (the least important
    covariates); both are normalized by the sum of the K largest importances.
    """
    p = importance.size
    k = min(k_top, p)
    sorted_desc = np.sort(importance)[::-1]
    i_k = sorted_desc[k - 1]
    norm = sorted_desc[:k].sum()
    mass = np.abs(beta)
    total = mass.sum()
    if total == 0 or norm == 0:
        return 0.0
    members = importance <= i_k if literal else importance >= i_k
    return float((importance[members] * mass[members]).sum() / (norm * total))


def _fit_one_partition(data: SurvivalDataset, train_size: int, seed: int,
                       kind: str, weight_method: str | None, gamma: float,
                       folds: int, mode: str) -> IterationRecord:
    part = split(data, train_size, seed)
    train = data.subset(part.train_indices)
    test = data.subset(part.test_indices)
    std_train, transform = standardize(train)
    flags = []
    wv = None
    if weight_method is not None:
        wv = weights_mod.compute_weights(weight_method, std_train, gamma=gamma,
                                         seed=seed)
        flags.extend(wv.flags)
    config = PenaltyConfig(kind=kind, weights=wv)
    cv = crossval.cv_path(std_train, config, folds=folds, mode=mode, seed=seed,
                          warn_unstandardized=False)
    sub_grid = cv.lambdas[:cv.index_min + 1]
    path = penalized.fit_path(std_train, config, lambdas=sub_grid,
                              warn_unstandardized=False)
    fit = path.fits[-1]
    if len(path.fits) < len(sub_grid):
        flags.append("train-path-stopped-early")
    flags.extend(fit.flags)
    beta_orig = transform.coefficients_to_original(fit.beta)
    scores = test.covariates @ beta_orig
    k_index = cpe_k_index(scores)
    return IterationRecord(seed=seed, beta=beta_orig, k_index=float(k_index),
                           lambda_=fit.lambda_,
                           n_active=int(np.count_nonzero(beta_orig)),
                           flags=tuple(flags))


def refit_support(data: SurvivalDataset, support: np.ndarray,
                  folds: int = 10, seed: int = 0) -> CoxFit:
    """Refit the selected variables on all data.

    Unpenalized Newton when the support is comfortably identified
    (|support| < events/2); otherwise an L2 penalty chosen by CVE keeps the
    refit well posed.
    """
    support = np.asarray(support, dtype=int)
    p = data.p
    if support.size == 0:
        return CoxFit(beta=np.zeros(p), log_partial_likelihood=
                      coxph.log_partial_likelihood(data, np.zeros(p)),
                      n_iterations=0, converged=True,
                      flags=("empty-support",))
    restricted = SurvivalDataset(data.covariates[:, support], data.times,
                                 data.status,
                                 tuple(data.names[j] for j in support))
    std_restricted, transform = standardize(restricted)
    if support.size < data.n_events / 2:
        fit = coxph.newton_fit(std_restricted, ridge_lambda=0.0)
        flags = fit.flags
    else:
        cv = crossval.cv_ridge_lambda(std_restricted, folds=folds, seed=seed)
        fit = coxph.newton_fit(std_restricted, ridge_lambda=cv.lambda_min)
        flags = fit.flags + ("ridge-refit",)
    beta = np.zeros(p)
    beta[support] = transform.coefficients_to_original(fit.beta)
    return CoxFit(beta=beta, log_partial_likelihood=
                  coxph.log_partial_likelihood(data, beta),
                  n_iterations=fit.n_iterations, converged=fit.converged,
                  lambda_=fit.lambda_, flags=flags)


def run_selection(data: SurvivalDataset, kind: str = "lasso",
                  weight_method: str | None = None, gamma: float = 1.0,
                  n_iterations: int = 100, train_size: int | None = None,
                  seed: int = 0, folds: int = 10, mode: str = "vvh",
                  literal_power_index: bool = False,
                  n_jobs: int = 1) -> SelectionRun:
    """Run the N-partition selection procedure and refit the winning support.

    Iterations are independent given their seeds and can run in parallel;
    the result does not depend on n_jobs.
    """
    if n_iterations < 1:
        raise ValueError("need at least one iteration")
    if train_size is None:
        train_size = data.n // 2
    seeds = [int(s.generate_state(1)[0])
             for s in np.random.SeedSequence(seed).spawn(n_iterations)]
    worker = delayed(_fit_one_partition)
    records = Parallel(n_jobs=n_jobs)(
        worker(data, train_size, s, kind, weight_method, gamma, folds, mode)
        for s in seeds)

    betas = np.array([r.beta for r in records])
    k_indices = np.array([r.k_index for r in records])
    importance = importance_index(betas, k_indices)
    k_top = top_k_count(data.n)
    power = np.array([power_index(importance, r.beta, k_top,
                                  literal=literal_power_index)
                      for r in records])
    best = int(np.argmax(k_indices + power))     # ties -> lowest index
    final = refit_support(data, np.flatnonzero(records[best].beta != 0),
                          folds=folds, seed=seed)
    return SelectionRun(n_iterations=n_iterations, records=tuple(records),
                        importance=importance, k_top=k_top, power=power,
                        best_index=best, final_fit=final,
                        literal_power_index=literal_power_index)


def importance_ranking(run: SelectionRun) -> np.ndarray:
    """Column indices sorted by importance, descending; ties by index."""
    p = run.importance.size
    return np.lexsort((np.arange(p), -run.importance))

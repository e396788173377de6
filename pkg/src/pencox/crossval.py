"""K-fold cross-validation for penalty-level selection.

The default criterion is the Verweij-Van Houwelingen cross-validated partial
likelihood CVE = -2 * sum_k [ l(beta_-k) - l_-k(beta_-k) ], where l uses all
subjects and l_-k only the fold's complement. The basic variant
-2 * sum_k l_k(beta_-k) is kept for comparison; it breaks down when a fold
holds too few events, which is exactly the high-censoring regime this
package targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import coxph, penalized
from .coxph import RiskSetIndex
from .data import DataError, SurvivalDataset
from .penalized import PenaltyConfig

RIDGE_GRID_POINTS = 11


@dataclass(frozen=True)
class CvResult:
    """Cross-validation curve over a shared lambda grid."""

    lambdas: np.ndarray          # grid entries valid in every fold (descending)
    cve: np.ndarray
    se: np.ndarray               # fold-spread standard error of each CVE value
    lambda_min: float
    folds: int
    mode: str                    # vvh | basic
    fold_assignments: np.ndarray
    fold_curves: np.ndarray      # (folds, len(lambdas)) per-fold contributions

    @property
    def index_min(self) -> int:
        return int(np.argmin(self.cve))


def make_folds(data: SurvivalDataset, folds: int, seed: int,
               stratify_events: bool = False, max_retries: int = 100) -> np.ndarray:
    """Assign each subject to one of ``folds`` near-equal folds.

    Every fold's complement must keep at least one event; assignment is
    re-randomized (bounded retries) until that holds.
    """
    n = data.n
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > n:
        raise ValueError(f"cannot make {folds} folds from {n} subjects")
    rng = np.random.default_rng(seed)
    events = data.status == 1
    for _ in range(max_retries):
        assignment = np.empty(n, dtype=int)
        if stratify_events:
            for mask in (events, ~events):
                idx = rng.permutation(np.flatnonzero(mask))
                assignment[idx] = np.arange(idx.size) % folds
        else:
            assignment[rng.permutation(n)] = np.arange(n) % folds
        ok = all(events[assignment != k].sum() >= 1 for k in range(folds))
        if ok:
            return assignment
    raise DataError("could not build folds whose complements all contain an event")


def _vvh_contribution(full_data, full_index, train_data, train_index, beta):
    return (coxph.log_partial_likelihood(full_data, beta, full_index)
            - coxph.log_partial_likelihood(train_data, beta, train_index))


def cv_path(data: SurvivalDataset, config: PenaltyConfig, folds: int = 10,
            mode: str = "vvh", seed: int = 0, lambdas=None,
            stratify_events: bool = False, dfmax: int | None = None,
            sweep_budget: int = penalized.SWEEP_BUDGET_DEFAULT,
            warn_unstandardized: bool = True) -> CvResult:
    """Cross-validate the L1 path and locate the CVE-minimizing lambda.

    The lambda grid is computed once from the full data and shared across
    folds so CVE(lambda) is well defined. Fold paths can terminate early
    (saturation, non-convergence); the curve is reported on the grid prefix
    that every fold completed with converged fits.
    """
    if mode not in ("vvh", "basic"):
        raise ValueError(f"unknown CV mode {mode!r}")
    full_index = RiskSetIndex.from_dataset(data)
    grid = np.asarray(lambdas, dtype=float) if lambdas is not None else \
        penalized.default_lambda_grid(data, config, full_index)
    assignment = make_folds(data, folds, seed, stratify_events)

    n_valid = len(grid)
    curves = []
    for k in range(folds):
        train = data.subset(np.flatnonzero(assignment != k))
        train_index = RiskSetIndex.from_dataset(train)
        path = penalized.fit_path(train, config, lambdas=grid, dfmax=dfmax,
                                  sweep_budget=sweep_budget,
                                  warn_unstandardized=warn_unstandardized)
        converged = [f.converged for f in path.fits]
        n_ok = len(path.fits) if all(converged) else converged.index(False)
        n_valid = min(n_valid, n_ok)
        if n_valid == 0:
            raise DataError("no lambda on the shared grid is fittable in every fold")
        if mode == "vvh":
            contrib = [_vvh_contribution(data, full_index, train, train_index,
                                         f.beta) for f in path.fits[:n_valid]]
        else:
            test = data.subset(np.flatnonzero(assignment == k))
            test_index = RiskSetIndex.from_dataset(test)
            contrib = [coxph.log_partial_likelihood(test, f.beta, test_index)
                       for f in path.fits[:n_valid]]
        curves.append(contrib)

    fold_curves = np.array([c[:n_valid] for c in curves])
    cve = -2.0 * fold_curves.sum(axis=0)
    se = fold_curves.std(axis=0, ddof=1) * 2.0 * np.sqrt(folds) if folds > 1 \
        else np.zeros(n_valid)
    lambdas_valid = grid[:n_valid]
    lambda_min = float(lambdas_valid[int(np.argmin(cve))])
    return CvResult(lambdas=lambdas_valid, cve=cve, se=se, lambda_min=lambda_min,
                    folds=folds, mode=mode, fold_assignments=assignment,
                    fold_curves=fold_curves)


def default_ridge_grid(data: SurvivalDataset,
                       n_points: int = RIDGE_GRID_POINTS) -> np.ndarray:
    """Descending log-spaced ridge penalty grid anchored at the event count.

    The curvature of l per coordinate scales with the number of events, so
    n_events * [1e-3, 1e2] spans essentially-unpenalized to fully-shrunk.
    """
    n_events = max(int(np.sum(data.status)), 1)
    return n_events * np.logspace(2, -3, n_points)


def cv_ridge_lambda(data: SurvivalDataset, grid=None, folds: int = 10,
                    mode: str = "vvh", seed: int = 0,
                    stratify_events: bool = False) -> CvResult:
    """Select the L2 penalty of a ridge Cox fit by K-fold CVE."""
    if mode not in ("vvh", "basic"):
        raise ValueError(f"unknown CV mode {mode!r}")
    grid = np.asarray(grid, dtype=float) if grid is not None \
        else default_ridge_grid(data)
    if np.any(grid <= 0):
        raise ValueError("ridge grid must be strictly positive")
    full_index = RiskSetIndex.from_dataset(data)
    assignment = make_folds(data, folds, seed, stratify_events)

    curves = np.empty((folds, len(grid)))
    for k in range(folds):
        train = data.subset(np.flatnonzero(assignment != k))
        train_index = RiskSetIndex.from_dataset(train)
        beta = None
        for g, lam in enumerate(grid):
            fit = coxph.newton_fit(train, ridge_lambda=float(lam), beta0=beta,
                                   index=train_index)
            beta = fit.beta
            if mode == "vvh":
                curves[k, g] = _vvh_contribution(data, full_index, train,
                                                 train_index, fit.beta)
            else:
                test = data.subset(np.flatnonzero(assignment == k))
                curves[k, g] = coxph.log_partial_likelihood(test, fit.beta)
    cve = -2.0 * curves.sum(axis=0)
    se = curves.std(axis=0, ddof=1) * 2.0 * np.sqrt(folds) if folds > 1 \
        else np.zeros(len(grid))
    lambda_min = float(grid[int(np.argmin(cve))])
    return CvResult(lambdas=grid, cve=cve, se=se, lambda_min=lambda_min,
                    folds=folds, mode=mode, fold_assignments=assignment,
                    fold_curves=curves)

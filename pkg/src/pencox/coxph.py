"""Cox partial-likelihood machinery with Breslow handling of tied event times.

Everything here works on the log partial likelihood

    l(beta) = sum_events eta_j - sum_event_times d_g * log( sum_{k in R_g} exp(eta_k) )

with eta = X beta and R_g = {k : t_k >= t_g}. All exponentials are computed
after subtracting max(eta), so coefficient magnitudes far beyond the usual
range stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SurvivalDataset


class NumericError(ArithmeticError):
    """Raised when a likelihood evaluation degenerates despite stabilization."""


class IllPosedError(ValueError):
    """Raised when an unpenalized fit is requested in a p >= events setting."""


@dataclass(frozen=True)
class RiskSetIndex:
    """Sorted-order bookkeeping shared by every likelihood evaluation.

    Subjects are sorted by observed time; tied times form groups. The risk
    set of group g is the suffix starting at ``starts[g]`` in sorted order.
    """

    order: np.ndarray            # argsort of times (stable)
    inverse: np.ndarray          # inverse permutation of order
    status_sorted: np.ndarray
    starts: np.ndarray           # first sorted index of each tie group
    group_of: np.ndarray         # tie-group id per sorted subject
    d_group: np.ndarray          # events per tie group
    n_events: int

    @classmethod
    def from_arrays(cls, times, status) -> "RiskSetIndex":
        t = np.asarray(times, dtype=float)
        s = np.asarray(status, dtype=float)
        order = np.argsort(t, kind="stable")
        ts = t[order]
        new_group = np.r_[True, ts[1:] != ts[:-1]]
        starts = np.flatnonzero(new_group)
        group_of = np.cumsum(new_group) - 1
        d_group = np.add.reduceat(s[order], starts)
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        return cls(order=order, inverse=inverse, status_sorted=s[order],
                   starts=starts, group_of=group_of, d_group=d_group,
                   n_events=int(s.sum()))

    @classmethod
    def from_dataset(cls, data: SurvivalDataset) -> "RiskSetIndex":
        return cls.from_arrays(data.times, data.status)


@dataclass(frozen=True)
class CoxFit:
    """Fitted coefficient vector plus solver diagnostics."""

    beta: np.ndarray
    log_partial_likelihood: float
    n_iterations: int
    converged: bool
    lambda_: float = 0.0
    weights_id: str = "none"
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if not np.all(np.isfinite(beta)):
            raise NumericError("fitted coefficients contain non-finite values")
        object.__setattr__(self, "beta", beta)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta != 0.0)


def _risk_denominators(index: RiskSetIndex, eta: np.ndarray):
    """Stabilized exp(eta) in sorted order plus per-group risk-set sums.

    Returns (e, D, shift) with e = exp(eta_sorted - shift) and
    D[g] = sum_{k in R_g} e_k, so the true denominator is D[g]*exp(shift).
    """
    eta_s = eta[index.order]
    shift = float(eta_s.max())
    e = np.exp(eta_s - shift)
    suffix = np.cumsum(e[::-1])[::-1]
    D = suffix[index.starts]
    if not np.all(np.isfinite(D)):
        raise NumericError("risk-set sums overflowed despite stabilization")
    return e, D, shift, eta_s


def log_partial_likelihood(data: SurvivalDataset, beta,
                           index: RiskSetIndex | None = None) -> float:
    """Breslow-adjusted log partial likelihood l(beta); always <= 0."""
    beta = np.asarray(beta, dtype=float)
    if not np.all(np.isfinite(beta)):
        raise NumericError("beta contains non-finite values")
    index = index or RiskSetIndex.from_dataset(data)
    if index.n_events == 0:
        return 0.0
    eta = data.covariates @ beta
    e, D, shift, eta_s = _risk_denominators(index, eta)
    events = index.status_sorted == 1
    has_events = index.d_group > 0
    value = float(eta_s[events].sum()
                  - np.sum(index.d_group[has_events]
                           * (np.log(D[has_events]) + shift)))
    if not np.isfinite(value):
        raise NumericError("log partial likelihood is non-finite")
    return value


def eta_gradient_diag_hessian(data: SurvivalDataset, beta,
                              index: RiskSetIndex | None = None):
    """Per-subject first derivative of l w.r.t. eta and the diagonal of the
    negative second derivative, both in original subject order.

    These are the working quantities of the penalized solver:
    g_i = delta_i - exp(eta_i) * sum_{g: t_g <= t_i} d_g / D_g and
    h_i = exp(eta_i) * A_i - exp(eta_i)^2 * B_i with B the matching 1/D^2 sum.
    """
    beta = np.asarray(beta, dtype=float)
    index = index or RiskSetIndex.from_dataset(data)
    n = data.n
    if index.n_events == 0:
        return np.zeros(n), np.zeros(n)
    eta = data.covariates @ beta
    e, D, shift, _ = _risk_denominators(index, eta)
    r1 = np.where(index.d_group > 0, index.d_group / D, 0.0)
    r2 = np.where(index.d_group > 0, index.d_group / D ** 2, 0.0)
    A = np.cumsum(r1)[index.group_of]
    B = np.cumsum(r2)[index.group_of]
    g_sorted = index.status_sorted - e * A
    h_sorted = e * A - e ** 2 * B
    g = np.empty(n)
    h = np.empty(n)
    g[index.order] = g_sorted
    h[index.order] = h_sorted
    return g, h


def gradient(data: SurvivalDataset, beta,
             index: RiskSetIndex | None = None) -> np.ndarray:
    """Gradient of the log partial likelihood with respect to beta."""
    g, _ = eta_gradient_diag_hessian(data, beta, index)
    return data.covariates.T @ g


def _hessian_quadratic(X: np.ndarray, data: SurvivalDataset, beta,
                       index: RiskSetIndex) -> np.ndarray:
    """Negative Hessian of l contracted with the columns of X: X' H_eta X.

    Uses the Breslow decomposition
    H_eta = diag(e * A) - sum_g (d_g / D_g^2) u_g u_g' with u_g the risk-set
    sum of e_k x_k, assembled as two dense products.
    """
    eta = data.covariates @ np.asarray(beta, dtype=float)
    e, D, shift, _ = _risk_denominators(index, eta)
    r1 = np.where(index.d_group > 0, index.d_group / D, 0.0)
    A = np.cumsum(r1)[index.group_of]
    Xs = X[index.order]
    weighted = e[:, None] * Xs
    diag_part = (Xs * (e * A)[:, None]).T @ Xs
    suffix = np.cumsum(weighted[::-1], axis=0)[::-1]
    U = suffix[index.starts]
    has_events = index.d_group > 0
    scale = np.sqrt(index.d_group[has_events]) / D[has_events]
    V = U[has_events] * scale[:, None]
    return diag_part - V.T @ V


def hessian(data: SurvivalDataset, beta,
            index: RiskSetIndex | None = None) -> np.ndarray:
    """Negative Hessian of the log partial likelihood, a p x p matrix."""
    index = index or RiskSetIndex.from_dataset(data)
    return _hessian_quadratic(data.covariates, data, beta, index)


def risk_scores(data: SurvivalDataset, beta) -> np.ndarray:
    """Linear predictor eta_i = beta' x_i per subject."""
    return data.covariates @ np.asarray(beta, dtype=float)


def hazard_ratios(fit: CoxFit) -> np.ndarray:
    """exp(beta_k): multiplicative change in hazard per unit of covariate k."""
    return np.exp(fit.beta)


def newton_fit(data: SurvivalDataset, ridge_lambda: float = 0.0,
               beta0=None, max_iter: int = 100, tol: float = 1e-8,
               obj_tol: float = 1e-10,
               index: RiskSetIndex | None = None) -> CoxFit:
    """Maximize l(beta) - ridge_lambda * sum(beta^2) by damped Newton.

    For ridge_lambda > 0 with p exceeding the sample size the problem is
    solved in the row space of X (where the maximizer provably lies), which
    keeps the Newton system at most n x n.

    Raises
    ------
    IllPosedError
        If ridge_lambda is 0 and p is not smaller than the number of events.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    index = index or RiskSetIndex.from_dataset(data)
    n, p = data.n, data.p
    if ridge_lambda == 0.0 and p >= index.n_events:
        raise IllPosedError(
            f"unpenalized fit with p={p} >= {index.n_events} events has no "
            f"unique maximizer; use ridge_lambda > 0")

    reduce = ridge_lambda > 0.0 and p > n
    if reduce:
        # beta = V c with X = U S V'; l depends on X beta = (U S) c and
        # ||beta|| = ||c||, so the reduced problem is exact.
        U, s, Vt = np.linalg.svd(data.covariates, full_matrices=False)
        keep = s > s[0] * 1e-12 if s.size else slice(0)
        Z = U[:, keep] * s[keep]
        basis = Vt[keep]
        work = SurvivalDataset(Z, data.times, data.status)
    else:
        work = data
    X = work.covariates
    q = X.shape[1]

    beta = np.zeros(q) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if reduce and beta0 is not None:
        beta = basis @ np.asarray(beta0, dtype=float)

    def objective(b):
        return log_partial_likelihood(work, b, index) - ridge_lambda * float(b @ b)

    obj = objective(beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g, _ = eta_gradient_diag_hessian(work, beta, index)
        grad = X.T @ g - 2.0 * ridge_lambda * beta
        H = _hessian_quadratic(X, work, beta, index)
        H[np.diag_indices_from(H)] += 2.0 * ridge_lambda
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t_frac = 1.0
        for _ in range(40):
            candidate = beta + t_frac * step
            cand_obj = objective(candidate)
            if np.isfinite(cand_obj) and cand_obj >= obj - 1e-14:
                break
            t_frac *= 0.5
        else:
            break
        improvement = cand_obj - obj
        beta, obj = candidate, cand_obj
        if np.max(np.abs(t_frac * step)) < tol or abs(improvement) < obj_tol:
            converged = True
            break

    if reduce:
        beta_full = basis.T @ beta
        lpl = log_partial_likelihood(data, beta_full, index)
        return CoxFit(beta=beta_full, log_partial_likelihood=lpl,
                      n_iterations=iterations, converged=converged,
                      lambda_=ridge_lambda)
    return CoxFit(beta=beta, log_partial_likelihood=log_partial_likelihood(
                      data, beta, index),
                  n_iterations=iterations, converged=converged,
                  lambda_=ridge_lambda)

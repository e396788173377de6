"""Performance measures for fitted risk scores and support recovery.

Concordance estimators implemented here:

* Harrell's C over usable pairs (delta_i = 1 and T_i < T_j).
* The truncated C restricted to T_i < tau (Pencina form), delivered through
  ``uno_c`` with unit weights.
* Uno's IPCW C_tau with weights G(T_i)^-2 from the Kaplan-Meier estimate of
  the censoring distribution.
* The Gonen-Heller concordance probability estimate (K-index), a function of
  the risk scores alone.

Score ties contribute zero concordance by default, reading the indicator
1(eta_i > eta_j) strictly; pass ties="half" for the half-credit convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SurvivalDataset


class UndefinedMetricError(ValueError):
    """Raised when an estimator's denominator is empty (no usable pairs)."""


@dataclass(frozen=True)
class KaplanMeier:
    """Product-limit step function, right-continuous, S(0) = 1."""

    event_times: np.ndarray      # sorted distinct times with "events"
    survival: np.ndarray         # value just after each event time

    def survival_at(self, t, side: str = "right"):
        """Step-function value S(t); side="left" gives the left limit S(t-)."""
        arr = np.asarray(t, dtype=float)
        scalar = arr.ndim == 0
        pos = np.searchsorted(self.event_times, np.atleast_1d(arr),
                              side="right" if side == "right" else "left")
        vals = np.concatenate(([1.0], self.survival))[pos]
        return float(vals[0]) if scalar else vals


def kaplan_meier(times, status) -> KaplanMeier:
    """Kaplan-Meier estimate of P(T > t) from right-censored data."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(status, dtype=float)
    order = np.argsort(t, kind="stable")
    ts, ss = t[order], s[order]
    distinct, start = np.unique(ts, return_index=True)
    n = len(ts)
    at_risk = n - start
    d = np.add.reduceat(ss, start)
    keep = d > 0
    factors = 1.0 - d[keep] / at_risk[keep]
    return KaplanMeier(event_times=distinct[keep], survival=np.cumprod(factors))


def km_censoring(data: SurvivalDataset) -> KaplanMeier:
    """Kaplan-Meier estimate of the censoring distribution G(t) = P(D > t).

    Censorings play the role of events (flipped indicator), so subjects with
    an observed event are the "censored" observations here.
    """
    return kaplan_meier(data.times, 1.0 - data.status)


def _pair_indicators(times, status, scores, ties):
    t = np.asarray(times, dtype=float)
    s = np.asarray(status, dtype=float)
    eta = np.asarray(scores, dtype=float)
    if not (t.shape == s.shape == eta.shape):
        raise ValueError("times, status and scores must have equal length")
    usable = s[:, None] * (t[:, None] < t[None, :])          # delta_i * 1(T_i < T_j)
    conc = (eta[:, None] > eta[None, :]).astype(float)
    if ties == "half":
        conc += 0.5 * (eta[:, None] == eta[None, :])
        np.fill_diagonal(conc, 0.0)
    return usable, conc


def harrell_c(times, status, scores, ties: str = "strict") -> float:
    """Harrell's concordance: usable pairs where the higher score dies first."""
    usable, conc = _pair_indicators(times, status, scores, ties)
    denom = usable.sum()
    if denom == 0:
        raise UndefinedMetricError("no usable pairs: Harrell's C is undefined")
    return float((usable * conc).sum() / denom)


def uno_c(times, status, scores, tau: float, km: KaplanMeier | None = None,
          weighted: bool = True, ties: str = "strict",
          censoring_eval: str = "left") -> float:
    """Truncated concordance C_tau, IPCW-weighted by default.

    With weighted=False the weights are identically one, which is the
    Pencina-D'Agostino truncated estimator; with no censored subjects the two
    coincide because G is identically 1.

    The weight for pair (i, j) is G(T_i)^-2 evaluated at the left limit by
    default (censoring_eval="right" uses the step value itself, which can hit
    an exact zero at the largest censoring time).
    """
    t = np.asarray(times, dtype=float)
    usable, conc = _pair_indicators(times, status, scores, ties)
    usable = usable * (t[:, None] < tau)
    if weighted:
        if km is None:
            km = kaplan_meier(t, 1.0 - np.asarray(status, dtype=float))
        G = km.survival_at(t, side=censoring_eval)
        contributes = usable.any(axis=1)
        if np.any(G[contributes] <= 0.0):
            raise UndefinedMetricError(
                "censoring survival estimate hits zero for a contributing "
                "subject; tau is too large")
        w = np.where(contributes, 1.0 / np.where(G > 0, G, 1.0) ** 2, 0.0)
        usable = usable * w[:, None]
    denom = usable.sum()
    if denom == 0:
        raise UndefinedMetricError(f"no usable pairs below tau={tau}")
    return float((usable * conc).sum() / denom)


def cpe_k_index(scores) -> float:
    """Gonen-Heller concordance probability estimate from risk scores alone.

    K = 2/(n(n-1)) * sum_{i<j} [ 1(eta_j < eta_i)/(1 + e^(eta_j - eta_i))
                               + 1(eta_i < eta_j)/(1 + e^(eta_i - eta_j)) ].
    Tied scores contribute nothing (an artifact of the strict indicators),
    so identical scores give 0 rather than 1/2.
    """
    eta = np.asarray(scores, dtype=float)
    n = eta.size
    if n < 2:
        raise ValueError("need at least two subjects")
    diff = eta[:, None] - eta[None, :]          # eta_i - eta_j
    iu = np.triu_indices(n, k=1)
    d = diff[iu]
    with np.errstate(over="ignore"):
        term = np.where(d > 0, 1.0 / (1.0 + np.exp(-d)),
                        np.where(d < 0, 1.0 / (1.0 + np.exp(d)), 0.0))
    return float(2.0 * term.sum() / (n * (n - 1)))


@dataclass(frozen=True)
class SelectionMetrics:
    """Support-recovery and estimation-accuracy summary for one fit."""

    tpr: float
    fpr: float
    fnr: float
    f1: float
    l2_error: float
    median_risk_ratio: float | None = None


def selection_metrics(beta_true, beta_hat,
                      test_data: SurvivalDataset | None = None,
                      zero_tol: float = 0.0) -> SelectionMetrics:
    """TPR/FPR/FNR/F1 over support recovery plus estimation-error summaries.

    F1 follows TPR / (TPR + (FPR + FNR)/2). The median risk ratio is the
    median over test subjects of exp(beta_hat'x) / exp(beta_true'x) and is
    only computed when test data is supplied.
    """
    bt = np.asarray(beta_true, dtype=float)
    bh = np.asarray(beta_hat, dtype=float)
    if bt.shape != bh.shape:
        raise ValueError("coefficient vectors must have equal length")
    true_nz = np.abs(bt) > zero_tol
    est_nz = np.abs(bh) > zero_tol
    if not true_nz.any():
        raise UndefinedMetricError("no true nonzero coefficients: TPR undefined")
    tpr = float((true_nz & est_nz).sum() / true_nz.sum())
    n_true_zero = (~true_nz).sum()
    fpr = float((~true_nz & est_nz).sum() / n_true_zero) if n_true_zero else 0.0
    fnr = 1.0 - tpr
    denom = tpr + 0.5 * (fpr + fnr)
    f1 = float(tpr / denom) if denom > 0 else 0.0
    l2 = float(np.linalg.norm(bt - bh))
    ratio = None
    if test_data is not None:
        X = test_data.covariates
        ratio = float(np.median(np.exp(X @ bh - X @ bt)))
    return SelectionMetrics(tpr=tpr, fpr=fpr, fnr=fnr, f1=f1, l2_error=l2,
                            median_risk_ratio=ratio)

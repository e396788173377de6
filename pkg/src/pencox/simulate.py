"""Synthetic right-censored survival data with a calibrated censoring rate.

Latent times follow a Cox model with Weibull(alpha, rho) baseline hazard
h0(t) = alpha * rho^-alpha * t^(alpha-1), sampled by inverse transform:

    T = rho * ( -log(U) / exp(beta'X) )^(1/alpha),   U ~ Uniform(0, 1).

Censoring times are Weibull(alpha, nu) with the scale nu chosen so that the
expected censored fraction hits a target theta. Conditional on X, the
censoring probability is 1 / (1 + (nu/lambda_i)^alpha) with
lambda_i = rho * exp(-beta'X_i / alpha); for X ~ N(0, Sigma) the lambda_i are
log-normal, so the marginal censored fraction is a one-dimensional
expectation solved for nu by bisection over a fixed Monte-Carlo sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import SurvivalDataset

DEFAULT_ALPHA = 1.0032
DEFAULT_RHO = 320.7223
MC_SAMPLES_DEFAULT = 10 ** 6
COEF_SCHEMES = ("constant_half", "range_1_to_10")
COVARIANCE_KINDS = ("independent", "ar_half", "block_half")
_N_BLOCKS = 10
_BLOCK_RHO = 0.5
_AR_RHO = 0.5


class CalibrationError(RuntimeError):
    """Raised when the censoring-scale root cannot be bracketed."""


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance structure of the covariates; sampling is exact in law.

    AR sampling uses the autoregressive recursion (the Cholesky factor of an
    AR(1) covariance is triangular with exactly these coefficients); the
    block-equicorrelated case uses its one-factor representation. Both avoid
    a dense p x p factorization, which matters at p = 4000.
    """

    kind: str
    p: int

    def __post_init__(self):
        if self.kind not in COVARIANCE_KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")

    def matrix(self) -> np.ndarray:
        idx = np.arange(self.p)
        if self.kind == "independent":
            return np.eye(self.p)
        if self.kind == "ar_half":
            return _AR_RHO ** np.abs(idx[:, None] - idx[None, :])
        same = (idx[:, None] % _N_BLOCKS) == (idx[None, :] % _N_BLOCKS)
        return np.where(np.eye(self.p, dtype=bool), 1.0,
                        np.where(same, _BLOCK_RHO, 0.0))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.p))
        if self.kind == "independent":
            return z
        if self.kind == "ar_half":
            x = np.empty_like(z)
            x[:, 0] = z[:, 0]
            scale = np.sqrt(1.0 - _AR_RHO ** 2)
            for j in range(1, self.p):
                x[:, j] = _AR_RHO * x[:, j - 1] + scale * z[:, j]
            return x
        shared = rng.standard_normal((n, _N_BLOCKS))
        blocks = np.arange(self.p) % _N_BLOCKS
        return np.sqrt(_BLOCK_RHO) * shared[:, blocks] \
            + np.sqrt(1.0 - _BLOCK_RHO) * z

    def quad_form(self, beta) -> float:
        """beta' Sigma beta without forming Sigma."""
        beta = np.asarray(beta, dtype=float)
        nz = np.flatnonzero(beta)
        if nz.size == 0:
            return 0.0
        if self.kind == "independent":
            return float(beta @ beta)
        if self.kind == "ar_half":
            b = beta[nz]
            gaps = np.abs(nz[:, None] - nz[None, :])
            return float(b @ (_AR_RHO ** gaps) @ b)
        total = float(beta @ beta)
        for blk in range(_N_BLOCKS):
            bb = beta[blk::_N_BLOCKS]
            total += _BLOCK_RHO * (bb.sum() ** 2 - float(bb @ bb))
        return total


def make_covariance(kind: str, p: int) -> CovarianceSpec:
    """Covariance structure by name: independent | ar_half | block_half."""
    return CovarianceSpec(kind=kind, p=p)


@dataclass(frozen=True)
class SimulationConfig:
    """Full generative specification for one design point."""

    p: int
    phi: int
    n: int = 400
    coef_scheme: str = "constant_half"
    covariance: str = "independent"
    alpha: float = DEFAULT_ALPHA
    rho: float = DEFAULT_RHO
    theta: float = 0.0
    seed: int = 0
    support: tuple[int, ...] | None = None
    calibration_seed: int = 0
    mc_samples: int = MC_SAMPLES_DEFAULT

    def __post_init__(self):
        if not 0 <= self.phi <= self.p:
            raise ValueError("phi must lie in [0, p]")
        if self.alpha <= 0 or self.rho <= 0:
            raise ValueError("alpha and rho must be positive")
        if not 0 <= self.theta < 1:
            raise ValueError("theta must lie in [0, 1)")
        if self.coef_scheme not in COEF_SCHEMES:
            raise ValueError(f"unknown coef_scheme {self.coef_scheme!r}")

    def covariance_spec(self) -> CovarianceSpec:
        return make_covariance(self.covariance, self.p)

    def beta_true(self) -> np.ndarray:
        beta = np.zeros(self.p)
        support = np.asarray(self.support, dtype=int) if self.support is not None \
            else default_support(self.p, self.phi, self.covariance)
        if self.coef_scheme == "constant_half":
            beta[support] = 0.5
        else:
            beta[support] = 1.0 + np.arange(support.size) % 10
        return beta


@dataclass(frozen=True)
class SimulatedDataset:
    """Generated data plus the ground truth needed to score a fit."""

    dataset: SurvivalDataset
    beta_true: np.ndarray
    nu: float
    achieved_censoring: float
    latent_times: np.ndarray
    censoring_times: np.ndarray
    config: SimulationConfig


def default_support(p: int, phi: int, covariance: str) -> np.ndarray:
    """Default placement of the nonzero coefficients.

    Evenly spaced over 1..p; under block covariance the phi slots are instead
    spread across the 10 interleaved blocks (phi = 30 puts 3 in each), since
    evenly spaced indices would all share one residue class mod 10.
    """
    if phi == 0:
        return np.array([], dtype=int)
    if covariance != "block_half":
        return np.floor(np.arange(phi) * p / phi).astype(int)
    counts = [phi // _N_BLOCKS + (1 if b < phi % _N_BLOCKS else 0)
              for b in range(_N_BLOCKS)]
    support = []
    for b, c in enumerate(counts):
        members = np.arange(b, p, _N_BLOCKS)
        if c > len(members):
            raise ValueError(f"block {b} has only {len(members)} members, "
                             f"cannot place {c} coefficients")
        support.extend(members[np.floor(np.arange(c) * len(members) / c).astype(int)])
    return np.sort(np.array(support, dtype=int))


def sample_survival_times(config: SimulationConfig, X, beta, U) -> np.ndarray:
    """Inverse-transform Weibull-baseline survival times."""
    U = np.asarray(U, dtype=float)
    if np.any(U <= 0) or np.any(U > 1):
        raise ValueError("U must lie in (0, 1]")
    eta = np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    return config.rho * (-np.log(U) / np.exp(eta)) ** (1.0 / config.alpha)


def _censored_fraction(log_nu: float, log_lam: np.ndarray, alpha: float) -> float:
    z = alpha * (log_lam - log_nu)
    return float(np.mean(np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.minimum(z, 700))),
                                  np.exp(np.maximum(z, -700))
                                  / (1.0 + np.exp(np.maximum(z, -700))))))


def calibrate_censoring(config: SimulationConfig, beta=None,
                        tol: float = 1e-6, max_iter: int = 200) -> float:
    """Censoring scale nu achieving the target censored fraction.

    Draws a fixed Monte-Carlo sample of lambda_i ~ logNormal(log rho,
    beta'Sigma beta / alpha^2) and bisects on nu; the expectation is strictly
    decreasing in nu, and the same draws are reused at every bisection step.
    A degenerate linear predictor (beta' Sigma beta = 0) has a closed form
    and skips the sampling. theta = 0 returns +inf (no censoring).
    """
    if config.theta == 0.0:
        return np.inf
    beta = config.beta_true() if beta is None else np.asarray(beta, dtype=float)
    alpha, rho, theta = config.alpha, config.rho, config.theta
    sigma2 = config.covariance_spec().quad_form(beta) / alpha ** 2
    if sigma2 <= 0.0:
        return float(rho * ((1.0 - theta) / theta) ** (1.0 / alpha))
    rng = np.random.default_rng(np.random.SeedSequence(
        (config.calibration_seed, 0xCA11B)))
    log_lam = np.log(rho) + np.sqrt(sigma2) * rng.standard_normal(config.mc_samples)
    lo = np.log(rho) - 50.0 * np.sqrt(sigma2) - 10.0
    hi = np.log(rho) + 50.0 * np.sqrt(sigma2) + 10.0
    if not (_censored_fraction(lo, log_lam, alpha) > theta
            > _censored_fraction(hi, log_lam, alpha)):
        raise CalibrationError(
            f"could not bracket nu for theta={theta}: fraction at bracket ends "
            f"{_censored_fraction(lo, log_lam, alpha):.4f} / "
            f"{_censored_fraction(hi, log_lam, alpha):.4f}")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        frac = _censored_fraction(mid, log_lam, alpha)
        if abs(frac - theta) < tol:
            break
        if frac > theta:
            lo = mid
        else:
            hi = mid
    return float(np.exp(mid))


def generate(config: SimulationConfig, nu: float | None = None) -> SimulatedDataset:
    """Draw one dataset: covariates, latent and censoring times, T*, delta.

    nu may be passed in to share one calibration across replicates of the
    same design; otherwise it is computed here (deterministically in the
    design, independent of the replicate seed).
    """
    rng = np.random.default_rng(config.seed)
    cov = config.covariance_spec()
    beta = config.beta_true()
    X = cov.sample(config.n, rng)
    U = 1.0 - rng.random(config.n)          # in (0, 1]
    latent = sample_survival_times(config, X, beta, U)
    if nu is None:
        nu = calibrate_censoring(config, beta)
    if np.isinf(nu):
        censoring = np.full(config.n, np.inf)
    else:
        Uc = 1.0 - rng.random(config.n)
        censoring = nu * (-np.log(Uc)) ** (1.0 / config.alpha)
    observed = np.minimum(latent, censoring)
    status = (latent <= censoring).astype(float)
    data = SurvivalDataset(X, observed, status)
    return SimulatedDataset(dataset=data, beta_true=beta, nu=float(nu),
                            achieved_censoring=float(1.0 - status.mean()),
                            latent_times=latent, censoring_times=censoring,
                            config=config)


@dataclass(frozen=True)
class WeibullFit:
    alpha: float
    rho: float
    converged: bool
    gradient: float


def fit_weibull_mle(times, status, max_iter: int = 100,
                    tol: float = 1e-8) -> WeibullFit:
    """Censored Weibull maximum likelihood via Newton on the shape profile.

    For fixed alpha the scale maximizer is rho^alpha = sum(t^alpha) / D with
    D the event count, so only the concave one-dimensional profile in alpha
    needs iterating.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(status, dtype=float)
    D = s.sum()
    if D < 2:
        raise ValueError("need at least two events for the Weibull MLE")
    if np.any(t <= 0):
        raise ValueError("times must be strictly positive for the Weibull MLE")
    logt = np.log(t)
    L_delta = logt[s == 1].sum()

    def profile_derivs(alpha):
        ta = t ** alpha
        S0 = ta.sum()
        S1 = (ta * logt).sum()
        S2 = (ta * logt ** 2).sum()
        grad = D / alpha - D * S1 / S0 + L_delta
        hess = -D / alpha ** 2 - D * (S2 * S0 - S1 ** 2) / S0 ** 2
        return grad, hess

    alpha = 1.0
    converged = False
    grad = np.inf
    for _ in range(max_iter):
        grad, hess = profile_derivs(alpha)
        if abs(grad) < tol:
            converged = True
            break
        step = -grad / hess
        t_frac = 1.0
        while alpha + t_frac * step <= 0:
            t_frac *= 0.5
        alpha = alpha + t_frac * step
    rho = float((np.sum(t ** alpha) / D) ** (1.0 / alpha))
    return WeibullFit(alpha=float(alpha), rho=rho, converged=converged,
                      gradient=float(grad))


def with_seed(config: SimulationConfig, seed: int) -> SimulationConfig:
    """Same design, different replicate seed."""
    return replace(config, seed=seed)

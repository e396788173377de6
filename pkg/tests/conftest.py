import numpy as np
import pytest

from pencox import SurvivalDataset


def random_survival_data(rng, n, p, beta=None, censor_scale=None, tie_prob=0.0):
    """Small random right-censored dataset for oracle tests.

    With tie_prob > 0 observed times are rounded to one decimal, which
    produces tied event times.
    """
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
    latent = rng.exponential(np.exp(-(X @ beta)))
    if censor_scale is None:
        times, status = latent, np.ones(n)
    else:
        cens = rng.exponential(censor_scale * np.exp(-(X @ beta)))
        times = np.minimum(latent, cens)
        status = (latent <= cens).astype(float)
    if tie_prob > 0 and rng.random() < tie_prob:
        times = np.round(times, 1) + 1e-3   # keep times positive
    if status.sum() == 0:
        status[int(np.argmin(times))] = 1.0
    return SurvivalDataset(X, times, status)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

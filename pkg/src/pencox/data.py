"""Survival dataset container, CSV ingestion, standardization, partitioning.

The canonical on-disk format is a UTF-8 comma-separated file with a mandatory
header row; the first column is the observed time, the second the event
indicator (1 = event, 0 = right-censored), and every remaining column a
numeric covariate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised when a dataset violates the format or validity contract."""


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored survival data: covariates, observed times, event flags.

    Immutable after construction; safe to share across parallel workers.
    """

    covariates: np.ndarray
    times: np.ndarray
    status: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.covariates, dtype=float))
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.status, dtype=float)
        if X.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise DataError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if t.shape != (n,) or s.shape != (n,):
            raise DataError("times and status must be vectors of length n")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
            raise DataError("missing or non-finite values are not allowed")
        if np.any(t < 0):
            raise DataError("times must be nonnegative")
        if not np.all((s == 0) | (s == 1)):
            raise DataError("status must contain only 0 and 1")
        if s.sum() < 1:
            raise DataError("at least one subject must have an observed event")
        names = tuple(self.names) if self.names else tuple(f"x{j+1}" for j in range(p))
        if len(names) != p:
            raise DataError(f"got {len(names)} column names for p={p} covariates")
        t.setflags(write=False)
        s.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "status", s)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.status.sum())

    def subset(self, indices) -> "SurvivalDataset":
        """Dataset restricted to the given subject indices."""
        idx = np.asarray(indices, dtype=int)
        return SurvivalDataset(
            self.covariates[idx], self.times[idx], self.status[idx], self.names
        )


@dataclass(frozen=True)
class Standardization:
    """Column-wise centering/scaling transform (population standard deviation).

    Constant columns are recorded in ``constant_columns`` and only centered,
    never divided by their (zero) spread.
    """

    means: np.ndarray
    scales: np.ndarray
    constant_columns: tuple[int, ...] = ()

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.scales

    def coefficients_to_original(self, beta_std: np.ndarray) -> np.ndarray:
        """Map coefficients fitted on standardized columns back to the raw scale."""
        return np.asarray(beta_std, dtype=float) / self.scales


@dataclass(frozen=True)
class Partition:
    """Disjoint train/test split of subject indices 0..n-1."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int

    def __post_init__(self):
        tr = np.asarray(self.train_indices, dtype=int)
        te = np.asarray(self.test_indices, dtype=int)
        if tr.size == 0 or te.size == 0:
            raise DataError("both partition sides must be nonempty")
        if np.intersect1d(tr, te).size:
            raise DataError("train and test indices overlap")
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "test_indices", te)


_CONSTANT_TOL = 1e-12


def standardize(data: SurvivalDataset) -> tuple[SurvivalDataset, Standardization]:
    """Center every column and scale non-constant columns to unit spread.

    Returns the transformed dataset together with the transform, so that
    fitted coefficients can be mapped back to the original scale via
    ``beta_orig = beta_std / scales``.
    """
    X = data.covariates
    means = X.mean(axis=0)
    sds = X.std(axis=0)  # population (1/n) standard deviation
    constant = np.flatnonzero(sds <= _CONSTANT_TOL)
    scales = np.where(sds <= _CONSTANT_TOL, 1.0, sds)
    transform = Standardization(means=means, scales=scales,
                                constant_columns=tuple(int(j) for j in constant))
    std = SurvivalDataset(transform.apply(X), data.times, data.status, data.names)
    return std, transform


def is_standardized(data: SurvivalDataset, tol: float = 1e-6) -> bool:
    """True when every column has (near) zero mean and unit or zero spread."""
    X = data.covariates
    mean_ok = np.all(np.abs(X.mean(axis=0)) <= tol)
    sds = X.std(axis=0)
    scale_ok = np.all((np.abs(sds - 1.0) <= tol) | (sds <= _CONSTANT_TOL))
    return bool(mean_ok and scale_ok)


def split(data: SurvivalDataset, train_size: int, seed: int,
          max_retries: int = 100) -> Partition:
    """Uniformly random disjoint partition with ``train_size`` training subjects.

    Deterministic given the seed. Re-randomizes (up to ``max_retries`` times)
    when the training side carries no event, which would make any partial
    likelihood fit vacuous.
    """
    n = data.n
    if not 1 <= train_size < n:
        raise DataError(f"train_size must be in [1, {n-1}], got {train_size}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        perm = rng.permutation(n)
        train = np.sort(perm[:train_size])
        test = np.sort(perm[train_size:])
        if data.status[train].sum() >= 1:
            return Partition(train_indices=train, test_indices=test, seed=seed)
    raise DataError(f"could not draw a partition with >= 1 training event "
                    f"in {max_retries} attempts")


def load_csv(path) -> SurvivalDataset:
    """Read a survival dataset from the canonical CSV layout.

    Raises
    ------
    DataError
        On a malformed numeric cell (reported with row and column), a missing
        cell, a negative time, or a status value outside {0, 1}.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 3:
            raise DataError(f"{path}: need at least time, status and one covariate column")
        names = tuple(h.strip() for h in header[2:])
        times, status, rows = [], [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {rownum} has {len(row)} cells, "
                                f"expected {len(header)}")
            values = []
            for colnum, cell in enumerate(row, start=1):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}: missing value at row {rownum}, "
                                    f"column {colnum}")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: malformed numeric cell {cell!r} at "
                                    f"row {rownum}, column {colnum}") from None
            times.append(values[0])
            status.append(values[1])
            rows.append(values[2:])
    return SurvivalDataset(np.array(rows, dtype=float), np.array(times),
                           np.array(status), names)


def save_csv(data: SurvivalDataset, path) -> None:
    """Write a dataset in the canonical CSV layout (values round-trip exactly)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "status"] + list(data.names))
        for i in range(data.n):
            writer.writerow([repr(float(data.times[i])), repr(float(data.status[i]))]
                            + [repr(float(v)) for v in data.covariates[i]])

import numpy as np
import pytest

from pencox import DataError, SurvivalDataset, load_csv, save_csv, split, standardize
from pencox.data import is_standardized


def test_load_csv_readback(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("time,status,age\n1,1,0.5\n2,1,-0.5\n3,1,1.5\n")
    data = load_csv(path)
    assert data.n == 3 and data.p == 1
    assert np.array_equal(data.times, [1, 2, 3])
    assert np.array_equal(data.status, [1, 1, 1])
    assert data.names == ("age",)


def test_load_csv_rejects_bad_status(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,status,x\n1,1,0.5\n2,2,0.1\n")
    with pytest.raises(DataError, match="status"):
        load_csv(path)


def test_load_csv_reports_cell_position(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,status,x\n1,1,0.5\n2,1,oops\n")
    with pytest.raises(DataError, match="row 3, column 3"):
        load_csv(path)


def test_load_csv_rejects_missing_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,status,x\n1,1,\n2,1,0.1\n")
    with pytest.raises(DataError, match="missing"):
        load_csv(path)


def test_csv_round_trip_bit_for_bit(tmp_path, rng):
    X = rng.standard_normal((7, 3))
    times = rng.exponential(1.0, 7)
    status = rng.integers(0, 2, 7).astype(float)
    status[0] = 1.0
    data = SurvivalDataset(X, times, status, ("a", "b", "c"))
    path = tmp_path / "round.csv"
    save_csv(data, path)
    back = load_csv(path)
    assert np.array_equal(back.covariates, data.covariates)
    assert np.array_equal(back.times, data.times)
    assert np.array_equal(back.status, data.status)
    assert back.names == data.names


def test_dataset_validation():
    with pytest.raises(DataError):
        SurvivalDataset(np.zeros((3, 1)), [-1.0, 1, 2], [1, 1, 1])
    with pytest.raises(DataError):
        SurvivalDataset(np.zeros((3, 1)), [1.0, 1, 2], [0, 0, 0])
    with pytest.raises(DataError):
        SurvivalDataset(np.array([[1.0], [np.nan], [0.0]]), [1.0, 1, 2], [1, 0, 0])


def test_standardize_definition():
    data = SurvivalDataset(np.array([[1.0], [2.0], [3.0]]), [1, 2, 3], [1, 1, 1])
    std, tr = standardize(data)
    assert std.covariates[:, 0].mean() == pytest.approx(0.0, abs=1e-12)
    assert std.covariates[:, 0].std() == pytest.approx(1.0, abs=1e-12)
    assert tr.constant_columns == ()


def test_standardize_constant_column_flagged():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    data = SurvivalDataset(X, [1, 2, 3], [1, 1, 1])
    std, tr = standardize(data)
    assert tr.constant_columns == (0,)
    assert np.allclose(std.covariates[:, 0], 0.0)


def test_standardize_idempotent(rng):
    X = rng.standard_normal((40, 3))
    data = SurvivalDataset(X, rng.exponential(1, 40), np.ones(40))
    std, _ = standardize(data)
    again, tr2 = standardize(std)
    assert np.allclose(tr2.means, 0.0, atol=1e-12)
    assert np.allclose(tr2.scales, 1.0, atol=1e-12)
    assert is_standardized(std)


def test_coefficient_backmapping_round_trips_linear_predictor(rng):
    X = rng.standard_normal((30, 4)) * np.array([2.0, 0.5, 7.0, 1.0]) + 3.0
    data = SurvivalDataset(X, rng.exponential(1, 30), np.ones(30))
    std, tr = standardize(data)
    beta_std = rng.standard_normal(4)
    beta_orig = tr.coefficients_to_original(beta_std)
    lhs = std.covariates @ beta_std
    rhs = (data.covariates - tr.means) @ beta_orig
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_split_sizes_disjoint(rng):
    X = rng.standard_normal((400, 2))
    data = SurvivalDataset(X, rng.exponential(1, 400), np.ones(400))
    part = split(data, 200, seed=7)
    assert len(part.train_indices) == 200
    assert len(part.test_indices) == 200
    assert np.intersect1d(part.train_indices, part.test_indices).size == 0

    small = SurvivalDataset(rng.standard_normal((234, 2)),
                            rng.exponential(1, 234), np.ones(234))
    part = split(small, 200, seed=7)
    assert len(part.test_indices) == 34


def test_split_deterministic(rng):
    data = SurvivalDataset(rng.standard_normal((50, 2)),
                           rng.exponential(1, 50), np.ones(50))
    a = split(data, 25, seed=123)
    b = split(data, 25, seed=123)
    assert np.array_equal(a.train_indices, b.train_indices)
    assert np.array_equal(a.test_indices, b.test_indices)


def test_split_requires_training_event(rng):
    status = np.zeros(10)
    status[3] = 1.0
    data = SurvivalDataset(rng.standard_normal((10, 1)),
                           np.arange(1.0, 11.0), status)
    for seed in range(20):
        part = split(data, 5, seed=seed)
        assert data.status[part.train_indices].sum() >= 1


def test_split_range_errors(rng):
    data = SurvivalDataset(rng.standard_normal((10, 1)),
                           np.arange(1.0, 11.0), np.ones(10))
    with pytest.raises(DataError):
        split(data, 0, seed=1)
    with pytest.raises(DataError):
        split(data, 10, seed=1)


def test_partition_exchangeable(rng):
    """Binomial check: train membership frequency ~ train_size/n per index."""
    n, train_size, reps = 40, 20, 1000
    data = SurvivalDataset(rng.standard_normal((n, 1)),
                           rng.exponential(1, n), np.ones(n))
    counts = np.zeros(n)
    for seed in range(reps):
        part = split(data, train_size, seed=seed)
        counts[part.train_indices] += 1
    p_expect = train_size / n
    sd = np.sqrt(reps * p_expect * (1 - p_expect))
    assert np.all(np.abs(counts - reps * p_expect) <= 5 * sd)

import numpy as np
import pytest

from plds import (Sequence, TrainingSet, read_posterior_csv,
                  read_sequence_csv, read_training_csv, write_posterior_csv,
                  write_sequence_csv, write_training_csv)
from plds.errors import DimensionMismatchError

from conftest import random_spd


def test_sequence_shape_checks(rng):
    with pytest.raises(DimensionMismatchError):
        Sequence(y=np.zeros((5, 2)), x=np.zeros((4, 2)))
    with pytest.raises(DimensionMismatchError):
        Sequence(y=np.zeros((5, 2)), z=np.zeros(4, dtype=int))


def test_sequence_csv_round_trip_lossless(tmp_path, rng):
    y = rng.standard_normal((7, 3))
    x = rng.standard_normal((7, 2)) * 1e-7   # tiny values must survive
    z = rng.integers(1, 4, 7)
    path = tmp_path / "seq.csv"
    write_sequence_csv(path, Sequence(y=y, x=x, z=z))
    back = read_sequence_csv(path)
    np.testing.assert_array_equal(back.y, y)
    np.testing.assert_array_equal(back.x, x)
    np.testing.assert_array_equal(back.z, z)


def test_sequence_csv_without_latents(tmp_path, rng):
    y = rng.standard_normal((4, 2))
    path = tmp_path / "seq.csv"
    write_sequence_csv(path, Sequence(y=y))
    back = read_sequence_csv(path)
    np.testing.assert_array_equal(back.y, y)
    assert back.x is None and back.z is None


def test_training_csv_round_trip(tmp_path, rng):
    data = TrainingSet(x=rng.standard_normal((9, 2)),
                       y=rng.standard_normal((9, 4)))
    path = tmp_path / "train.csv"
    write_training_csv(path, data)
    back = read_training_csv(path)
    np.testing.assert_array_equal(back.x, data.x)
    np.testing.assert_array_equal(back.y, data.y)


def test_posterior_csv_round_trip(tmp_path, rng):
    T, L, K = 6, 2, 3
    mean = rng.standard_normal((T, L))
    cov = np.stack([random_spd(rng, L) for _ in range(T)])
    resp = rng.dirichlet(np.ones(K), size=T)
    path = tmp_path / "post.csv"
    write_posterior_csv(path, mean, cov, resp)
    m2, c2, r2 = read_posterior_csv(path)
    np.testing.assert_array_equal(m2, mean)
    np.testing.assert_array_equal(c2, cov)
    np.testing.assert_array_equal(r2, resp)


def test_posterior_csv_with_step_times(tmp_path, rng):
    T, L, K = 4, 1, 2
    mean = rng.standard_normal((T, L))
    cov = np.abs(rng.standard_normal((T, L, L))) + 1.0
    resp = rng.dirichlet(np.ones(K), size=T)
    times = rng.uniform(5, 50, T)
    path = tmp_path / "post.csv"
    write_posterior_csv(path, mean, cov, resp, step_times_us=times)
    header = path.read_text().splitlines()[0].split(",")
    assert header[-1] == "us_step"
    # extra column must not break the reader
    m2, c2, r2 = read_posterior_csv(path)
    np.testing.assert_array_equal(m2, mean)


def test_posterior_header_names(tmp_path):
    mean = np.zeros((2, 2))
    cov = np.stack([np.eye(2)] * 2)
    resp = np.full((2, 2), 0.5)
    path = tmp_path / "post.csv"
    write_posterior_csv(path, mean, cov, resp)
    header = path.read_text().splitlines()[0]
    assert header == "t,eta_1,eta_2,V_11,V_21,V_22,rho_1,rho_2"

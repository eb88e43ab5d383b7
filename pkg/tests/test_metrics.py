"""Tests for pooled error metrics and mode-label alignment."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from plds import (
    LengthMismatchError,
    align_modes,
    confusion_matrix,
    mae,
    mode_accuracy,
    per_dimension_mae,
    rmse,
    std_abs_error,
    summarize_errors,
)


def test_pooled_errors_by_hand():
    truth = np.zeros((4, 1))
    est = np.array([[1.0], [-1.0], [3.0], [-3.0]])
    assert mae(est, truth) == 2.0
    assert_allclose(rmse(est, truth), np.sqrt(5.0))
    assert std_abs_error(est, truth) == 1.0


def test_identical_inputs_score_zero(rng):
    truth = rng.standard_normal((30, 3))
    assert mae(truth, truth) == 0.0
    assert rmse(truth, truth) == 0.0
    assert std_abs_error(truth, truth) == 0.0


def test_constant_offset_on_one_dimension(rng):
    truth = rng.standard_normal((50, 2))
    est = truth + np.array([1.0, 0.0])
    assert_allclose(per_dimension_mae(est, truth), [1.0, 0.0], atol=1e-15)
    assert_allclose(mae(est, truth), 0.5, atol=1e-15)
    assert_allclose(std_abs_error(est, truth), 0.5, atol=1e-15)


def test_standard_normal_noise_has_half_normal_mae():
    gen = np.random.default_rng(123)
    truth = np.zeros((10000, 1))
    est = gen.standard_normal((10000, 1))
    assert abs(mae(est, truth) - np.sqrt(2.0 / np.pi)) < 0.03


def test_shape_mismatch_raises(rng):
    with pytest.raises(LengthMismatchError):
        mae(rng.standard_normal((5, 2)), rng.standard_normal((6, 2)))
    with pytest.raises(LengthMismatchError):
        confusion_matrix([1, 2], [1, 2, 1])


def test_summarize_errors_keys(rng):
    truth = rng.standard_normal((20, 2))
    report = summarize_errors(truth + 0.1, truth)
    assert set(report) == {"mae", "std", "rmse"}
    assert_allclose(report["mae"], 0.1, atol=1e-12)


def test_confusion_matrix_counts():
    pred = [1, 1, 2, 2, 2, 1]
    true = [2, 2, 1, 2, 2, 1]
    counts = confusion_matrix(pred, true)
    assert_array_equal(counts, [[1, 2], [1, 2]])
    # 0-based labels give the same table
    assert_array_equal(confusion_matrix(np.array(pred) - 1,
                                        np.array(true) - 1), counts)


def test_align_modes_undoes_relabeling(rng):
    true = rng.integers(1, 4, size=200)
    relabel = np.array([3, 1, 2])   # mode k reported as relabel[k-1]
    pred = relabel[true - 1]
    sigma = align_modes(pred, true)
    assert sorted(sigma) == [0, 1, 2]
    assert mode_accuracy(pred, true) == 1.0


def test_mode_accuracy_counts_misses():
    true = np.array([1] * 100 + [2] * 100)
    pred = true.copy()
    pred[:20] = 2
    assert mode_accuracy(pred, true) == 0.9


def test_align_modes_beyond_exhaustive_limit(rng):
    # K = 8 exceeds the exhaustive-search cutoff
    true = rng.integers(1, 9, size=500)
    relabel = rng.permutation(8) + 1
    pred = relabel[true - 1]
    assert mode_accuracy(pred, true, n_modes=8) == 1.0

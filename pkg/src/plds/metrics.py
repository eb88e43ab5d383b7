"""Error metrics and mode-label alignment for tracker comparison.

Errors pool over time steps and state dimensions.  Mode accuracy aligns
labels before scoring because mixture learning only identifies modes up to
permutation: exhaustive search over permutations up to K = 6, assignment
solver above.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LengthMismatchError

MAX_EXHAUSTIVE_K = 6


def _paired(estimates: np.ndarray, truth: np.ndarray):
    estimates = np.atleast_2d(np.asarray(estimates, float))
    truth = np.atleast_2d(np.asarray(truth, float))
    if estimates.shape != truth.shape:
        raise LengthMismatchError("estimate and truth shapes differ",
                                  estimates=estimates.shape, truth=truth.shape)
    return estimates, truth


def mae(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute error pooled over steps and dimensions."""
    estimates, truth = _paired(estimates, truth)
    return float(np.mean(np.abs(estimates - truth)))


def std_abs_error(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Standard deviation of the pooled absolute errors."""
    estimates, truth = _paired(estimates, truth)
    return float(np.std(np.abs(estimates - truth)))


def rmse(estimates: np.ndarray, truth: np.ndarray) -> float:
    estimates, truth = _paired(estimates, truth)
    return float(np.sqrt(np.mean((estimates - truth) ** 2)))


def per_dimension_mae(estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    estimates, truth = _paired(estimates, truth)
    return np.mean(np.abs(estimates - truth), axis=0)


def confusion_matrix(pred: np.ndarray, true: np.ndarray,
                     n_modes: int | None = None) -> np.ndarray:
    """Counts[i, j] of (predicted label i, true label j); labels may start
    at 0 or 1."""
    pred = np.asarray(pred, int).ravel()
    true = np.asarray(true, int).ravel()
    if pred.shape != true.shape:
        raise LengthMismatchError("label sequences differ in length",
                                  pred=pred.size, true=true.size)
    offset = min(pred.min(), true.min())
    pred = pred - offset
    true = true - offset
    K = n_modes or int(max(pred.max(), true.max())) + 1
    counts = np.zeros((K, K), dtype=int)
    np.add.at(counts, (pred, true), 1)
    return counts


def align_modes(pred: np.ndarray, true: np.ndarray,
                n_modes: int | None = None) -> np.ndarray:
    """Permutation sigma maximizing matches when predicted label i is read
    as sigma[i]."""
    counts = confusion_matrix(pred, true, n_modes)
    K = counts.shape[0]
    if K <= MAX_EXHAUSTIVE_K:
        best, best_hits = None, -1
        for perm in permutations(range(K)):
            hits = sum(counts[i, perm[i]] for i in range(K))
            if hits > best_hits:
                best, best_hits = perm, hits
        return np.asarray(best, dtype=int)
    rows, cols = linear_sum_assignment(-counts)
    sigma = np.empty(K, dtype=int)
    sigma[rows] = cols
    return sigma


def mode_accuracy(pred: np.ndarray, true: np.ndarray,
                  n_modes: int | None = None) -> float:
    """Fraction of steps with the correct mode after permutation alignment."""
    counts = confusion_matrix(pred, true, n_modes)
    sigma = align_modes(pred, true, n_modes)
    hits = sum(counts[i, sigma[i]] for i in range(counts.shape[0]))
    return float(hits) / float(counts.sum())


def summarize_errors(estimates: np.ndarray, truth: np.ndarray) -> dict:
    """The pooled error block of a report row."""
    return {
        "mae": mae(estimates, truth),
        "std": std_abs_error(estimates, truth),
        "rmse": rmse(estimates, truth),
    }

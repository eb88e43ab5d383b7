"""Exact single-mode-path filtering and smoothing.

These routines condition on a fixed mode path, so they double as the inner
kernel of the exhaustive path enumeration and, with K = 1, as the Kalman
filter / RTS smoother that the approximate methods must collapse to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotSingleModeError
from .linalg import mvn_logpdf, solve_spd, symmetrize
from .params import DynamicParams, StaticParams, require_valid


@dataclass
class KalmanBelief:
    """Filtered and one-step-predicted moments plus innovation likelihoods."""

    filt_mean: np.ndarray    # (T, L)
    filt_cov: np.ndarray     # (T, L, L)
    pred_mean: np.ndarray    # (T, L); row t is the prior for step t
    pred_cov: np.ndarray     # (T, L, L)
    loglik_steps: np.ndarray  # (T,) innovation log-likelihoods

    @property
    def loglik(self) -> float:
        return float(self.loglik_steps.sum())

    @property
    def T(self) -> int:
        return self.filt_mean.shape[0]


@dataclass
class SmoothedBelief:
    """RTS output: marginal moments and adjacent cross-covariances.

    cross_cov[t] = Cov(x_{t-1}, x_t | y_{1:T}); row 0 is unused.
    """

    mean: np.ndarray         # (T, L)
    cov: np.ndarray          # (T, L, L)
    cross_cov: np.ndarray    # (T, L, L)
    loglik: float


def _filter_path(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                 path: np.ndarray) -> KalmanBelief:
    """Kalman filter conditioned on the 0-based mode path."""
    T = y.shape[0]
    L = theta.L
    filt_mean = np.empty((T, L))
    filt_cov = np.empty((T, L, L))
    pred_mean = np.empty((T, L))
    pred_cov = np.empty((T, L, L))
    loglik_steps = np.empty(T)

    for t in range(T):
        k = path[t]
        if t == 0:
            m, P = theta.gamma[k], theta.Gamma[k]
        else:
            m = phi.C[k] @ filt_mean[t - 1]
            P = symmetrize(phi.C[k] @ filt_cov[t - 1] @ phi.C[k].T + phi.Q[k])
        pred_mean[t], pred_cov[t] = m, P

        A, b, Sig = theta.A[k], theta.b[k], theta.Sigma[k]
        innov = y[t] - (A @ m + b)
        S = symmetrize(A @ P @ A.T + Sig)
        gain = solve_spd(S, A @ P, name="innovation covariance").T
        filt_mean[t] = m + gain @ innov
        joseph = np.eye(L) - gain @ A
        filt_cov[t] = symmetrize(joseph @ P @ joseph.T + gain @ Sig @ gain.T)
        loglik_steps[t] = mvn_logpdf(innov, np.zeros_like(innov), S)

    return KalmanBelief(filt_mean, filt_cov, pred_mean, pred_cov, loglik_steps)


def _smooth_path(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                 path: np.ndarray, belief: KalmanBelief | None = None) -> SmoothedBelief:
    """RTS smoother conditioned on the 0-based mode path."""
    if belief is None:
        belief = _filter_path(theta, phi, y, path)
    T, L = belief.T, theta.L
    mean = belief.filt_mean.copy()
    cov = belief.filt_cov.copy()
    cross = np.zeros((T, L, L))

    for t in range(T - 2, -1, -1):
        k_next = path[t + 1]
        # gain G = V_f C^T P_pred^{-1}
        gain = solve_spd(belief.pred_cov[t + 1],
                         phi.C[k_next] @ belief.filt_cov[t],
                         name="predicted covariance").T
        mean[t] = belief.filt_mean[t] + gain @ (mean[t + 1] - belief.pred_mean[t + 1])
        cov[t] = symmetrize(belief.filt_cov[t]
                            + gain @ (cov[t + 1] - belief.pred_cov[t + 1]) @ gain.T)
        cross[t + 1] = gain @ cov[t + 1]   # Cov(x_t, x_{t+1})

    return SmoothedBelief(mean, cov, cross, belief.loglik)


def _single_mode_path(theta: StaticParams, phi: DynamicParams,
                      y: np.ndarray) -> np.ndarray:
    if theta.K != 1:
        raise NotSingleModeError("exact Kalman routines need K = 1", K=theta.K)
    require_valid(theta, phi)
    return np.zeros(np.atleast_2d(y).shape[0], dtype=int)


def kalman_filter(theta: StaticParams, phi: DynamicParams,
                  y: np.ndarray) -> KalmanBelief:
    """Exact filter for a single-mode model (K = 1)."""
    y = np.atleast_2d(np.asarray(y, float))
    path = _single_mode_path(theta, phi, y)
    return _filter_path(theta, phi, y, path)


def rts_smoother(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                 belief: KalmanBelief | None = None) -> SmoothedBelief:
    """Exact smoother for a single-mode model (K = 1)."""
    y = np.atleast_2d(np.asarray(y, float))
    path = _single_mode_path(theta, phi, y)
    return _smooth_path(theta, phi, y, path, belief)

"""Exhaustive exact posterior by mode-path enumeration.

The posterior of a switching linear system is a mixture over all K^T mode
paths; each path contributes a linear-Gaussian chain handled by the Kalman
machinery.  Only viable for tiny T (a hard path-count cap guards the
request), but within that budget the output is exact, which makes it the
reference the approximate methods are tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import EnumerationTooLargeError
from .gaussians import Gaussian, GaussianMixture, collapse_moments
from .kalman import _filter_path, _smooth_path
from .params import DynamicParams, StaticParams, require_valid

MAX_PATHS = 2 ** 20


@dataclass
class ExactPosterior:
    """All K^T mode paths with their per-path Gaussian chains.

    Paths are in lexicographic mode order.  `log_weights` are normalized
    posterior path probabilities; `prefix_logjoint[p, t]` is the
    unnormalized log p(z_{1:t+1} = path prefix, y_{1:t+1}).
    """

    paths: np.ndarray            # (P, T) 0-based modes
    log_weights: np.ndarray      # (P,)
    prefix_logjoint: np.ndarray  # (P, T)
    filt_means: np.ndarray       # (P, T, L)
    filt_covs: np.ndarray        # (P, T, L, L)
    smooth_means: np.ndarray     # (P, T, L)
    smooth_covs: np.ndarray      # (P, T, L, L)
    loglik: float
    K: int
    theta: StaticParams
    phi: DynamicParams
    y: np.ndarray

    @property
    def T(self) -> int:
        return self.paths.shape[1]

    def smoothed_marginal(self, t: int) -> GaussianMixture:
        return GaussianMixture(np.exp(self.log_weights),
                               self.smooth_means[:, t], self.smooth_covs[:, t])

    def filtered_marginal(self, t: int) -> GaussianMixture:
        """p(x_t | y_{1:t}): group paths by their length-(t+1) prefix."""
        prefixes, first = np.unique(self.paths[:, :t + 1], axis=0,
                                    return_index=True)
        logw = self.prefix_logjoint[first, t]
        weights = np.exp(logw - logsumexp(logw))
        return GaussianMixture(weights, self.filt_means[first, t],
                               self.filt_covs[first, t])

    def smoothed_mean(self) -> np.ndarray:
        w = np.exp(self.log_weights)
        return np.einsum("p,ptl->tl", w, self.smooth_means)

    def filtered_mean(self) -> np.ndarray:
        return np.stack([self.filtered_marginal(t).mean() for t in range(self.T)])

    def mode_posterior(self) -> np.ndarray:
        """Smoothed p(z_t = k | y_{1:T}), shape (T, K)."""
        out = np.zeros((self.T, self.K))
        w = np.exp(self.log_weights)
        for t in range(self.T):
            np.add.at(out[t], self.paths[:, t], w)
        return out

    def filtered_mode_posterior(self) -> np.ndarray:
        out = np.zeros((self.T, self.K))
        for t in range(self.T):
            prefixes, first = np.unique(self.paths[:, :t + 1], axis=0,
                                        return_index=True)
            logw = self.prefix_logjoint[first, t]
            weights = np.exp(logw - logsumexp(logw))
            np.add.at(out[t], prefixes[:, t], weights)
        return out

    def filtered_loglik(self, t: int) -> float:
        """log p(y_{1:t+1}) from the prefix joints at time t."""
        _, first = np.unique(self.paths[:, :t + 1], axis=0, return_index=True)
        return float(logsumexp(self.prefix_logjoint[first, t]))

    def stacked_joint(self, path_index: int) -> Gaussian:
        """Joint Gaussian over the stacked states x_{1:T} for one path."""
        path = self.paths[path_index]
        prec, vec = _stacked_precision(self.theta, self.phi, self.y, path)
        cov = np.linalg.inv(prec)
        return Gaussian(cov @ vec, cov)


def _stacked_precision(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                       path: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Block-tridiagonal precision and information vector of p(x_{1:T} | y, path)."""
    T, L = y.shape[0], theta.L
    prec = np.zeros((T * L, T * L))
    vec = np.zeros(T * L)

    def blk(t):
        return slice(t * L, (t + 1) * L)

    k0 = path[0]
    Ginv = np.linalg.inv(theta.Gamma[k0])
    prec[blk(0), blk(0)] += Ginv
    vec[blk(0)] += Ginv @ theta.gamma[k0]
    for t in range(1, T):
        k = path[t]
        Qinv = np.linalg.inv(phi.Q[k])
        C = phi.C[k]
        prec[blk(t), blk(t)] += Qinv
        prec[blk(t - 1), blk(t - 1)] += C.T @ Qinv @ C
        prec[blk(t), blk(t - 1)] += -Qinv @ C
        prec[blk(t - 1), blk(t)] += -(Qinv @ C).T
    for t in range(T):
        k = path[t]
        Sinv = np.linalg.inv(theta.Sigma[k])
        prec[blk(t), blk(t)] += theta.A[k].T @ Sinv @ theta.A[k]
        vec[blk(t)] += theta.A[k].T @ Sinv @ (y[t] - theta.b[k])
    return prec, vec


def enumerate_posterior(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                        max_paths: int = MAX_PATHS) -> ExactPosterior:
    """Exact posterior over states and modes by brute-force path enumeration."""
    require_valid(theta, phi)
    y = np.atleast_2d(np.asarray(y, float))
    T, K, L = y.shape[0], theta.K, theta.L
    n_paths = K ** T
    if n_paths > max_paths:
        raise EnumerationTooLargeError("mode-path count exceeds the cap",
                                       paths=n_paths, cap=max_paths)

    with np.errstate(divide="ignore"):
        log_pi = np.log(theta.pi)
        log_tau = np.log(phi.tau)

    paths = np.array(list(itertools.product(range(K), repeat=T)), dtype=int)
    prefix_logjoint = np.full((n_paths, T), -np.inf)
    filt_means = np.empty((n_paths, T, L))
    filt_covs = np.empty((n_paths, T, L, L))
    smooth_means = np.empty((n_paths, T, L))
    smooth_covs = np.empty((n_paths, T, L, L))

    for p, path in enumerate(paths):
        log_prior_steps = np.empty(T)
        log_prior_steps[0] = log_pi[path[0]]
        for t in range(1, T):
            log_prior_steps[t] = log_tau[path[t], path[t - 1]]
        belief = _filter_path(theta, phi, y, path)
        # -inf from zero-prior transitions propagates through the cumsum
        prefix_logjoint[p] = (np.cumsum(log_prior_steps)
                              + np.cumsum(belief.loglik_steps))
        filt_means[p], filt_covs[p] = belief.filt_mean, belief.filt_cov
        smoothed = _smooth_path(theta, phi, y, path, belief)
        smooth_means[p], smooth_covs[p] = smoothed.mean, smoothed.cov

    final = prefix_logjoint[:, -1]
    loglik = float(logsumexp(final))
    log_weights = final - loglik
    return ExactPosterior(paths=paths, log_weights=log_weights,
                          prefix_logjoint=prefix_logjoint,
                          filt_means=filt_means, filt_covs=filt_covs,
                          smooth_means=smooth_means, smooth_covs=smooth_covs,
                          loglik=loglik, K=K, theta=theta, phi=phi, y=y)

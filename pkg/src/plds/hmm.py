"""Log-domain forward-backward over a finite mode chain."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateResponsibilitiesError


def forward_backward(log_init: np.ndarray, log_trans: np.ndarray,
                     log_obs: np.ndarray):
    """Posterior marginals of a hidden chain with per-step scores.

    log_trans[i, j] = log p(state_t = i | state_{t-1} = j); log_obs has
    shape (T, K).  Returns (log_alpha, log_marg, log_pairs, loglik) where
    log_pairs[t, j, i] is the log joint of (state_{t-1} = j, state_t = i)
    and row 0 of log_pairs is unused (-inf).
    """
    T, K = log_obs.shape
    log_alpha = np.empty((T, K))
    log_beta = np.empty((T, K))

    log_alpha[0] = log_init + log_obs[0]
    for t in range(1, T):
        log_alpha[t] = log_obs[t] + logsumexp(log_trans + log_alpha[t - 1][None, :],
                                              axis=1)
        if np.all(np.isneginf(log_alpha[t])):
            raise DegenerateResponsibilitiesError(
                "all mode hypotheses have zero posterior mass", t=t)

    log_beta[T - 1] = 0.0
    for t in range(T - 2, -1, -1):
        log_beta[t] = logsumexp(log_trans + (log_obs[t + 1] + log_beta[t + 1])[:, None],
                                axis=0)

    loglik = float(logsumexp(log_alpha[T - 1]))
    log_marg = log_alpha + log_beta - loglik

    log_pairs = np.full((T, K, K), -np.inf)
    for t in range(1, T):
        # [prev j, cur i]
        log_pairs[t] = (log_alpha[t - 1][:, None] + log_trans.T
                        + (log_obs[t] + log_beta[t])[None, :] - loglik)
    return log_alpha, log_marg, log_pairs, loglik


def normalized_exp(log_probs: np.ndarray, floor: float = 0.0,
                   axis=None) -> np.ndarray:
    """exp of normalized log-probabilities with an optional probability floor."""
    out = np.exp(log_probs - logsumexp(log_probs, axis=axis, keepdims=axis is not None))
    if floor > 0.0:
        out = np.clip(out, floor, None)
        out = out / out.sum(axis=axis, keepdims=axis is not None)
    return out

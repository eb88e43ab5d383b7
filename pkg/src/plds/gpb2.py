"""Assumed-density filtering, smoothing and learning with per-mode banks.

The filter carries one Gaussian per mode plus mode weights.  Each step
expands to all (previous mode, current mode) pairs, runs the exact
conditional update for every pair, then collapses back to one Gaussian per
current mode by moment matching.  The smoother runs the analogous backward
pass on the stored filter banks.  First and second posterior moments from
the smoother feed the same closed-form dynamics update as the variational
learner.

Observation updates run in information form; the innovation log-density
uses the matrix determinant lemma and the Woodbury identity, so diagonal
observation noise never triggers a dense D x D factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.special import logsumexp

from .gaussians import collapse_moments
from .linalg import chol_spd, solve_spd, symmetrize
from .params import (DynamicParams, InitialStateCache, ObservationCache,
                     StaticParams, conditioned_update, require_valid)
from .variational import (VEMConfig, VariationalPosterior,
                          m_step_from_stats, m_step_stats)

COLLAPSE_WEIGHT_FLOOR = 1e-14


@dataclass
class GPB2Belief:
    """One filtering-time belief: a Gaussian per mode plus mode weights."""

    means: np.ndarray     # (K, L)
    covs: np.ndarray      # (K, L, L)
    log_weights: np.ndarray  # (K,)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def collapsed(self):
        return collapse_moments(self.weights, self.means, self.covs)


@dataclass
class GPB2FilterResult:
    mean: np.ndarray          # (T, L) collapsed causal means
    cov: np.ndarray           # (T, L, L)
    resp: np.ndarray          # (T, K) filtered mode probabilities
    bank_means: np.ndarray    # (T, K, L) per-mode filtered means
    bank_covs: np.ndarray     # (T, K, L, L)
    loglik_steps: np.ndarray  # (T,) per-step log-evidence increments

    @property
    def loglik(self) -> float:
        return float(self.loglik_steps.sum())

    @property
    def T(self) -> int:
        return self.mean.shape[0]


class GPB2FilterSession:
    """Streaming mode-bank filter; one observation per `step` call."""

    def __init__(self, theta: StaticParams, phi: DynamicParams):
        require_valid(theta, phi)
        self.theta = theta
        self.phi = phi
        self.obs = ObservationCache(theta)
        self.init = InitialStateCache(theta)
        with np.errstate(divide="ignore"):
            self.log_pi = np.log(theta.pi)
            self.log_tau = np.log(phi.tau)
        self.t = 0
        self.loglik = 0.0
        K, L = theta.K, theta.L
        self.bank_means = np.zeros((K, L))
        self.bank_covs = np.broadcast_to(np.eye(L), (K, L, L)).copy()
        self.log_resp = np.full(K, -np.inf)

    def step(self, y_t: np.ndarray):
        """Returns (mean, cov, resp) of the collapsed causal posterior."""
        y = np.asarray(y_t, float).ravel()
        if self.t == 0:
            inc = self._first_step(y)
        else:
            inc = self._pair_step(y)
        self.loglik += inc
        self.t += 1
        resp = np.exp(self.log_resp)
        mean, cov = collapse_moments(resp, self.bank_means, self.bank_covs)
        return mean, cov, resp

    def _first_step(self, y: np.ndarray) -> float:
        K = self.theta.K
        log_w = np.full(K, -np.inf)
        for k in range(K):
            if self.theta.pi[k] <= 0.0:
                continue
            m, V, ev = conditioned_update(self.obs, k, y,
                                           self.theta.gamma[k],
                                           self.init.Ginv[k],
                                           self.init.logdet_Gamma[k])
            self.bank_means[k] = m
            self.bank_covs[k] = V
            log_w[k] = self.log_pi[k] + ev
        inc = float(logsumexp(log_w))
        self.log_resp = log_w - inc
        self._patch_empty_modes()
        return inc

    def _pair_step(self, y: np.ndarray) -> float:
        K, L = self.theta.K, self.theta.L
        C, Q = self.phi.C, self.phi.Q
        log_w = np.full((K, K), -np.inf)          # [prev, cur]
        pair_means = np.zeros((K, K, L))
        pair_covs = np.zeros((K, K, L, L))

        for kp in range(K):                        # previous mode
            if np.isneginf(self.log_resp[kp]):
                continue
            m_prev = self.bank_means[kp]
            V_prev = self.bank_covs[kp]
            for k in range(K):                     # current mode
                base = self.log_resp[kp] + self.log_tau[k, kp]
                if np.isneginf(base):
                    continue
                pred_mean = C[k] @ m_prev
                pred_cov = symmetrize(C[k] @ V_prev @ C[k].T + Q[k])
                root = chol_spd(pred_cov, name="predicted covariance")
                pred_prec = sla.cho_solve((root, True), np.eye(L))
                pred_logdet = 2.0 * float(np.sum(np.log(np.diag(root))))
                m, V, ev = conditioned_update(self.obs, k, y, pred_mean,
                                               symmetrize(pred_prec),
                                               pred_logdet)
                pair_means[kp, k] = m
                pair_covs[kp, k] = V
                log_w[kp, k] = base + ev

        inc = float(logsumexp(log_w))
        log_norm = log_w - inc
        self.log_resp = logsumexp(log_norm, axis=0)
        for k in range(K):
            if np.isneginf(self.log_resp[k]):
                continue
            cond = np.exp(log_norm[:, k] - self.log_resp[k])
            keep = cond > COLLAPSE_WEIGHT_FLOOR
            w = cond[keep] / cond[keep].sum()
            self.bank_means[k], self.bank_covs[k] = collapse_moments(
                w, pair_means[keep, k], pair_covs[keep, k])
        self._patch_empty_modes()
        return inc

    def _patch_empty_modes(self):
        """Zero-probability modes get the overall moments so later collapse
        arithmetic never touches stale or undefined bank entries."""
        dead = np.isneginf(self.log_resp)
        if not dead.any():
            return
        resp = np.exp(self.log_resp)
        mean, cov = collapse_moments(resp, self.bank_means, self.bank_covs)
        self.bank_means[dead] = mean
        self.bank_covs[dead] = cov

    @property
    def belief(self) -> GPB2Belief:
        return GPB2Belief(means=self.bank_means.copy(),
                          covs=self.bank_covs.copy(),
                          log_weights=self.log_resp.copy())

    def set_belief(self, belief: GPB2Belief):
        self.bank_means = np.array(belief.means, float)
        self.bank_covs = np.array(belief.covs, float)
        self.log_resp = np.array(belief.log_weights, float)


def gpb2_step(theta: StaticParams, phi: DynamicParams,
              belief_prev: GPB2Belief, y_t: np.ndarray):
    """One mode-bank update: expand to all mode pairs, reweight, collapse.

    Returns (belief, loglik_increment).  For streaming use prefer
    GPB2FilterSession, which reuses its per-mode factor caches.
    """
    session = GPB2FilterSession(theta, phi)
    session.set_belief(belief_prev)
    session.t = 1
    session.step(y_t)
    return session.belief, session.loglik


def gpb2_filter(theta: StaticParams, phi: DynamicParams,
                y: np.ndarray) -> GPB2FilterResult:
    """Causal mode-bank filter over a whole sequence."""
    y = np.atleast_2d(np.asarray(y, float))
    T, K, L = y.shape[0], theta.K, theta.L
    session = GPB2FilterSession(theta, phi)
    out = GPB2FilterResult(mean=np.empty((T, L)), cov=np.empty((T, L, L)),
                           resp=np.empty((T, K)),
                           bank_means=np.empty((T, K, L)),
                           bank_covs=np.empty((T, K, L, L)),
                           loglik_steps=np.empty(T))
    prev_loglik = 0.0
    for t in range(T):
        m, c, r = session.step(y[t])
        out.mean[t], out.cov[t], out.resp[t] = m, c, r
        out.bank_means[t] = session.bank_means
        out.bank_covs[t] = session.bank_covs
        out.loglik_steps[t] = session.loglik - prev_loglik
        prev_loglik = session.loglik
    return out


@dataclass
class GPB2SmoothResult:
    posterior: VariationalPosterior
    filter_result: GPB2FilterResult
    bank_means: np.ndarray   # (T, K, L) smoothed per-mode means
    bank_covs: np.ndarray    # (T, K, L, L)

    @property
    def loglik(self) -> float:
        return self.filter_result.loglik


def gpb2_smooth(theta: StaticParams, phi: DynamicParams,
                y: np.ndarray,
                filter_result: GPB2FilterResult | None = None) -> GPB2SmoothResult:
    """Backward moment-matched smoother on top of the mode-bank filter.

    Produces collapsed marginal means/covariances, adjacent-step
    cross-covariances, smoothed mode marginals and adjacent mode pair
    probabilities, packed as a posterior the dynamics M step can consume.
    """
    y = np.atleast_2d(np.asarray(y, float))
    filt = filter_result or gpb2_filter(theta, phi, y)
    T, K, L = filt.T, theta.K, theta.L
    C, Q, tau = phi.C, phi.Q, phi.tau

    s_means = filt.bank_means.copy()
    s_covs = filt.bank_covs.copy()
    s_resp = np.empty((T, K))
    s_resp[T - 1] = filt.resp[T - 1]
    pairs = np.zeros((T, K, K))
    cross = np.zeros((T, L, L))

    for t in range(T - 2, -1, -1):
        f_resp = filt.resp[t]
        # mode-pair weights: p(z_t = k, z_{t+1} = j | all data)
        denom = tau @ f_resp                     # denom[j] = sum_k tau[j,k] f_k
        w = np.zeros((K, K))                     # [k at t, j at t+1]
        for j in range(K):
            if s_resp[t + 1][j] <= 0.0 or denom[j] <= 0.0:
                continue
            w[:, j] = s_resp[t + 1][j] * tau[j, :] * f_resp / denom[j]
        s_resp[t] = w.sum(axis=1)
        pairs[t + 1] = w

        pair_means = np.zeros((K, K, L))
        pair_covs = np.zeros((K, K, L, L))
        pair_cross = np.zeros((K, K, L, L))
        for k in range(K):
            for j in range(K):
                if w[k, j] <= 0.0:
                    continue
                pred_cov = symmetrize(C[j] @ filt.bank_covs[t, k] @ C[j].T + Q[j])
                gain = solve_spd(pred_cov, C[j] @ filt.bank_covs[t, k],
                                 name="predicted covariance").T
                resid_mean = s_means[t + 1, j] - C[j] @ filt.bank_means[t, k]
                pair_means[k, j] = filt.bank_means[t, k] + gain @ resid_mean
                pair_covs[k, j] = symmetrize(
                    filt.bank_covs[t, k]
                    + gain @ (s_covs[t + 1, j] - pred_cov) @ gain.T)
                pair_cross[k, j] = gain @ s_covs[t + 1, j]

        # per-mode smoothed bank at t
        for k in range(K):
            if s_resp[t][k] <= COLLAPSE_WEIGHT_FLOOR:
                s_means[t, k] = filt.bank_means[t, k]
                s_covs[t, k] = filt.bank_covs[t, k]
                continue
            cond = w[k] / s_resp[t][k]
            keep = cond > COLLAPSE_WEIGHT_FLOOR
            cw = cond[keep] / cond[keep].sum()
            s_means[t, k], s_covs[t, k] = collapse_moments(
                cw, pair_means[k, keep], pair_covs[k, keep])

        # overall cross-covariance Cov(x_t, x_{t+1}) from the joint mixture
        flat_w, flat_means, flat_covs = [], [], []
        for k in range(K):
            for j in range(K):
                if w[k, j] <= COLLAPSE_WEIGHT_FLOOR:
                    continue
                jm = np.concatenate([pair_means[k, j], s_means[t + 1, j]])
                jc = np.empty((2 * L, 2 * L))
                jc[:L, :L] = pair_covs[k, j]
                jc[:L, L:] = pair_cross[k, j]
                jc[L:, :L] = pair_cross[k, j].T
                jc[L:, L:] = s_covs[t + 1, j]
                flat_w.append(w[k, j])
                flat_means.append(jm)
                flat_covs.append(jc)
        flat_w = np.asarray(flat_w)
        _, joint_cov = collapse_moments(flat_w / flat_w.sum(),
                                        np.asarray(flat_means),
                                        np.asarray(flat_covs))
        cross[t + 1] = joint_cov[:L, L:]

    mean = np.empty((T, L))
    cov = np.empty((T, L, L))
    for t in range(T):
        mean[t], cov[t] = collapse_moments(s_resp[t], s_means[t], s_covs[t])

    post = VariationalPosterior(mean=mean, cov=cov, cross_cov=cross,
                                resp=s_resp, resp_pairs=pairs,
                                fwd_mean=filt.mean, fwd_cov=filt.cov)
    return GPB2SmoothResult(posterior=post, filter_result=filt,
                            bank_means=s_means, bank_covs=s_covs)


@dataclass
class GPB2LearnResult:
    phi: DynamicParams
    posterior: VariationalPosterior | list[VariationalPosterior]
    loglik_trace: np.ndarray
    converged: bool
    n_iters: int
    notes: list[str] = field(default_factory=list)


def gpb2_learn(theta: StaticParams, phi0: DynamicParams, y,
               config: VEMConfig | None = None) -> GPB2LearnResult:
    """EM-style dynamics learning with mode-bank smoothing as the E step.

    The E step is moment-matched rather than exact, so the likelihood trace
    is not guaranteed monotone; a material decrease reverts the last update
    and stops, recording a note.
    """
    config = config or VEMConfig()
    require_valid(theta, phi0)
    ys = [np.atleast_2d(np.asarray(s, float))
          for s in (y if isinstance(y, (list, tuple)) else [y])]
    single = not isinstance(y, (list, tuple))

    phi = phi0.copy()
    trace: list[float] = []
    notes: list[str] = []
    converged = False
    posts: list[VariationalPosterior] = []
    n_iters = 0
    prev_phi = phi

    for it in range(config.max_em_iters):
        smooths = [gpb2_smooth(theta, phi, s) for s in ys]
        posts = [sm.posterior for sm in smooths]
        value = sum(sm.loglik for sm in smooths)
        n_iters = it + 1
        if trace:
            tol = config.tol_elbo_rel * max(1.0, abs(trace[-1]))
            if value < trace[-1] - tol:
                notes.append("LIKELIHOOD_DECREASE: reverting last update")
                warnings.warn(notes[-1])
                phi = prev_phi
                break
            trace.append(value)
            if abs(value - trace[-2]) <= tol:
                converged = True
                break
        else:
            trace.append(value)

        stats = m_step_stats(posts[0])
        for p in posts[1:]:
            stats.add(m_step_stats(p))
        prev_phi = phi
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            phi, new_notes = m_step_from_stats(phi, stats, config)
        notes.extend(new_notes)

    return GPB2LearnResult(phi=phi, posterior=posts[0] if single else posts,
                           loglik_trace=np.array(trace), converged=converged,
                           n_iters=n_iters, notes=notes)

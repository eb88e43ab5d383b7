"""Variational EM for piecewise-linear dynamical systems.

The posterior is factorized as q(x_{1:T}) q(z_{1:T}) and the two blocks are
updated alternately:

* mode step: q(z) is a pseudo-HMM whose per-step scores are the expected
  Gaussian log-densities under the current state posterior (observation
  term plus a trace penalty, dynamics term plus trace penalties and a
  cross-covariance correction, initial-state terms at t = 1);
* state step: q(x) is a non-stationary linear-Gaussian chain whose factors
  are responsibility-weighted precision aggregates.  Because the weighted
  aggregates do not factor the way a single linear system would (the
  weighted cross precision is generally not the product of its weighted
  halves), the forward/backward recursions run directly on the aggregate
  precisions, in information form, with Cholesky solves throughout.

The M step re-estimates the dynamics (transition matrix, per-mode process
noise, optionally the per-mode dynamics matrices) from the same posterior
moments, so the GPB2 learner can reuse it unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.special import logsumexp

from .errors import BadConfigError, DegenerateResponsibilitiesError
from .gaussians import collapse_moments
from .hmm import forward_backward, normalized_exp
from .linalg import (LOG_2PI, chol_spd, inv_spd, logdet_spd, solve_spd,
                     symmetrize, ensure_spd)
from .params import (DynamicParams, DynamicsCache, InitialStateCache,
                     ObservationCache, StaticParams, conditioned_update,
                     require_valid)


@dataclass
class VEMConfig:
    """Knobs shared by the variational and GPB2 learners.

    `tol_elbo_rel` stops the outer loop on the relative change of the
    objective trace (ELBO for the variational learner, observed-data
    log-likelihood for GPB2).  `window` only affects the causal filter.
    """

    max_em_iters: int = 50
    inner_e_sweeps: int = 3
    tol_elbo_rel: float = 1e-6
    tol_eta: float = 1e-6
    update_C: bool = False
    window: int = 1
    rho_floor: float = 1e-12
    jitter: float = 1e-9
    max_smooth_sweeps: int = 50
    starvation_eps: float = 1e-8

    @classmethod
    def from_dict(cls, payload: dict) -> "VEMConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise BadConfigError("unknown config keys", keys=sorted(unknown))
        return cls(**payload)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class VariationalPosterior:
    """Joint variational posterior over states and modes.

    `cross_cov[t]` is Cov(x_{t-1}, x_t) under q; `resp_pairs[t, j, i]` is
    q(z_{t-1} = j, z_t = i).  Row 0 of both is unused.  Forward quantities
    are the causal (filtered-sense) moments; backward messages are kept in
    information form because the terminal backward precision is zero.
    """

    mean: np.ndarray          # (T, L)
    cov: np.ndarray           # (T, L, L)
    cross_cov: np.ndarray     # (T, L, L)
    resp: np.ndarray          # (T, K)
    resp_pairs: np.ndarray    # (T, K, K)
    fwd_mean: np.ndarray | None = None
    fwd_cov: np.ndarray | None = None
    fwd_prec: np.ndarray | None = None
    fwd_vec: np.ndarray | None = None
    bwd_prec: np.ndarray | None = None
    bwd_vec: np.ndarray | None = None
    scores: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.mean.shape[0]

    @property
    def K(self) -> int:
        return self.resp.shape[1]


@dataclass
class _Caches:
    obs: ObservationCache
    dyn: DynamicsCache
    init: InitialStateCache
    log_pi: np.ndarray
    log_tau: np.ndarray


def _build_caches(theta: StaticParams, phi: DynamicParams) -> _Caches:
    with np.errstate(divide="ignore"):
        return _Caches(ObservationCache(theta), DynamicsCache(phi),
                       InitialStateCache(theta), np.log(theta.pi),
                       np.log(phi.tau))


# ---------------------------------------------------------------------------
# mode step


def _ez_scores(theta: StaticParams, caches: _Caches, y: np.ndarray,
               mean: np.ndarray, cov: np.ndarray,
               cross_cov: np.ndarray) -> np.ndarray:
    """Expected per-step log-densities under q(x), one column per mode."""
    T = y.shape[0]
    K, D, L = theta.K, theta.D, theta.L
    obs, dyn, init = caches.obs, caches.dyn, caches.init
    scores = np.empty((T, K))

    for t in range(T):
        obs_means = np.einsum("kdl,l->kd", theta.A, mean[t]) + theta.b
        s = obs.loglik_all(y[t], obs_means)
        s -= 0.5 * np.einsum("kij,ij->k", obs.AtSinvA, cov[t])
        if t == 0:
            diff = mean[0][None, :] - theta.gamma
            quad = np.einsum("ki,kij,kj->k", diff, init.Ginv, diff)
            s += -0.5 * (L * LOG_2PI + init.logdet_Gamma + quad)
            s -= 0.5 * np.einsum("kij,ij->k", init.Ginv, cov[0])
        else:
            pred = np.einsum("kij,j->ki", caches.dyn.phi.C, mean[t - 1])
            diff = mean[t][None, :] - pred
            quad = np.einsum("ki,kij,kj->k", diff, dyn.Qinv, diff)
            s += -0.5 * (L * LOG_2PI + dyn.logdet_Q + quad)
            s -= 0.5 * np.einsum("kij,ij->k", dyn.CtQinvC, cov[t - 1])
            s -= 0.5 * np.einsum("kij,ij->k", dyn.Qinv, cov[t])
            # tr(Q^{-1} C W) with W = Cov(x_{t-1}, x_t)
            s += np.einsum("kij,ji->k", dyn.QinvC, cross_cov[t])
        scores[t] = s
    return scores


def e_z_step(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
             mean: np.ndarray, cov: np.ndarray, cross_cov: np.ndarray,
             rho_floor: float = 1e-12):
    """Coordinate update of the mode posterior given state moments.

    Returns (resp, resp_pairs, scores): chain marginals, adjacent-pair
    joints (row 0 unused) and the pseudo log-observation scores.
    """
    y = np.atleast_2d(np.asarray(y, float))
    caches = _build_caches(theta, phi)
    scores = _ez_scores(theta, caches, y, mean, cov, cross_cov)
    return _ez_from_scores(caches, scores, rho_floor) + (scores,)


def _ez_from_scores(caches: _Caches, scores: np.ndarray, rho_floor: float):
    _, log_marg, log_pairs, _ = forward_backward(caches.log_pi,
                                                 caches.log_tau, scores)
    resp = np.exp(log_marg)
    if rho_floor > 0.0:
        resp = np.clip(resp, rho_floor, None)
    resp = resp / resp.sum(axis=1, keepdims=True)
    resp_pairs = np.exp(log_pairs)
    resp_pairs[0] = 0.0
    return resp, resp_pairs


# ---------------------------------------------------------------------------
# state step


@dataclass
class _Aggregates:
    """Responsibility-weighted precision aggregates of the state chain."""

    obs_prec: np.ndarray    # (T, L, L)  sum_k resp A^T Sigma^{-1} A
    obs_vec: np.ndarray     # (T, L)     sum_k resp A^T Sigma^{-1} (y - b)
    init_prec: np.ndarray   # (L, L)     sum_k resp_1 Gamma^{-1}
    init_vec: np.ndarray    # (L,)
    dyn_prec: np.ndarray    # (T, L, L)  sum_k resp Q^{-1}          (t >= 1)
    dyn_cross: np.ndarray   # (T, L, L)  sum_k resp Q^{-1} C
    dyn_prev: np.ndarray    # (T, L, L)  sum_k resp C^T Q^{-1} C


def _build_aggregates(theta: StaticParams, caches: _Caches, y: np.ndarray,
                      resp: np.ndarray) -> _Aggregates:
    obs, dyn, init = caches.obs, caches.dyn, caches.init
    obs_prec = np.einsum("tk,kij->tij", resp, obs.AtSinvA)
    obs_vec = (np.einsum("tk,kld,td->tl", resp, obs.AtSinv, y)
               - resp @ np.einsum("kld,kd->kl", obs.AtSinv, theta.b))
    init_prec = np.einsum("k,kij->ij", resp[0], init.Ginv)
    init_vec = resp[0] @ init.Ginv_gamma
    dyn_prec = np.einsum("tk,kij->tij", resp, dyn.Qinv)
    dyn_cross = np.einsum("tk,kij->tij", resp, dyn.QinvC)
    dyn_prev = np.einsum("tk,kij->tij", resp, dyn.CtQinvC)
    return _Aggregates(obs_prec, obs_vec, init_prec, init_vec,
                       dyn_prec, dyn_cross, dyn_prev)


def _forward_messages(agg: _Aggregates, T: int, L: int):
    fwd_prec = np.empty((T, L, L))
    fwd_vec = np.empty((T, L))
    fwd_prec[0] = agg.init_prec + agg.obs_prec[0]
    fwd_vec[0] = agg.init_vec + agg.obs_vec[0]
    for t in range(1, T):
        gram = agg.dyn_prev[t] + fwd_prec[t - 1]
        sol = solve_spd(gram, agg.dyn_cross[t].T, name="forward gram")
        fwd_prec[t] = symmetrize(agg.obs_prec[t] + agg.dyn_prec[t]
                                 - agg.dyn_cross[t] @ sol)
        fwd_vec[t] = agg.obs_vec[t] + agg.dyn_cross[t] @ solve_spd(
            gram, fwd_vec[t - 1], name="forward gram")
    return fwd_prec, fwd_vec


def _backward_messages(agg: _Aggregates, T: int, L: int):
    bwd_prec = np.zeros((T, L, L))
    bwd_vec = np.zeros((T, L))
    for t in range(T - 2, -1, -1):
        pivot = agg.obs_prec[t + 1] + agg.dyn_prec[t + 1] + bwd_prec[t + 1]
        sol = solve_spd(pivot, agg.dyn_cross[t + 1], name="backward pivot")
        bwd_prec[t] = symmetrize(agg.dyn_prev[t + 1]
                                 - agg.dyn_cross[t + 1].T @ sol)
        bwd_vec[t] = agg.dyn_cross[t + 1].T @ solve_spd(
            pivot, agg.obs_vec[t + 1] + bwd_vec[t + 1], name="backward pivot")
    return bwd_prec, bwd_vec


def _pair_moments(agg: _Aggregates, fwd_prec, fwd_vec, bwd_prec, bwd_vec, t, L):
    """Joint moments of (x_t, x_{t-1}); returns (mean_t, mean_prev, 2Lx2L cov)."""
    prec = np.empty((2 * L, 2 * L))
    prec[:L, :L] = agg.obs_prec[t] + agg.dyn_prec[t] + bwd_prec[t]
    prec[:L, L:] = -agg.dyn_cross[t]
    prec[L:, :L] = -agg.dyn_cross[t].T
    prec[L:, L:] = agg.dyn_prev[t] + fwd_prec[t - 1]
    vec = np.concatenate([agg.obs_vec[t] + bwd_vec[t], fwd_vec[t - 1]])
    cov = inv_spd(prec, name="pairwise precision")
    mean = cov @ vec
    return mean[:L], mean[L:], cov


def e_x_step(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
             resp: np.ndarray) -> VariationalPosterior:
    """Coordinate update of the state posterior given mode responsibilities.

    Runs the aggregate-precision forward and backward recursions and
    assembles marginal means/covariances plus adjacent cross-covariances.
    """
    y = np.atleast_2d(np.asarray(y, float))
    caches = _build_caches(theta, phi)
    return _e_x_from_caches(theta, caches, y, np.asarray(resp, float))


def _e_x_from_caches(theta: StaticParams, caches: _Caches, y: np.ndarray,
                     resp: np.ndarray) -> VariationalPosterior:
    T, L = y.shape[0], theta.L
    agg = _build_aggregates(theta, caches, y, resp)
    fwd_prec, fwd_vec = _forward_messages(agg, T, L)
    bwd_prec, bwd_vec = _backward_messages(agg, T, L)

    mean = np.empty((T, L))
    cov = np.empty((T, L, L))
    fwd_mean = np.empty((T, L))
    fwd_cov = np.empty((T, L, L))
    cross = np.zeros((T, L, L))
    for t in range(T):
        marg_prec = fwd_prec[t] + bwd_prec[t]
        cov[t] = inv_spd(marg_prec, name="marginal precision")
        mean[t] = cov[t] @ (fwd_vec[t] + bwd_vec[t])
        fwd_cov[t] = inv_spd(fwd_prec[t], name="forward precision")
        fwd_mean[t] = fwd_cov[t] @ fwd_vec[t]
    for t in range(1, T):
        _, _, pair_cov = _pair_moments(agg, fwd_prec, fwd_vec,
                                       bwd_prec, bwd_vec, t, L)
        cross[t] = pair_cov[L:, :L]   # Cov(x_{t-1}, x_t)

    pairs = np.zeros((T, resp.shape[1], resp.shape[1]))
    return VariationalPosterior(mean=mean, cov=cov, cross_cov=cross,
                                resp=resp, resp_pairs=pairs,
                                fwd_mean=fwd_mean, fwd_cov=fwd_cov,
                                fwd_prec=fwd_prec, fwd_vec=fwd_vec,
                                bwd_prec=bwd_prec, bwd_vec=bwd_vec)


# ---------------------------------------------------------------------------
# objective


def _chain_entropy_x(post: VariationalPosterior) -> float:
    """Entropy of the Gaussian chain from marginals and pair covariances."""
    T, L = post.T, post.mean.shape[1]

    def gauss_ent(cov):
        d = cov.shape[0]
        return 0.5 * (d * (1.0 + LOG_2PI)
                      + 2.0 * float(np.sum(np.log(np.diag(chol_spd(cov))))))

    total = gauss_ent(post.cov[0])
    for t in range(1, T):
        joint = np.empty((2 * L, 2 * L))
        joint[:L, :L] = post.cov[t - 1]
        joint[:L, L:] = post.cross_cov[t]
        joint[L:, :L] = post.cross_cov[t].T
        joint[L:, L:] = post.cov[t]
        total += gauss_ent(joint) - gauss_ent(post.cov[t - 1])
    return total


def _chain_entropy_z(post: VariationalPosterior) -> float:
    def ent(p):
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())

    total = ent(post.resp[0])
    for t in range(1, post.T):
        total += ent(post.resp_pairs[t].ravel()) - ent(post.resp[t - 1])
    return total


def elbo(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
         post: VariationalPosterior) -> float:
    """Evidence lower bound of the factorized posterior; never above the
    exact log-marginal likelihood."""
    y = np.atleast_2d(np.asarray(y, float))
    caches = _build_caches(theta, phi)
    scores = _ez_scores(theta, caches, y, post.mean, post.cov, post.cross_cov)

    energy = float(np.sum(post.resp * scores))
    first = post.resp[0]
    energy += float(np.sum(np.where(first > 0, first * caches.log_pi, 0.0)))
    pairs = post.resp_pairs[1:]
    log_tau_pairs = caches.log_tau.T[None, :, :]   # [t, prev, cur]
    energy += float(np.sum(np.where(pairs > 0, pairs * log_tau_pairs, 0.0)))

    return energy + _chain_entropy_x(post) + _chain_entropy_z(post)


# ---------------------------------------------------------------------------
# M step


@dataclass
class MStepStats:
    """Sufficient statistics pooled across sequences for the dynamics update."""

    pair_counts: np.ndarray   # (K, K) [prev, cur]
    counts: np.ndarray        # (K,)   sum_{t>=1} resp
    prev_second: np.ndarray   # (K, L, L) sum resp * E[x_{t-1} x_{t-1}^T]
    cross_second: np.ndarray  # (K, L, L) sum resp * E[x_{t-1} x_t^T]
    cur_second: np.ndarray    # (K, L, L) sum resp * E[x_t x_t^T]

    def add(self, other: "MStepStats"):
        self.pair_counts += other.pair_counts
        self.counts += other.counts
        self.prev_second += other.prev_second
        self.cross_second += other.cross_second
        self.cur_second += other.cur_second


def m_step_stats(post: VariationalPosterior) -> MStepStats:
    T, K = post.T, post.K
    L = post.mean.shape[1]
    pair_counts = post.resp_pairs[1:].sum(axis=0)
    counts = post.resp[1:].sum(axis=0)

    prev_sec = post.cov[:-1] + np.einsum("ti,tj->tij", post.mean[:-1], post.mean[:-1])
    cur_sec = post.cov[1:] + np.einsum("ti,tj->tij", post.mean[1:], post.mean[1:])
    cross_sec = post.cross_cov[1:] + np.einsum("ti,tj->tij",
                                               post.mean[:-1], post.mean[1:])
    r = post.resp[1:]
    return MStepStats(
        pair_counts=pair_counts,
        counts=counts,
        prev_second=np.einsum("tk,tij->kij", r, prev_sec),
        cross_second=np.einsum("tk,tij->kij", r, cross_sec),
        cur_second=np.einsum("tk,tij->kij", r, cur_sec),
    )


def m_step_from_stats(phi: DynamicParams, stats: MStepStats,
                      config: VEMConfig) -> tuple[DynamicParams, list[str]]:
    K, L = phi.K, phi.L
    notes: list[str] = []
    new_C = phi.C.copy()
    new_Q = phi.Q.copy()
    new_tau = phi.tau.copy()

    col_mass = stats.pair_counts.sum(axis=1)   # occupancy of the previous mode
    for j in range(K):
        if col_mass[j] > config.starvation_eps:
            new_tau[:, j] = stats.pair_counts[j] / col_mass[j]
        else:
            notes.append(f"STARVED_COMPONENT: transition column {j} kept")

    for k in range(K):
        if stats.counts[k] <= config.starvation_eps:
            notes.append(f"STARVED_COMPONENT: mode {k} dynamics kept")
            continue
        if config.update_C:
            # C = (sum E[x_t x_{t-1}^T]) (sum E[x_{t-1} x_{t-1}^T])^{-1}
            new_C[k] = solve_spd(stats.prev_second[k], stats.cross_second[k],
                                 name="previous-state second moment").T
        C = new_C[k]
        resid = (stats.cur_second[k]
                 - C @ stats.cross_second[k]
                 - stats.cross_second[k].T @ C.T
                 + C @ stats.prev_second[k] @ C.T)
        new_Q[k] = ensure_spd(resid / stats.counts[k])

    out = DynamicParams(C=new_C, Q=new_Q, tau=new_tau)
    for note in notes:
        warnings.warn(note)
    return out, notes


def m_step(phi: DynamicParams, post: VariationalPosterior,
           config: VEMConfig | None = None) -> DynamicParams:
    """Closed-form dynamics update from one posterior; starved modes keep
    their previous parameters."""
    config = config or VEMConfig()
    new_phi, _ = m_step_from_stats(phi, m_step_stats(post), config)
    return new_phi


# ---------------------------------------------------------------------------
# drivers


def _e_sweeps(theta: StaticParams, caches: _Caches, y: np.ndarray,
              post: VariationalPosterior, n_sweeps: int,
              tol_eta: float, rho_floor: float) -> VariationalPosterior:
    """Alternate mode/state coordinate updates from an existing posterior."""
    for _ in range(max(1, n_sweeps)):
        scores = _ez_scores(theta, caches, y, post.mean, post.cov,
                            post.cross_cov)
        resp, pairs = _ez_from_scores(caches, scores, rho_floor)
        new_post = _e_x_from_caches(theta, caches, y, resp)
        new_post.resp_pairs = pairs
        new_post.scores = scores
        delta = float(np.max(np.abs(new_post.mean - post.mean)))
        post = new_post
        if delta < tol_eta:
            break
    return post


def _seed_resp(theta: StaticParams, phi: DynamicParams, caches: _Caches,
               y: np.ndarray, rho_floor: float) -> np.ndarray:
    """Initial responsibilities from a constant-mode filter bank.

    Uniform responsibilities sit on a symmetric saddle of the objective:
    the first state update then blends all modes and the ascent can lock
    onto the wrong one.  Instead each mode runs its own single-mode
    filter; the per-step predictive evidences become pseudo-observation
    scores and one chain pass over them gives the starting point.
    """
    T, K = y.shape[0], theta.K
    mean = theta.gamma.copy()
    cov = theta.Gamma.copy()
    scores = np.empty((T, K))
    for t in range(T):
        if t > 0:
            mean = np.einsum("kij,kj->ki", phi.C, mean)
            cov = np.einsum("kij,kjl,kml->kim", phi.C, cov, phi.C) + phi.Q
        for k in range(K):
            prior_cov = symmetrize(cov[k])
            prec = inv_spd(prior_cov, name="seed prior covariance")
            logdet = logdet_spd(prior_cov, name="seed prior covariance")
            mean[k], cov[k], scores[t, k] = conditioned_update(
                caches.obs, k, y[t], mean[k], prec, logdet)
    resp, _ = _ez_from_scores(caches, scores, rho_floor)
    return resp


def variational_smooth(theta: StaticParams, phi: DynamicParams, y: np.ndarray,
                       config: VEMConfig | None = None,
                       init_resp: np.ndarray | None = None) -> VariationalPosterior:
    """Inference-only smoother: alternate the two coordinate updates at fixed
    parameters until the state means stabilize.  Responsibilities start
    from per-frame evidence unless init_resp is given."""
    config = config or VEMConfig()
    require_valid(theta, phi)
    y = np.atleast_2d(np.asarray(y, float))
    caches = _build_caches(theta, phi)
    resp = (_seed_resp(theta, phi, caches, y, config.rho_floor)
            if init_resp is None else np.asarray(init_resp, float))
    post = _e_x_from_caches(theta, caches, y, resp)
    return _e_sweeps(theta, caches, y, post, config.max_smooth_sweeps,
                     config.tol_eta, config.rho_floor)


@dataclass
class VEMResult:
    phi: DynamicParams
    posterior: VariationalPosterior | list[VariationalPosterior]
    elbo_trace: np.ndarray
    converged: bool
    n_iters: int
    notes: list[str] = field(default_factory=list)


def run_vem_smoother(theta: StaticParams, phi0: DynamicParams, y,
                     config: VEMConfig | None = None) -> VEMResult:
    """Full variational EM: learn the dynamics of one or more sequences.

    `y` is a (T, D) array or a list of them; with several sequences the
    E step runs per sequence and the M step pools their statistics.  The
    ELBO trace records the bound after each inner E sweep (before the M
    update) and is non-decreasing up to solver tolerance.
    """
    config = config or VEMConfig()
    require_valid(theta, phi0)
    ys = [np.atleast_2d(np.asarray(s, float))
          for s in (y if isinstance(y, (list, tuple)) else [y])]
    single = not isinstance(y, (list, tuple))

    phi = phi0.copy()
    caches = _build_caches(theta, phi)
    posts = []
    for s in ys:
        resp = _seed_resp(theta, phi, caches, s, config.rho_floor)
        post = _e_x_from_caches(theta, caches, s, resp)
        posts.append(_e_sweeps(theta, caches, s, post, config.inner_e_sweeps,
                               config.tol_eta, config.rho_floor))

    trace: list[float] = []
    notes: list[str] = []
    converged = False
    n_iters = 0
    for it in range(config.max_em_iters):
        value = sum(elbo(theta, phi, s, p) for s, p in zip(ys, posts))
        trace.append(value)
        n_iters = it + 1
        if it > 0 and abs(trace[-1] - trace[-2]) <= (
                config.tol_elbo_rel * max(1.0, abs(trace[-2]))):
            converged = True
            break

        stats = m_step_stats(posts[0])
        for p in posts[1:]:
            stats.add(m_step_stats(p))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            phi, new_notes = m_step_from_stats(phi, stats, config)
        notes.extend(new_notes)

        caches = _build_caches(theta, phi)
        posts = [_e_sweeps(theta, caches, s, p, config.inner_e_sweeps,
                           config.tol_eta, config.rho_floor)
                 for s, p in zip(ys, posts)]

    return VEMResult(phi=phi, posterior=posts[0] if single else posts,
                     elbo_trace=np.array(trace), converged=converged,
                     n_iters=n_iters, notes=notes)


# ---------------------------------------------------------------------------
# causal filter


@dataclass
class FilterResult:
    mean: np.ndarray   # (T, L)
    cov: np.ndarray    # (T, L, L)
    resp: np.ndarray   # (T, K)


class VariationalFilterSession:
    """Streaming causal state estimator; owns its recursion state.

    Each `step(y_t)` consumes exactly one observation and emits the causal
    estimate at that time.  Coordinate updates iterate over a sliding
    window of the most recent `config.window` steps; the window's entering
    forward message and mode weights are frozen, and within the window the
    backward precision terminates at zero, so emitted estimates depend only
    on observations seen so far.
    """

    def __init__(self, theta: StaticParams, phi: DynamicParams,
                 config: VEMConfig | None = None):
        require_valid(theta, phi)
        self.theta = theta
        self.phi = phi
        self.config = config or VEMConfig()
        self.caches = _build_caches(theta, phi)
        self.t = 0
        self._ys: list[np.ndarray] = []
        self._log_alpha: list[np.ndarray] = []
        self._fwd_prec: list[np.ndarray] = []
        self._fwd_vec: list[np.ndarray] = []
        self._mean: list[np.ndarray] = []
        self._cov: list[np.ndarray] = []
        self._resp: list[np.ndarray] = []
        prior_mean, prior_cov = collapse_moments(theta.pi, theta.gamma,
                                                 theta.Gamma)
        self._prior_mean = prior_mean
        self._prior_cov = prior_cov

    # -- scaffolding -------------------------------------------------------

    def _score_at(self, s: int, mean_s, cov_s, cross_s, mean_prev, cov_prev):
        """Pseudo log-observation score vector at window position s."""
        theta, caches = self.theta, self.caches
        obs, dyn, init = caches.obs, caches.dyn, caches.init
        L = theta.L
        obs_means = np.einsum("kdl,l->kd", theta.A, mean_s) + theta.b
        s_vec = obs.loglik_all(self._ys[s], obs_means)
        s_vec -= 0.5 * np.einsum("kij,ij->k", obs.AtSinvA, cov_s)
        if s == 0:
            diff = mean_s[None, :] - theta.gamma
            quad = np.einsum("ki,kij,kj->k", diff, init.Ginv, diff)
            s_vec += -0.5 * (L * LOG_2PI + init.logdet_Gamma + quad)
            s_vec -= 0.5 * np.einsum("kij,ij->k", init.Ginv, cov_s)
        else:
            pred = np.einsum("kij,j->ki", self.phi.C, mean_prev)
            diff = mean_s[None, :] - pred
            quad = np.einsum("ki,kij,kj->k", diff, dyn.Qinv, diff)
            s_vec += -0.5 * (L * LOG_2PI + dyn.logdet_Q + quad)
            s_vec -= 0.5 * np.einsum("kij,ij->k", dyn.CtQinvC, cov_prev)
            s_vec -= 0.5 * np.einsum("kij,ij->k", dyn.Qinv, cov_s)
            s_vec += np.einsum("kij,ji->k", dyn.QinvC, cross_s)
        return s_vec

    def _window_aggregates(self, s: int, resp_s: np.ndarray):
        theta, caches = self.theta, self.caches
        obs, dyn, init = caches.obs, caches.dyn, caches.init
        obs_prec = np.einsum("k,kij->ij", resp_s, obs.AtSinvA)
        obs_vec = np.einsum("k,kld,d->l", resp_s, obs.AtSinv, self._ys[s])
        obs_vec -= resp_s @ np.einsum("kld,kd->kl", obs.AtSinv, theta.b)
        if s == 0:
            return obs_prec, obs_vec, None, None, None
        dyn_prec = np.einsum("k,kij->ij", resp_s, dyn.Qinv)
        dyn_cross = np.einsum("k,kij->ij", resp_s, dyn.QinvC)
        dyn_prev = np.einsum("k,kij->ij", resp_s, dyn.CtQinvC)
        return obs_prec, obs_vec, dyn_prec, dyn_cross, dyn_prev

    # -- one observation ---------------------------------------------------

    def step(self, y_t: np.ndarray):
        """Consume one observation; returns (mean, cov, resp) at this step."""
        cfg = self.config
        t = self.t
        self._ys.append(np.asarray(y_t, float).ravel())

        # warm start: previous moments (prior moments at t = 0)
        if t == 0:
            self._mean.append(self._prior_mean.copy())
            self._cov.append(self._prior_cov.copy())
        else:
            self._mean.append(self._mean[t - 1].copy())
            self._cov.append(self._cov[t - 1].copy())
        self._resp.append(np.full(self.theta.K, 1.0 / self.theta.K))
        self._log_alpha.append(np.zeros(self.theta.K))
        self._fwd_prec.append(np.zeros((self.theta.L, self.theta.L)))
        self._fwd_vec.append(np.zeros(self.theta.L))

        start = max(0, t - cfg.window + 1)
        window = list(range(start, t + 1))
        cross = {s: np.zeros((self.theta.L, self.theta.L)) for s in window}

        prev_emit = self._mean[t].copy()
        for sweep in range(max(1, cfg.inner_e_sweeps)):
            self._mode_update(window, cross)
            self._state_update(window, cross)
            delta = float(np.max(np.abs(self._mean[t] - prev_emit)))
            prev_emit = self._mean[t].copy()
            if delta < cfg.tol_eta and sweep > 0:
                break

        self.t += 1
        return (self._mean[t].copy(), self._cov[t].copy(),
                self._resp[t].copy())

    def _mode_update(self, window, cross):
        caches, cfg = self.caches, self.config
        K = self.theta.K
        scores = {}
        for s in window:
            mean_prev = self._mean[s - 1] if s > 0 else None
            cov_prev = self._cov[s - 1] if s > 0 else None
            scores[s] = self._score_at(s, self._mean[s], self._cov[s],
                                       cross[s], mean_prev, cov_prev)
        log_alpha = {}
        for s in window:
            if s == 0:
                log_alpha[s] = caches.log_pi + scores[s]
            else:
                prev = log_alpha.get(s - 1, self._log_alpha[s - 1])
                log_alpha[s] = scores[s] + logsumexp(
                    caches.log_tau + prev[None, :], axis=1)
            if np.all(np.isneginf(log_alpha[s])):
                raise DegenerateResponsibilitiesError(
                    "all mode hypotheses have zero posterior mass", t=s)
        last = window[-1]
        log_beta = {last: np.zeros(K)}
        for s in reversed(window[:-1]):
            log_beta[s] = logsumexp(
                caches.log_tau
                + (scores[s + 1] + log_beta[s + 1])[:, None], axis=0)
        for s in window:
            self._log_alpha[s] = log_alpha[s]
            self._resp[s] = normalized_exp(log_alpha[s] + log_beta[s],
                                           floor=cfg.rho_floor)

    def _state_update(self, window, cross):
        L = self.theta.L
        aggs = {s: self._window_aggregates(s, self._resp[s]) for s in window}

        # forward within the window from the frozen boundary message
        for s in window:
            obs_prec, obs_vec, dyn_prec, dyn_cross, dyn_prev = aggs[s]
            if s == 0:
                init_prec = np.einsum("k,kij->ij", self._resp[0],
                                      self.caches.init.Ginv)
                init_vec = self._resp[0] @ self.caches.init.Ginv_gamma
                self._fwd_prec[s] = symmetrize(init_prec + obs_prec)
                self._fwd_vec[s] = init_vec + obs_vec
            else:
                gram = dyn_prev + self._fwd_prec[s - 1]
                sol = solve_spd(gram, dyn_cross.T, name="forward gram")
                self._fwd_prec[s] = symmetrize(obs_prec + dyn_prec
                                               - dyn_cross @ sol)
                self._fwd_vec[s] = obs_vec + dyn_cross @ solve_spd(
                    gram, self._fwd_vec[s - 1], name="forward gram")

        # backward precision inside the window (zero at the causal frontier)
        last = window[-1]
        bwd_prec = {last: np.zeros((L, L))}
        bwd_vec = {last: np.zeros(L)}
        for s in reversed(window[:-1]):
            obs_prec, obs_vec, dyn_prec, dyn_cross, dyn_prev = aggs[s + 1]
            pivot = obs_prec + dyn_prec + bwd_prec[s + 1]
            sol = solve_spd(pivot, dyn_cross, name="backward pivot")
            bwd_prec[s] = symmetrize(dyn_prev - dyn_cross.T @ sol)
            bwd_vec[s] = dyn_cross.T @ solve_spd(
                pivot, obs_vec + bwd_vec[s + 1], name="backward pivot")

        for s in window:
            marg_prec = self._fwd_prec[s] + bwd_prec[s]
            self._cov[s] = inv_spd(marg_prec, name="marginal precision")
            self._mean[s] = self._cov[s] @ (self._fwd_vec[s] + bwd_vec[s])

        # adjacent cross-covariances needed by the next mode sweep
        for s in window:
            if s == 0:
                continue
            obs_prec, obs_vec, dyn_prec, dyn_cross, dyn_prev = aggs[s]
            prec = np.empty((2 * L, 2 * L))
            prec[:L, :L] = obs_prec + dyn_prec + bwd_prec[s]
            prec[:L, L:] = -dyn_cross
            prec[L:, :L] = -dyn_cross.T
            prec[L:, L:] = dyn_prev + self._fwd_prec[s - 1]
            cov = inv_spd(prec, name="pairwise precision")
            cross[s] = cov[L:, :L]


def run_variational_filter(theta: StaticParams, phi: DynamicParams,
                           y: np.ndarray,
                           config: VEMConfig | None = None) -> FilterResult:
    """Causal variational filter over a whole sequence."""
    y = np.atleast_2d(np.asarray(y, float))
    session = VariationalFilterSession(theta, phi, config)
    means, covs, resps = [], [], []
    for t in range(y.shape[0]):
        m, c, r = session.step(y[t])
        means.append(m)
        covs.append(c)
        resps.append(r)
    return FilterResult(np.array(means), np.array(covs), np.array(resps))

"""Static joint-mixture baseline: EM over pairs, inverse prediction, and
order selection.

The model drops all temporal structure: each training pair (x_n, y_n) is an
independent draw from a mixture whose component k has a Gaussian latent
block N(x; gamma_k, Gamma_k) and a conditional observation block
N(y; A_k x + b_k, Sigma_k).  Parameters live in the same container as the
sequential model's static block, so fitted baselines serialize and validate
through the common model-file machinery.

Inverse prediction computes E[x | y] in information form; component
evidences go through the determinant lemma so large D with diagonal noise
stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from .errors import BadConfigError, UnknownMethodError
from .gaussians import GaussianMixture
from .linalg import LOG_2PI, chol_spd, solve_spd
from .params import ObservationCache, StaticParams, conditioned_update
from .rng import make_rng, spawn_rngs
from .sequences import TrainingSet

VAR_FLOOR = 1e-8
RESP_SMOOTHING = 1e-3
STARVED_COUNT = 1e-6


def count_static_parameters(K: int, D: int, L: int,
                            sigma_diagonal: bool = False) -> int:
    """Free-parameter count of the static mixture, used by BIC."""
    sigma = D if sigma_diagonal else D * (D + 1) // 2
    per_mode = D * L + D + sigma + L + L * (L + 1) // 2
    return K * per_mode + (K - 1)


def _rows_logpdf(values: np.ndarray, mean: np.ndarray,
                 cov: np.ndarray) -> np.ndarray:
    """log N(values[n]; mean, cov) for every row."""
    d = values.shape[1]
    root = chol_spd(cov)
    white = sla.solve_triangular(root, (values - mean).T, lower=True)
    quad = np.sum(white * white, axis=0)
    logdet = 2.0 * float(np.sum(np.log(np.diag(root))))
    return -0.5 * (d * LOG_2PI + logdet + quad)


def _joint_log_components(theta: StaticParams, x: np.ndarray,
                          y: np.ndarray) -> np.ndarray:
    """(N, K) array of log pi_k + log p(x_n, y_n | mode k)."""
    N, K = x.shape[0], theta.K
    out = np.empty((N, K))
    with np.errstate(divide="ignore"):
        log_pi = np.log(theta.pi)
    for k in range(K):
        latent = _rows_logpdf(x, theta.gamma[k], theta.Gamma[k])
        resid = y - x @ theta.A[k].T - theta.b[k]
        if theta.sigma_diagonal:
            sig = np.diag(theta.Sigma[k])
            quad = np.sum(resid * resid / sig, axis=1)
            cond = -0.5 * (theta.D * LOG_2PI + np.sum(np.log(sig)) + quad)
        else:
            cond = _rows_logpdf(resid, np.zeros(theta.D), theta.Sigma[k])
        out[:, k] = log_pi[k] + latent + cond
    return out


def static_loglik(theta: StaticParams, x: np.ndarray, y: np.ndarray) -> float:
    """Total log-likelihood of independent pairs under the mixture."""
    comps = _joint_log_components(theta, np.atleast_2d(x), np.atleast_2d(y))
    return float(logsumexp(comps, axis=1).sum())


def _e_step(theta: StaticParams, x: np.ndarray, y: np.ndarray):
    comps = _joint_log_components(theta, x, y)
    per_point = logsumexp(comps, axis=1)
    resp = np.exp(comps - per_point[:, None])
    return resp, per_point


def _floor_cov(cov: np.ndarray, floor: float = VAR_FLOOR) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    low = float(np.linalg.eigvalsh(cov)[0])
    if low < floor:
        cov = cov + (floor - low) * np.eye(cov.shape[0])
    return cov


def _m_step(x: np.ndarray, y: np.ndarray, resp: np.ndarray,
            sigma_diagonal: bool) -> StaticParams:
    N, L = x.shape
    D = y.shape[1]
    K = resp.shape[1]
    counts = resp.sum(axis=0)
    pi = counts / N

    gamma = np.empty((K, L))
    Gamma = np.empty((K, L, L))
    A = np.empty((K, D, L))
    b = np.empty((K, D))
    Sigma = np.empty((K, D, D))

    design = np.hstack([x, np.ones((N, 1))])
    for k in range(K):
        w = resp[:, k]
        nk = counts[k]
        gamma[k] = (w @ x) / nk
        centered = x - gamma[k]
        Gamma[k] = _floor_cov((centered * w[:, None]).T @ centered / nk)

        # weighted affine regression y ~ A x + b
        gram = (design * w[:, None]).T @ design
        moment = (design * w[:, None]).T @ y
        coef = solve_spd(gram, moment, name="regression gram").T  # (D, L+1)
        A[k] = coef[:, :L]
        b[k] = coef[:, L]

        resid = y - x @ A[k].T - b[k]
        if sigma_diagonal:
            var = np.maximum((w @ (resid * resid)) / nk, VAR_FLOOR)
            Sigma[k] = np.diag(var)
        else:
            Sigma[k] = _floor_cov((resid * w[:, None]).T @ resid / nk)

    return StaticParams(A=A, b=b, Sigma=Sigma, pi=pi, gamma=gamma,
                        Gamma=Gamma, sigma_diagonal=sigma_diagonal)


def _init_resp(x: np.ndarray, y: np.ndarray, K: int, rng) -> np.ndarray:
    """Soft one-hot responsibilities from k-means++ on whitened pairs."""
    N = x.shape[0]
    feats = np.hstack([x, y])
    std = feats.std(axis=0)
    feats = (feats - feats.mean(axis=0)) / np.where(std > 1e-12, std, 1.0)
    seed = int(rng.integers(0, 2**31 - 1))
    labels = KMeans(n_clusters=K, n_init=1, random_state=seed).fit_predict(feats)
    resp = np.full((N, K), RESP_SMOOTHING / K)
    resp[np.arange(N), labels] += 1.0 - RESP_SMOOTHING
    return resp / resp.sum(axis=1, keepdims=True)


@dataclass
class StaticFitResult:
    theta: StaticParams
    resp: np.ndarray
    loglik_trace: np.ndarray
    converged: bool
    n_iters: int
    notes: list[str] = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def _unpack_pairs(data, y):
    if isinstance(data, TrainingSet):
        return data.x, data.y
    if y is None:
        raise BadConfigError("paired data requires both x and y")
    return data, y


def fit_static(data, y=None, n_modes: int = 1, sigma_diagonal: bool = False,
               n_restarts: int = 5, max_iters: int = 200,
               tol_rel: float = 1e-8, seed=None) -> StaticFitResult:
    """EM for the static joint mixture with k-means++ restarts.

    `data` is a TrainingSet or an (N, L) latent array paired with an (N, D)
    observation array.  Keeps the restart with the best final
    log-likelihood.  The trace is the exact data log-likelihood once per
    iteration and is non-decreasing; a starved component is re-seeded from
    the worst-explained pair, which is recorded in the result notes.
    """
    x, y = _unpack_pairs(data, y)
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    if x.shape[0] != y.shape[0]:
        raise BadConfigError("x and y row counts differ",
                             x_rows=x.shape[0], y_rows=y.shape[0])
    if x.shape[0] < n_modes * (x.shape[1] + 1):
        raise BadConfigError("not enough rows to fit the affine maps",
                             n_points=x.shape[0], n_modes=n_modes,
                             needed=n_modes * (x.shape[1] + 1))

    best: StaticFitResult | None = None
    for rng in spawn_rngs(seed, max(1, n_restarts)):
        resp = _init_resp(x, y, n_modes, rng)
        theta = _m_step(x, y, resp, sigma_diagonal)
        trace: list[float] = []
        notes: list[str] = []
        converged = False
        for _ in range(max_iters):
            resp, per_point = _e_step(theta, x, y)
            trace.append(float(per_point.sum()))
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= (
                    tol_rel * max(1.0, abs(trace[-2]))):
                converged = True
                break
            counts = resp.sum(axis=0)
            for k in np.where(counts < STARVED_COUNT)[0]:
                # re-seed the empty component on the worst-explained pair
                worst = int(np.argmin(per_point))
                resp[worst] = RESP_SMOOTHING / n_modes
                resp[worst, k] = 1.0 - RESP_SMOOTHING * (n_modes - 1) / n_modes
                resp[worst] /= resp[worst].sum()
                notes.append(f"STARVED_COMPONENT: mode {k} re-seeded "
                             f"from pair {worst}")
            theta = _m_step(x, y, resp, sigma_diagonal)
        result = StaticFitResult(theta=theta, resp=resp,
                                 loglik_trace=np.array(trace),
                                 converged=converged, n_iters=len(trace),
                                 notes=notes)
        if best is None or result.loglik > best.loglik:
            best = result
    return best


class InversePredictor:
    """Reusable posterior-of-latents machine for a fitted static model."""

    def __init__(self, theta: StaticParams):
        self.theta = theta
        self.obs = ObservationCache(theta)
        K, L = theta.K, theta.L
        self.Ginv = np.empty((K, L, L))
        self.logdet_Gamma = np.empty(K)
        for k in range(K):
            root = chol_spd(theta.Gamma[k], f"Gamma[{k}]")
            self.Ginv[k] = sla.cho_solve((root, True), np.eye(L))
            self.logdet_Gamma[k] = 2.0 * float(np.sum(np.log(np.diag(root))))
        with np.errstate(divide="ignore"):
            self.log_pi = np.log(theta.pi)

    def posterior(self, y: np.ndarray) -> GaussianMixture:
        """Full mixture posterior over the latent block given one y."""
        theta = self.theta
        K, L = theta.K, theta.L
        means = np.empty((K, L))
        covs = np.empty((K, L, L))
        log_w = np.empty(K)
        for k in range(K):
            m, V, ev = conditioned_update(self.obs, k, y, theta.gamma[k],
                                          self.Ginv[k], self.logdet_Gamma[k])
            means[k] = m
            covs[k] = V
            log_w[k] = self.log_pi[k] + ev
        w = np.exp(log_w - logsumexp(log_w))
        return GaussianMixture(weights=w, means=means, covs=covs)

    def point_estimates(self, ys: np.ndarray):
        """Posterior-mean latents and mode weights for a batch of rows."""
        ys = np.atleast_2d(np.asarray(ys, float))
        N = ys.shape[0]
        x_hat = np.empty((N, self.theta.L))
        resp = np.empty((N, self.theta.K))
        for n in range(N):
            mix = self.posterior(ys[n])
            x_hat[n] = mix.mean()
            resp[n] = mix.weights
        return x_hat, resp


def predict_inverse(theta: StaticParams, y: np.ndarray):
    """Posterior of the latent block given observations only.

    A single observation returns (point_estimate, GaussianMixture); a batch
    of rows returns (point_estimates (N, L), mode weights (N, K)).
    """
    machine = InversePredictor(theta)
    y = np.asarray(y, float)
    if y.ndim == 1:
        mix = machine.posterior(y)
        return mix.mean(), mix
    return machine.point_estimates(y)


@dataclass
class SelectKResult:
    best_k: int
    candidates: np.ndarray
    bic: np.ndarray
    mae: np.ndarray
    criterion: str
    fits: dict

    @property
    def best_fit(self) -> StaticFitResult:
        return self.fits[self.best_k]


def select_k(data, y=None, candidates=(1, 2, 3), criterion: str = "bic",
             sigma_diagonal: bool = False, seed=None,
             **fit_kwargs) -> SelectKResult:
    """Model-order selection over candidate mode counts.

    Each candidate is fitted on an 80% split; the table records both its
    BIC (on the fitting split) and the held-out mean absolute error of
    inverse prediction.  `criterion` ("bic" or "mae") picks the winner,
    which is then refitted on all rows.
    """
    if criterion not in ("bic", "mae"):
        raise UnknownMethodError("unknown selection criterion",
                                 criterion=criterion)
    x, y = _unpack_pairs(data, y)
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    candidates = np.asarray(list(candidates), dtype=int)
    rng = make_rng(seed)
    N = x.shape[0]

    perm = rng.permutation(N)
    n_train = max(int(round(0.8 * N)), 1)
    tr, te = perm[:n_train], perm[n_train:]
    if te.size == 0:
        raise BadConfigError("not enough points for a held-out split",
                             n_points=N)

    bic = np.empty(candidates.size)
    mae = np.empty(candidates.size)
    fits: dict[int, StaticFitResult] = {}
    for i, k in enumerate(candidates):
        fit = fit_static(x[tr], y[tr], int(k), sigma_diagonal=sigma_diagonal,
                         seed=int(rng.integers(0, 2**31 - 1)), **fit_kwargs)
        p = count_static_parameters(int(k), y.shape[1], x.shape[1],
                                    sigma_diagonal)
        bic[i] = -2.0 * fit.loglik + p * np.log(tr.size)
        x_hat, _ = predict_inverse(fit.theta, y[te])
        mae[i] = float(np.mean(np.abs(x_hat - x[te])))
        fits[int(k)] = fit

    scores = bic if criterion == "bic" else mae
    best_k = int(candidates[int(np.argmin(scores))])
    fits[best_k] = fit_static(x, y, best_k, sigma_diagonal=sigma_diagonal,
                              seed=int(rng.integers(0, 2**31 - 1)),
                              **fit_kwargs)
    return SelectKResult(best_k=best_k, candidates=candidates, bic=bic,
                         mae=mae, criterion=criterion, fits=fits)

"""Parameter containers, validation, and model-file serialization.

A model is a pair (theta, phi): theta holds the per-mode observation and
initial-state parameters, phi the per-mode dynamics and the mode transition
matrix.  `tau[i, j] = p(z_t = i | z_{t-1} = j)`, so each *column* of tau is
a distribution over successor modes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg as sla

from .errors import InvalidModelError
from .linalg import (LOG_2PI, chol_spd, inv_spd, logdet_spd, solve_spd,
                     symmetrize)

MODEL_FILE_VERSION = 1

SIMPLEX_TOL = 1e-8
SYMMETRY_TOL = 1e-8
RANK_TOL = 1e-10


@dataclass
class StaticParams:
    """Per-mode observation maps and initial-state distributions.

    A: (K, D, L) observation matrices, b: (K, D) offsets, Sigma: (K, D, D)
    observation noise covariances, pi: (K,) initial mode probabilities,
    gamma: (K, L) initial state means, Gamma: (K, L, L) initial state
    covariances.  `sigma_diagonal` marks Sigma as structurally diagonal so
    storage and likelihood evaluations can stay O(D).
    """

    A: np.ndarray
    b: np.ndarray
    Sigma: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    Gamma: np.ndarray
    sigma_diagonal: bool = False

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim == 2:
            self.A = self.A[None]
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        self.Sigma = np.asarray(self.Sigma, dtype=float)
        if self.sigma_diagonal and self.Sigma.ndim == 2:
            full = np.zeros(self.Sigma.shape + (self.Sigma.shape[1],))
            for k in range(self.Sigma.shape[0]):
                np.fill_diagonal(full[k], self.Sigma[k])
            self.Sigma = full
        elif self.Sigma.ndim == 2:
            self.Sigma = self.Sigma[None]
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        self.Gamma = np.asarray(self.Gamma, dtype=float)
        if self.Gamma.ndim == 2:
            self.Gamma = self.Gamma[None]

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def D(self) -> int:
        return self.A.shape[1]

    @property
    def L(self) -> int:
        return self.A.shape[2]

    def sigma_diag(self) -> np.ndarray:
        return np.diagonal(self.Sigma, axis1=1, axis2=2).copy()

    def copy(self) -> "StaticParams":
        return StaticParams(self.A.copy(), self.b.copy(), self.Sigma.copy(),
                            self.pi.copy(), self.gamma.copy(), self.Gamma.copy(),
                            self.sigma_diagonal)


@dataclass
class DynamicParams:
    """Per-mode linear dynamics and the column-stochastic transition matrix."""

    C: np.ndarray    # (K, L, L)
    Q: np.ndarray    # (K, L, L)
    tau: np.ndarray  # (K, K), tau[i, j] = p(z_t = i | z_{t-1} = j)

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        if self.C.ndim == 2:
            self.C = self.C[None]
        self.Q = np.asarray(self.Q, dtype=float)
        if self.Q.ndim == 2:
            self.Q = self.Q[None]
        self.tau = np.atleast_2d(np.asarray(self.tau, dtype=float))

    @property
    def K(self) -> int:
        return self.C.shape[0]

    @property
    def L(self) -> int:
        return self.C.shape[1]

    def copy(self) -> "DynamicParams":
        return DynamicParams(self.C.copy(), self.Q.copy(), self.tau.copy())


@dataclass
class Violation:
    code: str
    message: str
    where: str = ""


def _check_spd(mat: np.ndarray, code: str, where: str, out: list[Violation]):
    if not np.all(np.isfinite(mat)):
        out.append(Violation("NONFINITE_VALUE", "matrix has non-finite entries", where))
        return
    scale = max(float(np.abs(mat).max()), 1.0)
    if np.abs(mat - mat.T).max() > SYMMETRY_TOL * scale:
        out.append(Violation(code, "matrix is not symmetric", where))
        return
    try:
        np.linalg.cholesky(0.5 * (mat + mat.T) + RANK_TOL * scale * np.eye(mat.shape[0]))
    except np.linalg.LinAlgError:
        out.append(Violation(code, "matrix is not positive definite", where))


def validate(theta: StaticParams, phi: DynamicParams) -> list[Violation]:
    """Structural and numerical checks on a model.  Reports, never raises."""
    out: list[Violation] = []
    K, D, L = theta.K, theta.D, theta.L

    shapes = {
        "theta.A": (theta.A, (K, D, L)),
        "theta.b": (theta.b, (K, D)),
        "theta.Sigma": (theta.Sigma, (K, D, D)),
        "theta.pi": (theta.pi, (K,)),
        "theta.gamma": (theta.gamma, (K, L)),
        "theta.Gamma": (theta.Gamma, (K, L, L)),
        "phi.C": (phi.C, (K, L, L)),
        "phi.Q": (phi.Q, (K, L, L)),
        "phi.tau": (phi.tau, (K, K)),
    }
    for where, (arr, want) in shapes.items():
        if arr.shape != want:
            out.append(Violation("SHAPE_MISMATCH",
                                 f"expected shape {want}, got {arr.shape}", where))
    if out:
        return out

    for name, arr in [("theta", theta), ("phi", phi)]:
        for fname in ("A", "b", "pi", "gamma") if name == "theta" else ("C", "tau"):
            if not np.all(np.isfinite(getattr(arr, fname))):
                out.append(Violation("NONFINITE_VALUE", "non-finite entries",
                                     f"{name}.{fname}"))

    if np.any(theta.pi < -1e-12) or abs(theta.pi.sum() - 1.0) > SIMPLEX_TOL:
        out.append(Violation("PI_NOT_SIMPLEX",
                             f"pi sums to {theta.pi.sum():.12g}", "theta.pi"))

    if np.any(phi.tau < -1e-12) or np.any(phi.tau > 1.0 + 1e-12):
        out.append(Violation("TAU_ENTRY_RANGE", "entries outside [0, 1]", "phi.tau"))
    col_sums = phi.tau.sum(axis=0)
    bad = np.where(np.abs(col_sums - 1.0) > SIMPLEX_TOL)[0]
    for j in bad:
        out.append(Violation("TAU_COLUMN_STOCHASTIC",
                             f"column {j} sums to {col_sums[j]:.12g}", "phi.tau"))

    for k in range(K):
        _check_spd(theta.Sigma[k], "SIGMA_NOT_SPD", f"theta.Sigma[{k}]", out)
        _check_spd(theta.Gamma[k], "GAMMA_NOT_SPD", f"theta.Gamma[{k}]", out)
        _check_spd(phi.Q[k], "Q_NOT_SPD", f"phi.Q[{k}]", out)
        if np.all(np.isfinite(phi.C[k])):
            smin = np.linalg.svd(phi.C[k], compute_uv=False)[-1]
            if smin < RANK_TOL:
                out.append(Violation("C_RANK_DEFICIENT",
                                     f"smallest singular value {smin:.3g}", f"phi.C[{k}]"))
        if theta.sigma_diagonal:
            off = theta.Sigma[k] - np.diag(np.diag(theta.Sigma[k]))
            if np.abs(off).max() > 0:
                out.append(Violation("SIGMA_NOT_DIAGONAL",
                                     "sigma_diagonal set but Sigma has off-diagonal mass",
                                     f"theta.Sigma[{k}]"))
    return out


def require_valid(theta: StaticParams, phi: DynamicParams):
    report = validate(theta, phi)
    if report:
        raise InvalidModelError(report)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(theta: StaticParams, phi: DynamicParams) -> dict:
    sigma = theta.sigma_diag() if theta.sigma_diagonal else theta.Sigma
    return {
        "version": MODEL_FILE_VERSION,
        "K": theta.K,
        "D": theta.D,
        "L": theta.L,
        "sigma_diagonal": bool(theta.sigma_diagonal),
        "theta": {
            "A": theta.A.tolist(),
            "b": theta.b.tolist(),
            "Sigma": sigma.tolist(),
            "pi": theta.pi.tolist(),
            "gamma": theta.gamma.tolist(),
            "Gamma": theta.Gamma.tolist(),
        },
        "phi": {
            "C": phi.C.tolist(),
            "Q": phi.Q.tolist(),
            "tau": phi.tau.tolist(),
        },
    }


def model_from_dict(payload: dict) -> tuple[StaticParams, DynamicParams]:
    theta = StaticParams(
        A=payload["theta"]["A"],
        b=payload["theta"]["b"],
        Sigma=np.asarray(payload["theta"]["Sigma"], dtype=float),
        pi=payload["theta"]["pi"],
        gamma=payload["theta"]["gamma"],
        Gamma=payload["theta"]["Gamma"],
        sigma_diagonal=bool(payload.get("sigma_diagonal", False)),
    )
    phi = DynamicParams(C=payload["phi"]["C"], Q=payload["phi"]["Q"],
                        tau=payload["phi"]["tau"])
    return theta, phi


def save_model(path, theta: StaticParams, phi: DynamicParams):
    Path(path).write_text(json.dumps(model_to_dict(theta, phi), indent=1) + "\n")


def load_model(path) -> tuple[StaticParams, DynamicParams]:
    return model_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# default dynamics initialization


def bhattacharyya_distance(mean_a, cov_a, mean_b, cov_b) -> float:
    blend = 0.5 * (cov_a + cov_b)
    diff = np.asarray(mean_a, float) - np.asarray(mean_b, float)
    quad = 0.125 * diff @ solve_spd(blend, diff)
    return float(quad + 0.5 * (logdet_spd(blend)
                               - 0.5 * (logdet_spd(cov_a) + logdet_spd(cov_b))))


def default_dynamics(theta: StaticParams) -> DynamicParams:
    """Identity dynamics with a transition matrix seeded from the overlap of
    the initial-state Gaussians: tau[i, j] proportional to exp(-d_B(i, j)),
    columns normalized."""
    K, L = theta.K, theta.L
    eye = np.broadcast_to(np.eye(L), (K, L, L)).copy()
    dist = np.zeros((K, K))
    for i in range(K):
        for j in range(K):
            if i != j:
                dist[i, j] = bhattacharyya_distance(theta.gamma[i], theta.Gamma[i],
                                                    theta.gamma[j], theta.Gamma[j])
    tau = np.exp(-dist)
    tau = tau / tau.sum(axis=0, keepdims=True)
    return DynamicParams(C=eye.copy(), Q=eye.copy(), tau=tau)


# ---------------------------------------------------------------------------
# per-mode factor caches


class ObservationCache:
    """Per-mode observation factors reused across time steps.

    Holds A^T Sigma^{-1} A, A^T Sigma^{-1}, log|Sigma| and the pieces needed
    to evaluate observation log-densities without refactorizing, for both
    diagonal and full Sigma.
    """

    def __init__(self, theta: StaticParams):
        K, D, L = theta.K, theta.D, theta.L
        self.theta = theta
        self.AtSinv = np.empty((K, L, D))
        self.AtSinvA = np.empty((K, L, L))
        self.logdet_Sigma = np.empty(K)
        self.diagonal = theta.sigma_diagonal
        if self.diagonal:
            self.sig = theta.sigma_diag()
            self.sig_inv = 1.0 / self.sig
            for k in range(K):
                self.AtSinv[k] = theta.A[k].T * self.sig_inv[k]
                self.AtSinvA[k] = self.AtSinv[k] @ theta.A[k]
                self.logdet_Sigma[k] = float(np.sum(np.log(self.sig[k])))
            self.chol = None
        else:
            self.chol = np.empty((K, D, D))
            for k in range(K):
                root = chol_spd(theta.Sigma[k], f"theta.Sigma[{k}]")
                self.chol[k] = root
                half = sla.solve_triangular(root, theta.A[k], lower=True)
                self.AtSinvA[k] = half.T @ half
                self.AtSinv[k] = sla.cho_solve((root, True), theta.A[k]).T
                self.logdet_Sigma[k] = 2.0 * float(np.sum(np.log(np.diag(root))))

    def info_vec(self, k: int, y: np.ndarray) -> np.ndarray:
        """A_k^T Sigma_k^{-1} (y - b_k)."""
        return self.AtSinv[k] @ (y - self.theta.b[k])

    def loglik_all(self, y: np.ndarray, obs_means: np.ndarray) -> np.ndarray:
        """log N(y; obs_means[k], Sigma_k) for every mode k."""
        K, D = self.theta.K, self.theta.D
        res = y[None, :] - obs_means
        out = np.empty(K)
        if self.diagonal:
            quads = np.sum(res * res * self.sig_inv, axis=1)
        else:
            quads = np.empty(K)
            for k in range(K):
                white = sla.solve_triangular(self.chol[k], res[k], lower=True)
                quads[k] = white @ white
        out[:] = -0.5 * (D * np.log(2.0 * np.pi) + self.logdet_Sigma + quads)
        return out


def residual_quad(obs: "ObservationCache", k: int, d: np.ndarray) -> float:
    """d^T Sigma_k^{-1} d without forming Sigma_k^{-1}."""
    if obs.diagonal:
        return float(np.sum(d * d * obs.sig_inv[k]))
    white = sla.solve_triangular(obs.chol[k], d, lower=True)
    return float(white @ white)


def conditioned_update(obs: "ObservationCache", k: int, y: np.ndarray,
                       prior_mean: np.ndarray, prior_prec: np.ndarray,
                       prior_logdet: float):
    """Condition a Gaussian state prior on one observation under mode k.

    Returns (mean, cov, log_evidence) where log_evidence is
    log N(y; A_k prior_mean + b_k, Sigma_k + A_k prior_cov A_k^T), evaluated
    through the matrix determinant lemma and the Woodbury identity so only
    L x L systems are factorized even when D is large.
    """
    theta = obs.theta
    D = theta.D
    post_prec = symmetrize(obs.AtSinvA[k] + prior_prec)
    post_cov = inv_spd(post_prec, name="posterior precision")
    post_mean = post_cov @ (obs.info_vec(k, y) + prior_prec @ prior_mean)

    d = y - theta.A[k] @ prior_mean - theta.b[k]
    info_d = obs.AtSinv[k] @ d
    quad = residual_quad(obs, k, d) - info_d @ solve_spd(
        post_prec, info_d, name="posterior precision")
    logdet_innov = (obs.logdet_Sigma[k] + prior_logdet
                    + logdet_spd(post_prec, name="posterior precision"))
    log_evidence = -0.5 * (D * LOG_2PI + logdet_innov + quad)
    return post_mean, post_cov, log_evidence


class DynamicsCache:
    """Per-mode dynamics factors: Q^{-1}, Q^{-1} C, C^T Q^{-1} C, log|Q|."""

    def __init__(self, phi: DynamicParams):
        K, L = phi.K, phi.L
        self.phi = phi
        self.Qinv = np.empty((K, L, L))
        self.QinvC = np.empty((K, L, L))
        self.CtQinvC = np.empty((K, L, L))
        self.logdet_Q = np.empty(K)
        self.chol_Q = np.empty((K, L, L))
        for k in range(K):
            root = chol_spd(phi.Q[k], f"phi.Q[{k}]")
            self.chol_Q[k] = root
            self.Qinv[k] = sla.cho_solve((root, True), np.eye(L))
            self.Qinv[k] = 0.5 * (self.Qinv[k] + self.Qinv[k].T)
            self.QinvC[k] = sla.cho_solve((root, True), phi.C[k])
            half = sla.solve_triangular(root, phi.C[k], lower=True)
            self.CtQinvC[k] = half.T @ half
            self.logdet_Q[k] = 2.0 * float(np.sum(np.log(np.diag(root))))


class InitialStateCache:
    """Per-mode initial-state factors: Gamma^{-1}, Gamma^{-1} gamma, log|Gamma|."""

    def __init__(self, theta: StaticParams):
        K, L = theta.K, theta.L
        self.Ginv = np.empty((K, L, L))
        self.Ginv_gamma = np.empty((K, L))
        self.logdet_Gamma = np.empty(K)
        for k in range(K):
            root = chol_spd(theta.Gamma[k], f"theta.Gamma[{k}]")
            self.Ginv[k] = sla.cho_solve((root, True), np.eye(L))
            self.Ginv[k] = 0.5 * (self.Ginv[k] + self.Ginv[k].T)
            self.Ginv_gamma[k] = self.Ginv[k] @ theta.gamma[k]
            self.logdet_Gamma[k] = 2.0 * float(np.sum(np.log(np.diag(root))))

"""Shared fixtures and random-model builders for the test suite."""

import numpy as np
import pytest

from plds import DynamicParams, StaticParams, require_valid


def random_spd(rng, d, scale=1.0):
    M = rng.standard_normal((d, d))
    return scale * (M @ M.T / d + np.eye(d))


def random_model(rng, K=2, D=2, L=2, separation=2.0, stable=0.8,
                 tau_dwell=0.85):
    """Unstructured valid model; every matrix is generic (no identities)."""
    A = rng.standard_normal((K, D, L)) / np.sqrt(L)
    b = rng.standard_normal((K, D)) * 0.3
    Sigma = np.stack([random_spd(rng, D, 0.5) for _ in range(K)])
    pi = rng.uniform(0.5, 1.5, K)
    pi /= pi.sum()
    gamma = separation * rng.standard_normal((K, L))
    Gamma = np.stack([random_spd(rng, L, 0.8) for _ in range(K)])

    C = np.empty((K, L, L))
    for k in range(K):
        M = rng.standard_normal((L, L))
        sv = np.linalg.svd(M, compute_uv=False)
        C[k] = M / sv[0] * stable
        # keep the smallest singular value away from zero
        u, s, vt = np.linalg.svd(C[k])
        s = np.maximum(s, 0.1)
        C[k] = u @ np.diag(s) @ vt
    Q = np.stack([random_spd(rng, L, 0.2) for _ in range(K)])
    tau = np.full((K, K), (1 - tau_dwell) / max(K - 1, 1))
    np.fill_diagonal(tau, tau_dwell if K > 1 else 1.0)
    tau += rng.uniform(0, 0.05, (K, K))
    tau /= tau.sum(axis=0, keepdims=True)

    theta = StaticParams(A=A, b=b, Sigma=Sigma, pi=pi, gamma=gamma,
                         Gamma=Gamma)
    phi = DynamicParams(C=C, Q=Q, tau=tau)
    require_valid(theta, phi)
    return theta, phi


def scalar_model(rng, K=2, separation=3.0, sigma=0.3, q=0.15, dwell=0.9):
    """L = D = 1 model for the quadrature oracle."""
    A = rng.uniform(0.6, 1.4, (K, 1, 1)) * np.sign(rng.standard_normal((K, 1, 1)))
    b = rng.standard_normal((K, 1)) * 0.5
    Sigma = np.full((K, 1, 1), sigma ** 2) * rng.uniform(0.6, 1.4, (K, 1, 1))
    pi = np.full(K, 1.0 / K)
    offsets = separation * (np.arange(K) - (K - 1) / 2)
    gamma = offsets.reshape(K, 1) + 0.2 * rng.standard_normal((K, 1))
    Gamma = np.full((K, 1, 1), 0.5) * rng.uniform(0.6, 1.4, (K, 1, 1))
    C = rng.uniform(0.5, 0.95, (K, 1, 1))
    Q = np.full((K, 1, 1), q ** 2) * rng.uniform(0.6, 1.4, (K, 1, 1))
    tau = np.full((K, K), (1 - dwell) / max(K - 1, 1))
    np.fill_diagonal(tau, dwell if K > 1 else 1.0)

    theta = StaticParams(A=A, b=b, Sigma=Sigma, pi=pi, gamma=gamma,
                         Gamma=Gamma)
    phi = DynamicParams(C=C, Q=Q, tau=tau)
    require_valid(theta, phi)
    return theta, phi


def identical_mode_model(rng, K=2, D=2, L=2):
    """K copies of one component, uniform initial and transition laws."""
    theta, phi = random_model(rng, K=1, D=D, L=L)
    rep = lambda M: np.repeat(M, K, axis=0)
    theta_k = StaticParams(A=rep(theta.A), b=rep(theta.b),
                           Sigma=rep(theta.Sigma), pi=np.full(K, 1.0 / K),
                           gamma=rep(theta.gamma), Gamma=rep(theta.Gamma))
    phi_k = DynamicParams(C=rep(phi.C), Q=rep(phi.Q),
                          tau=np.full((K, K), 1.0 / K))
    return theta_k, phi_k


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

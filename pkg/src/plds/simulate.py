"""Generative-model operations: sampling and complete-data log-likelihood."""

from __future__ import annotations

import numpy as np

from .errors import MissingLatentsError
from .linalg import chol_spd, mvn_logpdf
from .params import (DynamicParams, StaticParams, default_dynamics,
                     require_valid)
from .rng import make_rng
from .sequences import Sequence, TrainingSet


def sample_sequence(theta: StaticParams, phi: DynamicParams, T: int,
                    rng=None) -> Sequence:
    """Draw one trajectory of length T; latents are kept on the Sequence.

    `rng` may be a Generator, an int seed, or None.  The same seed yields a
    bitwise-identical sequence.
    """
    require_valid(theta, phi)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = make_rng(rng)
    K, D, L = theta.K, theta.D, theta.L

    chol_Gamma = np.stack([chol_spd(theta.Gamma[k]) for k in range(K)])
    chol_Q = np.stack([chol_spd(phi.Q[k]) for k in range(K)])
    chol_Sigma = np.stack([chol_spd(theta.Sigma[k]) for k in range(K)])

    x = np.empty((T, L))
    y = np.empty((T, D))
    z = np.empty(T, dtype=int)

    z[0] = gen.choice(K, p=theta.pi)
    x[0] = theta.gamma[z[0]] + chol_Gamma[z[0]] @ gen.standard_normal(L)
    for t in range(1, T):
        z[t] = gen.choice(K, p=phi.tau[:, z[t - 1]])
        x[t] = phi.C[z[t]] @ x[t - 1] + chol_Q[z[t]] @ gen.standard_normal(L)
    for t in range(T):
        k = z[t]
        y[t] = theta.A[k] @ x[t] + theta.b[k] + chol_Sigma[k] @ gen.standard_normal(D)

    return Sequence(y=y, x=x, z=z + 1, seed=seed)


def sample_static_pairs(theta: StaticParams, n: int, rng=None) -> TrainingSet:
    """Draw n i.i.d. (x, y) pairs from the no-dynamics mixture.

    Each pair picks a mode from pi, a latent from that mode's initial-state
    Gaussian, and an observation through the mode's affine map.
    """
    require_valid(theta, default_dynamics(theta))
    gen = make_rng(rng)
    K, D, L = theta.K, theta.D, theta.L

    chol_Gamma = np.stack([chol_spd(theta.Gamma[k]) for k in range(K)])
    chol_Sigma = np.stack([chol_spd(theta.Sigma[k]) for k in range(K)])

    z = gen.choice(K, size=n, p=theta.pi)
    x = np.empty((n, L))
    y = np.empty((n, D))
    for i in range(n):
        k = z[i]
        x[i] = theta.gamma[k] + chol_Gamma[k] @ gen.standard_normal(L)
        y[i] = theta.A[k] @ x[i] + theta.b[k] + chol_Sigma[k] @ gen.standard_normal(D)
    return TrainingSet(x=x, y=y, z=z + 1)


def complete_log_likelihood(theta: StaticParams, phi: DynamicParams,
                            seq: Sequence) -> float:
    """log p(y, x, z) for a fully observed trajectory."""
    if seq.x is None or seq.z is None:
        raise MissingLatentsError("complete-data likelihood needs x and z")
    require_valid(theta, phi)
    z = np.asarray(seq.z, dtype=int) - 1
    x, y = seq.x, seq.y

    with np.errstate(divide="ignore"):
        total = float(np.log(theta.pi[z[0]]))
    total += mvn_logpdf(x[0], theta.gamma[z[0]], theta.Gamma[z[0]])
    for t in range(1, seq.T):
        k = z[t]
        with np.errstate(divide="ignore"):
            total += float(np.log(phi.tau[k, z[t - 1]]))
        total += mvn_logpdf(x[t], phi.C[k] @ x[t - 1], phi.Q[k])
    for t in range(seq.T):
        k = z[t]
        total += mvn_logpdf(y[t], theta.A[k] @ x[t] + theta.b[k], theta.Sigma[k])
    return total

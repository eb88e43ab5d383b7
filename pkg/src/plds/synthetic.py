"""Synthetic model generators and corruption utilities for benchmarks.

The generator builds a valid random model from a compact spec: initial-state
means spread along coordinate axes, random stable per-mode dynamics, and a
dwell-biased mode chain.  All draws go through the splittable RNG so a seed
pins the whole dataset.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import BadConfigError
from .params import DynamicParams, StaticParams, require_valid
from .rng import make_rng, spawn_rngs
from .sequences import Sequence
from .simulate import sample_sequence


@dataclass
class GeneratorSpec:
    """Compact description of a random benchmark model."""

    n_modes: int = 2
    obs_dim: int = 4
    latent_dim: int = 2
    separation: float = 3.0
    sigma_scale: float = 0.5
    q_scale: float = 0.1
    dwell: float = 0.95
    covariance_type: str = "full"    # "full" | "diagonal"
    stable_radius: float = 0.9

    def __post_init__(self):
        if self.covariance_type not in ("full", "diagonal"):
            raise BadConfigError("covariance_type must be full or diagonal",
                                 covariance_type=self.covariance_type)
        if not (0.0 < self.dwell <= 1.0):
            raise BadConfigError("dwell must lie in (0, 1]", dwell=self.dwell)
        if self.separation == 0.0:
            warnings.warn("SEPARATION_ZERO: modes share one initial-state "
                          "mean and may be unidentifiable")

    @classmethod
    def from_dict(cls, payload: dict) -> "GeneratorSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise BadConfigError("unknown generator keys", keys=sorted(unknown))
        return cls(**payload)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _stable_matrix(L: int, radius: float, rng) -> np.ndarray:
    """Random full-rank matrix with spectral radius at most `radius`."""
    while True:
        raw = rng.standard_normal((L, L)) / np.sqrt(L)
        spectral = float(np.max(np.abs(np.linalg.eigvals(raw))))
        if spectral < 1e-8:
            continue
        out = raw * (radius * rng.uniform(0.6, 1.0) / spectral)
        if np.linalg.svd(out, compute_uv=False)[-1] > 1e-8:
            return out


def _full_noise(D: int, scale: float, rng) -> np.ndarray:
    raw = rng.standard_normal((D, D))
    gram = raw @ raw.T / D
    gram *= D / np.trace(gram)
    return scale**2 * (0.8 * np.eye(D) + 0.2 * gram)


def make_model(spec: GeneratorSpec, seed=None):
    """Draw (theta, phi) from the generator spec; always valid."""
    rng = make_rng(seed)
    K, D, L = spec.n_modes, spec.obs_dim, spec.latent_dim
    diagonal = spec.covariance_type == "diagonal"

    gamma = np.zeros((K, L))
    for k in range(K):
        axis = k % L
        ring = k // L
        gamma[k, axis] = spec.separation * (1 + ring) * (-1.0) ** ring
    Gamma = np.broadcast_to(np.eye(L), (K, L, L)).copy()

    A = rng.standard_normal((K, D, L)) / np.sqrt(L)
    b = 0.5 * rng.standard_normal((K, D))
    if diagonal:
        Sigma = spec.sigma_scale**2 * rng.uniform(0.5, 1.5, size=(K, D))
    else:
        Sigma = np.stack([_full_noise(D, spec.sigma_scale, rng)
                          for _ in range(K)])

    C = np.stack([_stable_matrix(L, spec.stable_radius, rng)
                  for _ in range(K)])
    Q = spec.q_scale**2 * np.broadcast_to(np.eye(L), (K, L, L)).copy()

    if K == 1:
        tau = np.ones((1, 1))
    else:
        off = (1.0 - spec.dwell) / (K - 1)
        tau = np.full((K, K), off)
        np.fill_diagonal(tau, spec.dwell)

    theta = StaticParams(A=A, b=b, Sigma=Sigma, pi=np.full(K, 1.0 / K),
                         gamma=gamma, Gamma=Gamma, sigma_diagonal=diagonal)
    phi = DynamicParams(C=C, Q=Q, tau=tau)
    require_valid(theta, phi)
    return theta, phi


def make_dataset(spec: GeneratorSpec, T: int, n_sequences: int = 1,
                 seed=None):
    """One model plus `n_sequences` sequences sampled from it.

    Returns (theta, phi, sequences); sequence i uses the i-th spawned
    stream, so datasets are reproducible element by element.
    """
    model_rng, *seq_rngs = spawn_rngs(seed, n_sequences + 1)
    theta, phi = make_model(spec, model_rng)
    seqs = [sample_sequence(theta, phi, T, rng) for rng in seq_rngs]
    return theta, phi, seqs


def corrupt_with_outliers(y: np.ndarray, fraction: float, scale: float,
                          rng=None):
    """Additive gross outliers on a random subset of steps.

    Returns (corrupted copy, boolean mask of affected steps).  `fraction`
    of the rows (rounded) receive additive noise with the given scale.
    """
    if not (0.0 <= fraction <= 1.0):
        raise BadConfigError("fraction must lie in [0, 1]", fraction=fraction)
    rng = make_rng(rng)
    y = np.array(np.atleast_2d(np.asarray(y, float)))
    T = y.shape[0]
    n_out = int(round(fraction * T))
    mask = np.zeros(T, dtype=bool)
    if n_out > 0:
        hit = rng.choice(T, size=n_out, replace=False)
        mask[hit] = True
        y[hit] += scale * rng.standard_normal((n_out, y.shape[1]))
    return y, mask


def corrupt_sequence(seq: Sequence, fraction: float, scale: float, rng=None):
    """Sequence wrapper around corrupt_with_outliers; keeps ground truth."""
    y, mask = corrupt_with_outliers(seq.y, fraction, scale, rng)
    return Sequence(y=y, x=seq.x, z=seq.z, seed=seq.seed), mask

"""Gaussian and Gaussian-mixture containers plus exact moment matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionMismatchError, EmptyMixtureError, ValidationFailure
from .linalg import chol_spd, ensure_spd, mvn_logpdf


@dataclass
class Gaussian:
    """Mean/covariance pair.

    The covariance is symmetrized on construction and jittered only if its
    smallest eigenvalue has collapsed, so downstream factorizations hold.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (self.mean.size, self.mean.size):
            raise DimensionMismatchError("covariance shape does not match mean",
                                         mean=self.mean.shape, cov=cov.shape)
        self.cov = ensure_spd(cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> float:
        return mvn_logpdf(np.atleast_1d(np.asarray(x, float)), self.mean, self.cov)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        root = chol_spd(self.cov)
        if size is None:
            return self.mean + root @ rng.standard_normal(self.dim)
        return self.mean + rng.standard_normal((size, self.dim)) @ root.T


@dataclass
class GaussianMixture:
    """Finite Gaussian mixture with weights on the simplex."""

    weights: np.ndarray   # (m,)
    means: np.ndarray     # (m, d)
    covs: np.ndarray      # (m, d, d)

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covs = np.asarray(self.covs, dtype=float)
        if self.covs.ndim == 2:
            self.covs = self.covs[None]
        m = self.weights.size
        if m == 0:
            raise EmptyMixtureError("mixture has no components")
        d = self.means.shape[1]
        if self.means.shape[0] != m or self.covs.shape != (m, d, d):
            raise DimensionMismatchError("mixture fields disagree",
                                         weights=m, means=self.means.shape,
                                         covs=self.covs.shape)
        if np.any(self.weights < -1e-12) or abs(self.weights.sum() - 1.0) > 1e-8:
            raise ValidationFailure("mixture weights are not on the simplex",
                                    total=float(self.weights.sum()))
        self.weights = np.clip(self.weights, 0.0, None)
        self.weights = self.weights / self.weights.sum()

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        return collapse_moments(self.weights, self.means, self.covs)[1]

    def logpdf(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, float))
        parts = [np.log(w) + mvn_logpdf(x, mu, cv) if w > 0 else -np.inf
                 for w, mu, cv in zip(self.weights, self.means, self.covs)]
        return float(logsumexp(parts))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        labels = rng.choice(self.n_components, size=size, p=self.weights)
        out = np.empty((size, self.dim))
        for k in range(self.n_components):
            rows = labels == k
            if rows.any():
                out[rows] = Gaussian(self.means[k], self.covs[k]).sample(rng, int(rows.sum()))
        return out


def collapse_moments(weights: np.ndarray, means: np.ndarray,
                     covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First two moments of a mixture given as raw arrays.

    Used directly by hot loops; `moment_match` wraps it with typed
    containers.  Means enter through the law of total covariance, so the
    output covariance is exact (no sampling, no approximation).
    """
    weights = np.asarray(weights, float)
    mean = weights @ means
    centered = means - mean
    cov = np.einsum("k,kij->ij", weights, covs)
    cov = cov + np.einsum("k,ki,kj->ij", weights, centered, centered)
    return mean, 0.5 * (cov + cov.T)


def moment_match(mixture: GaussianMixture) -> Gaussian:
    """Single Gaussian with the mixture's exact first two moments."""
    mean, cov = collapse_moments(mixture.weights, mixture.means, mixture.covs)
    return Gaussian(mean, cov)

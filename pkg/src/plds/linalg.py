"""Dense linear-algebra helpers shared across the package.

Everything here works on plain float64 arrays.  Inverses are avoided in
favour of Cholesky solves; the only places a matrix inverse is formed are
where a full covariance block is itself the requested output.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import SingularMatrixError

LOG_2PI = float(np.log(2.0 * np.pi))

# Construction-time SPD policy: symmetrize, then add scaled jitter only if
# the smallest eigenvalue has collapsed below EIG_FLOOR.
EIG_FLOOR = 1e-10
JITTER_SCALE = 1e-9


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.swapaxes(-1, -2))


def ensure_spd(mat: np.ndarray) -> np.ndarray:
    """Symmetrized copy of a square matrix, jittered if its spectrum dips
    below the floor."""
    sym = symmetrize(np.asarray(mat, dtype=float))
    low = float(np.linalg.eigvalsh(sym)[0])
    if low < EIG_FLOOR:
        d = sym.shape[0]
        eps = JITTER_SCALE * max(abs(float(np.trace(sym))), d * EIG_FLOOR) / d
        sym = sym + (eps - min(low, 0.0)) * np.eye(d)
    return sym


def chol_spd(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter before giving up."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    d = mat.shape[0]
    sym = 0.5 * (mat + mat.T)
    scale = max(abs(float(np.trace(sym))) / d, 1e-30)
    jitter = 1e-13 * scale
    while jitter <= 1e-4 * scale:
        try:
            return np.linalg.cholesky(sym + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise SingularMatrixError("Cholesky factorization failed", name=name)


def solve_spd(mat: np.ndarray, rhs: np.ndarray, name: str = "matrix") -> np.ndarray:
    return sla.cho_solve((chol_spd(mat, name), True), rhs)


def inv_spd(mat: np.ndarray, name: str = "matrix") -> np.ndarray:
    out = sla.cho_solve((chol_spd(mat, name), True), np.eye(mat.shape[0]))
    return 0.5 * (out + out.T)


def logdet_spd(mat: np.ndarray, name: str = "matrix") -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol_spd(mat, name)))))


def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray,
               name: str = "covariance") -> float:
    """Log-density of N(mean, cov) at x (full covariance)."""
    root = chol_spd(cov, name)
    white = sla.solve_triangular(root, np.asarray(x, float) - mean, lower=True)
    return float(-0.5 * (x.size * LOG_2PI + white @ white) - np.sum(np.log(np.diag(root))))


def mvn_logpdf_diag(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> float:
    res = np.asarray(x, float) - mean
    return float(-0.5 * (x.size * LOG_2PI + np.sum(np.log(var)) + np.sum(res * res / var)))


def quad_form_inv(mat: np.ndarray, vecs: np.ndarray, name: str = "matrix") -> np.ndarray:
    """vecs^T mat^{-1} vecs via triangular solves (vecs may be a matrix)."""
    root = chol_spd(mat, name)
    half = sla.solve_triangular(root, vecs, lower=True)
    return half.T @ half


def vech(mat: np.ndarray) -> np.ndarray:
    """Stack the lower triangle of a square matrix column by column."""
    d = mat.shape[0]
    return np.concatenate([mat[r:, r] for r in range(d)])


def unvech(vec: np.ndarray, d: int) -> np.ndarray:
    """Inverse of `vech` assuming the original matrix was symmetric."""
    lower = np.zeros((d, d))
    pos = 0
    for r in range(d):
        n = d - r
        lower[r:, r] = vec[pos:pos + n]
        pos += n
    out = lower + lower.T
    out[np.diag_indices(d)] = np.diag(lower)
    return out

"""Sequence / training-set containers and their CSV schemas.

Sequence CSV: one row per time step, columns ``y_1..y_D`` and optionally
``x_1..x_L`` and ``z`` (1-based mode label).  Training CSV: one row per
pair, columns ``x_1..x_L, y_1..y_D``.  Posterior CSV: one row per step,
columns ``t, eta_1..eta_L, V_11..V_LL (vech), rho_1..rho_K``.

Floats are written with ``repr`` so every file round-trips losslessly
through the readers below.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, ValidationFailure
from .linalg import unvech, vech


@dataclass
class Sequence:
    """One observed trajectory; latent states/modes kept when known."""

    y: np.ndarray                  # (T, D)
    x: np.ndarray | None = None    # (T, L)
    z: np.ndarray | None = None    # (T,) mode labels in {1..K}
    seed: int | None = None

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x is not None:
            self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
            if self.x.shape[0] != self.y.shape[0]:
                raise DimensionMismatchError("x and y lengths differ",
                                             x=self.x.shape, y=self.y.shape)
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=int)
            if self.z.shape != (self.y.shape[0],):
                raise DimensionMismatchError("z length differs from y",
                                             z=self.z.shape, y=self.y.shape)

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def D(self) -> int:
        return self.y.shape[1]


@dataclass
class TrainingSet:
    """Paired (state, observation) rows for the static regression stage."""

    x: np.ndarray   # (N, L)
    y: np.ndarray   # (N, D)
    z: np.ndarray | None = None   # (N,) mode labels in {1..K}, when known

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionMismatchError("x and y row counts differ",
                                         x=self.x.shape, y=self.y.shape)
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=int)
            if self.z.shape != (self.x.shape[0],):
                raise DimensionMismatchError("z length differs from x",
                                             z=self.z.shape, x=self.x.shape)

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def L(self) -> int:
        return self.x.shape[1]

    @property
    def D(self) -> int:
        return self.y.shape[1]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_sequence_csv(path, seq: Sequence):
    header = [f"y_{j + 1}" for j in range(seq.D)]
    if seq.x is not None:
        header += [f"x_{j + 1}" for j in range(seq.x.shape[1])]
    if seq.z is not None:
        header += ["z"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(seq.T):
            row = [_fmt(v) for v in seq.y[t]]
            if seq.x is not None:
                row += [_fmt(v) for v in seq.x[t]]
            if seq.z is not None:
                row += [str(int(seq.z[t]))]
            writer.writerow(row)


def read_sequence_csv(path) -> Sequence:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y_")]
    x_cols = [i for i, name in enumerate(header) if name.startswith("x_")]
    z_cols = [i for i, name in enumerate(header) if name == "z"]
    if not y_cols:
        raise ValidationFailure("sequence file has no y_* columns", path=str(path))
    y = np.array([[float(row[i]) for i in y_cols] for row in rows])
    x = (np.array([[float(row[i]) for i in x_cols] for row in rows])
         if x_cols else None)
    z = (np.array([int(float(row[z_cols[0]])) for row in rows])
         if z_cols else None)
    return Sequence(y=y, x=x, z=z)


def write_training_csv(path, data: TrainingSet):
    header = ([f"x_{j + 1}" for j in range(data.L)]
              + [f"y_{j + 1}" for j in range(data.D)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for n in range(data.N):
            writer.writerow([_fmt(v) for v in data.x[n]]
                            + [_fmt(v) for v in data.y[n]])


def read_training_csv(path) -> TrainingSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    x_cols = [i for i, name in enumerate(header) if name.startswith("x_")]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y_")]
    if not x_cols or not y_cols:
        raise ValidationFailure("training file needs x_* and y_* columns",
                                path=str(path))
    x = np.array([[float(row[i]) for i in x_cols] for row in rows])
    y = np.array([[float(row[i]) for i in y_cols] for row in rows])
    return TrainingSet(x=x, y=y)


def _vech_names(L: int) -> list[str]:
    names = []
    for c in range(L):
        for r in range(c, L):
            names.append(f"V_{r + 1}{c + 1}")
    return names


def write_posterior_csv(path, mean: np.ndarray, cov: np.ndarray,
                        resp: np.ndarray, step_times_us=None):
    """State estimates per step: mean, vech of the covariance, mode weights,
    and optionally the per-step kernel wall time in microseconds."""
    mean = np.atleast_2d(np.asarray(mean, float))
    cov = np.asarray(cov, float)
    resp = np.atleast_2d(np.asarray(resp, float))
    T, L = mean.shape
    K = resp.shape[1]
    header = (["t"] + [f"eta_{j + 1}" for j in range(L)]
              + _vech_names(L) + [f"rho_{k + 1}" for k in range(K)])
    if step_times_us is not None:
        header += ["us_step"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(T):
            row = [str(t + 1)]
            row += [_fmt(v) for v in mean[t]]
            row += [_fmt(v) for v in vech(cov[t])]
            row += [_fmt(v) for v in resp[t]]
            if step_times_us is not None:
                row += [_fmt(step_times_us[t])]
            writer.writerow(row)


def read_posterior_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    eta_cols = [i for i, n in enumerate(header) if n.startswith("eta_")]
    v_cols = [i for i, n in enumerate(header) if n.startswith("V_")]
    rho_cols = [i for i, n in enumerate(header) if n.startswith("rho_")]
    L = len(eta_cols)
    mean = np.array([[float(row[i]) for i in eta_cols] for row in rows])
    cov = np.array([unvech(np.array([float(row[i]) for i in v_cols]), L)
                    for row in rows])
    resp = np.array([[float(row[i]) for i in rho_cols] for row in rows])
    return mean, cov, resp

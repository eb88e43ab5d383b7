"""Benchmark harness: run every tracker on shared sequences and report
pooled error metrics plus per-step kernel timings.

Timing policy: streaming methods clock each `step` call with a monotonic
nanosecond counter and report the mean; batch methods clock one full kernel
pass and divide by T.  IO, validation and cache construction sit outside
the clocked region.  When a worker pool is used for the estimate phase,
timing is measured in a separate serial pass so contention never skews the
clocked cells.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PLDSError, UnknownMethodError
from .gpb2 import GPB2FilterSession, gpb2_smooth
from .kalman import kalman_filter
from .metrics import mae, mode_accuracy, rmse, std_abs_error
from .params import DynamicParams, StaticParams
from .static_em import InversePredictor
from .variational import (VEMConfig, VariationalFilterSession,
                          variational_smooth)

METHOD_REGISTRY = ("static", "kalman", "gpb2-filter", "gpb2-smoother",
                   "var-filter", "var-smoother")

REPORT_COLUMNS = ("method", "mae", "std", "rmse", "mode_acc", "us_per_step")


@dataclass
class MethodRun:
    """Estimates of one method on one sequence, plus optional timing."""

    method: str
    mean: np.ndarray | None = None     # (T, L) state estimates
    modes: np.ndarray | None = None    # (T,) 1-based mode labels
    step_times_us: np.ndarray | None = None
    error: str | None = None

    @property
    def us_per_step(self) -> float:
        if self.step_times_us is None or self.step_times_us.size == 0:
            return float("nan")
        return float(np.mean(self.step_times_us))

    @property
    def failed(self) -> bool:
        return self.error is not None


def _run_streaming(make_session, y: np.ndarray, clock: bool):
    session = make_session()
    T = y.shape[0]
    means, resps = [], []
    times = np.empty(T) if clock else None
    for t in range(T):
        if clock:
            start = time.perf_counter_ns()
        m, _, r = session.step(y[t])
        if clock:
            times[t] = (time.perf_counter_ns() - start) / 1e3
        means.append(m)
        resps.append(r)
    return np.asarray(means), np.asarray(resps), times


def run_method(method: str, theta: StaticParams, phi: DynamicParams,
               y: np.ndarray, config: VEMConfig | None = None,
               clock: bool = True) -> MethodRun:
    """Run one registered method over one sequence.

    Any toolkit error is captured in the run's `error` field so a failing
    method never takes the rest of a comparison down with it.
    """
    if method not in METHOD_REGISTRY:
        raise UnknownMethodError("method not in registry", method=method,
                                 registry=",".join(METHOD_REGISTRY))
    config = config or VEMConfig()
    y = np.atleast_2d(np.asarray(y, float))
    T = y.shape[0]
    try:
        if method == "static":
            machine = InversePredictor(theta)
            if clock:
                times = np.empty(T)
                means = np.empty((T, theta.L))
                resps = np.empty((T, theta.K))
                for t in range(T):
                    start = time.perf_counter_ns()
                    mix = machine.posterior(y[t])
                    times[t] = (time.perf_counter_ns() - start) / 1e3
                    means[t] = mix.mean()
                    resps[t] = mix.weights
            else:
                means, resps = machine.point_estimates(y)
                times = None
            modes = np.argmax(resps, axis=1) + 1
        elif method == "kalman":
            start = time.perf_counter_ns()
            belief = kalman_filter(theta, phi, y)
            elapsed = (time.perf_counter_ns() - start) / 1e3
            means = belief.filt_mean
            modes = np.ones(T, dtype=int)
            times = np.full(T, elapsed / T) if clock else None
        elif method == "gpb2-filter":
            means, resps, times = _run_streaming(
                lambda: GPB2FilterSession(theta, phi), y, clock)
            modes = np.argmax(resps, axis=1) + 1
        elif method == "var-filter":
            means, resps, times = _run_streaming(
                lambda: VariationalFilterSession(theta, phi, config), y, clock)
            modes = np.argmax(resps, axis=1) + 1
        elif method == "gpb2-smoother":
            start = time.perf_counter_ns()
            sm = gpb2_smooth(theta, phi, y)
            elapsed = (time.perf_counter_ns() - start) / 1e3
            means = sm.posterior.mean
            modes = np.argmax(sm.posterior.resp, axis=1) + 1
            times = np.full(T, elapsed / T) if clock else None
        else:  # var-smoother
            start = time.perf_counter_ns()
            post = variational_smooth(theta, phi, y, config)
            elapsed = (time.perf_counter_ns() - start) / 1e3
            means = post.mean
            modes = np.argmax(post.resp, axis=1) + 1
            times = np.full(T, elapsed / T) if clock else None
    except PLDSError as exc:
        return MethodRun(method=method, error=str(exc))
    return MethodRun(method=method, mean=means, modes=modes,
                     step_times_us=times)


@dataclass
class MetricsRow:
    method: str
    mae: float = float("nan")
    std: float = float("nan")
    rmse: float = float("nan")
    mode_acc: float = float("nan")
    us_per_step: float = float("nan")
    error: str | None = None

    def as_dict(self) -> dict:
        return {"method": self.method, "mae": self.mae, "std": self.std,
                "rmse": self.rmse, "mode_acc": self.mode_acc,
                "us_per_step": self.us_per_step}


def score_runs(method: str, runs: list[MethodRun], x_true: list[np.ndarray],
               z_true: list[np.ndarray | None]) -> MetricsRow:
    """Pool one method's runs over sequences into a report row."""
    ok = [i for i, r in enumerate(runs) if not r.failed]
    if not ok:
        return MetricsRow(method=method, error=runs[0].error)
    est = np.concatenate([runs[i].mean for i in ok])
    truth = np.concatenate([x_true[i] for i in ok])
    row = MetricsRow(method=method, mae=mae(est, truth),
                     std=std_abs_error(est, truth), rmse=rmse(est, truth))
    labeled = [i for i in ok if z_true[i] is not None and runs[i].modes is not None]
    if labeled:
        pred = np.concatenate([runs[i].modes for i in labeled])
        true = np.concatenate([z_true[i] for i in labeled])
        row.mode_acc = mode_accuracy(pred, true)
    timed = [runs[i].us_per_step for i in ok
             if runs[i].step_times_us is not None]
    if timed:
        row.us_per_step = float(np.mean(timed))
    if len(ok) < len(runs):
        row.error = f"failed on {len(runs) - len(ok)}/{len(runs)} sequences"
    return row


@dataclass
class BenchmarkResult:
    rows: list[MetricsRow]
    runs: dict                       # method -> list[MethodRun]
    time_ratio_gpb2_var: float = float("nan")
    notes: list[str] = field(default_factory=list)

    def row(self, method: str) -> MetricsRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def run_benchmark(theta: StaticParams, phi: DynamicParams, sequences,
                  methods=METHOD_REGISTRY, config: VEMConfig | None = None,
                  max_workers: int = 1) -> BenchmarkResult:
    """All methods over all sequences, pooled into a metrics table.

    `sequences` is a list of Sequence objects with ground truth, or plain
    (T, D) arrays (error metrics then stay NaN).  With max_workers > 1 the
    estimate phase fans out over a thread pool and timing is re-measured
    serially afterwards, one cell at a time.
    """
    config = config or VEMConfig()
    methods = list(methods)
    ys, x_true, z_true = [], [], []
    for seq in sequences:
        if hasattr(seq, "y"):
            ys.append(np.atleast_2d(np.asarray(seq.y, float)))
            x_true.append(None if seq.x is None else np.asarray(seq.x, float))
            z_true.append(None if seq.z is None else np.asarray(seq.z, int))
        else:
            ys.append(np.atleast_2d(np.asarray(seq, float)))
            x_true.append(None)
            z_true.append(None)

    cells = [(m, i) for m in methods for i in range(len(ys))]
    runs: dict[str, list[MethodRun]] = {m: [None] * len(ys) for m in methods}
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {cell: pool.submit(run_method, cell[0], theta, phi,
                                         ys[cell[1]], config, False)
                       for cell in cells}
        for (m, i) in cells:
            runs[m][i] = futures[(m, i)].result()
        # serial timing pass, pinned to this thread
        for (m, i) in cells:
            if runs[m][i].failed:
                continue
            timed = run_method(m, theta, phi, ys[i], config, clock=True)
            runs[m][i].step_times_us = timed.step_times_us
    else:
        for (m, i) in cells:
            runs[m][i] = run_method(m, theta, phi, ys[i], config, clock=True)

    have_truth = [i for i in range(len(ys)) if x_true[i] is not None]
    rows = []
    for m in methods:
        if have_truth:
            rows.append(score_runs(m, [runs[m][i] for i in have_truth],
                                   [x_true[i] for i in have_truth],
                                   [z_true[i] for i in have_truth]))
        else:
            row = MetricsRow(method=m)
            timed = [r.us_per_step for r in runs[m]
                     if not r.failed and r.step_times_us is not None]
            if timed:
                row.us_per_step = float(np.mean(timed))
            if all(r.failed for r in runs[m]):
                row.error = runs[m][0].error
            rows.append(row)

    result = BenchmarkResult(rows=rows, runs=runs)
    by_name = {r.method: r for r in rows}
    if "gpb2-filter" in by_name and "var-filter" in by_name:
        g = by_name["gpb2-filter"].us_per_step
        v = by_name["var-filter"].us_per_step
        if np.isfinite(g) and np.isfinite(v) and v > 0:
            result.time_ratio_gpb2_var = g / v
    return result


def _rank_markers(rows: list[MetricsRow], attr: str,
                  higher_better: bool) -> dict[str, str]:
    scored = [(getattr(r, attr), r.method) for r in rows
              if np.isfinite(getattr(r, attr))]
    scored.sort(reverse=higher_better)
    marks = {}
    if len(scored) >= 1:
        marks[scored[0][1]] = " [1]"
    if len(scored) >= 2:
        marks[scored[1][1]] = " [2]"
    return marks


def render_report(rows: list[MetricsRow]) -> str:
    """Aligned text table with [1]/[2] markers on the best two per column."""
    marks = {
        "mae": _rank_markers(rows, "mae", False),
        "std": _rank_markers(rows, "std", False),
        "rmse": _rank_markers(rows, "rmse", False),
        "mode_acc": _rank_markers(rows, "mode_acc", True),
        "us_per_step": _rank_markers(rows, "us_per_step", False),
    }

    def cell(row, attr):
        value = getattr(row, attr)
        if not np.isfinite(value):
            return "FAILED" if row.error else "-"
        return f"{value:.4f}" + marks[attr].get(row.method, "")

    table = [list(REPORT_COLUMNS)]
    for row in rows:
        table.append([row.method] + [cell(row, a) for a in REPORT_COLUMNS[1:]])
    widths = [max(len(line[j]) for line in table) for j in range(len(table[0]))]
    lines = ["  ".join(entry.ljust(widths[j]) for j, entry in enumerate(line))
             for line in table]
    return "\n".join(lines)


def report_csv_lines(rows: list[MetricsRow]) -> list[str]:
    """Machine-readable report rows; header matches REPORT_COLUMNS exactly."""
    out = [",".join(REPORT_COLUMNS)]
    for row in rows:
        values = [row.method] + [repr(float(getattr(row, a)))
                                 for a in REPORT_COLUMNS[1:]]
        out.append(",".join(values))
    return out

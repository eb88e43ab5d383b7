"""Command-line front end: simulate, fit, track, compare, evaluate.

Every subcommand takes ``--config <path.json>`` plus optional ``--seed``
(overrides the config seed) and ``--out`` (output directory).  Exit codes:
0 success, 2 validation error, 3 numerical failure.  Config schemas are
documented in the README; unknown method names list the registry.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import (METHOD_REGISTRY, render_report, report_csv_lines,
                    run_benchmark, run_method)
from .errors import (BadConfigError, DimensionMismatchError, NumericalFailure,
                     UnknownMethodError, ValidationFailure)
from .gpb2 import gpb2_learn
from .metrics import mode_accuracy, per_dimension_mae, summarize_errors
from .params import default_dynamics, load_model, require_valid, save_model
from .sequences import (Sequence, read_posterior_csv, read_sequence_csv,
                        read_training_csv, write_posterior_csv,
                        write_sequence_csv)
from .simulate import sample_sequence
from .static_em import fit_static
from .synthetic import GeneratorSpec, make_model
from .variational import VEMConfig, run_vem_smoother


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise BadConfigError("config file not found", path=path)
    except json.JSONDecodeError as exc:
        raise BadConfigError("config file is not valid JSON", path=path,
                             detail=str(exc))


def _resolve_model(config: dict, seed):
    """Model from an explicit file or from a generator block."""
    if "model" in config:
        return load_model(config["model"])
    if "generator" in config:
        spec = GeneratorSpec.from_dict(config["generator"])
        return make_model(spec, seed)
    raise BadConfigError("config needs either a model path or a generator block")


def _vem_config(config: dict) -> VEMConfig:
    return VEMConfig.from_dict(config.get("config", {}))


def _seed_of(config: dict, args) -> int:
    if args.seed is not None:
        return args.seed
    return int(config.get("seed", 0))


def _out_dir(config: dict, args) -> Path:
    out = Path(args.out if args.out is not None else config.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    seed = _seed_of(config, args)
    out = _out_dir(config, args)
    T = int(config.get("T", 100))
    n_seq = int(config.get("n_sequences", 1))
    theta, phi = _resolve_model(config, seed)
    require_valid(theta, phi)

    model_path = out / "model.json"
    save_model(model_path, theta, phi)
    manifest = [str(model_path)]
    for i in range(n_seq):
        seq = sample_sequence(theta, phi, T, rng=seed + 1 + i)
        path = out / f"seq_{i:03d}.csv"
        write_sequence_csv(path, seq)
        manifest.append(str(path))
    for line in manifest:
        print(line)
    return 0


def _write_trace(path: Path, name: str, values):
    with open(path, "w") as fh:
        fh.write(f"iteration,{name}\n")
        for i, v in enumerate(values):
            fh.write(f"{i + 1},{float(v)!r}\n")


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    seed = _seed_of(config, args)
    out = _out_dir(config, args)
    method = config.get("method")
    if method not in ("static", "dynamic-var", "dynamic-gpb2"):
        raise UnknownMethodError(
            "fit method must be static, dynamic-var, or dynamic-gpb2",
            method=str(method))

    if method == "static":
        data = read_training_csv(config["training"])
        fit = fit_static(data, n_modes=int(config.get("n_modes", 1)),
                         sigma_diagonal=bool(config.get("sigma_diagonal", False)),
                         n_restarts=int(config.get("n_restarts", 5)),
                         seed=seed)
        theta = fit.theta
        phi = default_dynamics(theta)
        trace_name, trace = "loglik", fit.loglik_trace
        converged = fit.converged
    else:
        theta, phi0 = load_model(config["model"])
        if "init_phi" in config:
            _, phi0 = load_model(config["init_phi"])
        seq_paths = config["sequences"]
        if isinstance(seq_paths, str):
            seq_paths = [seq_paths]
        ys = []
        for p in seq_paths:
            seq = read_sequence_csv(p)
            if seq.D != theta.D:
                raise DimensionMismatchError(
                    "sequence dimension differs from model", path=str(p),
                    sequence_D=seq.D, model_D=theta.D)
            ys.append(seq.y)
        vem_config = _vem_config(config)
        if method == "dynamic-var":
            result = run_vem_smoother(theta, phi0, ys, vem_config)
            trace_name, trace = "elbo", result.elbo_trace
        else:
            result = gpb2_learn(theta, phi0, ys, vem_config)
            trace_name, trace = "loglik", result.loglik_trace
        phi = result.phi
        converged = result.converged

    model_path = out / "model.json"
    save_model(model_path, theta, phi)
    trace_path = out / "trace.csv"
    _write_trace(trace_path, trace_name, trace)
    print(model_path)
    print(trace_path)
    if not converged:
        print("CONVERGENCE_NOT_REACHED", file=sys.stderr)
    return 0


def cmd_track(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(config, args)
    method = config.get("method")
    if method not in METHOD_REGISTRY:
        raise UnknownMethodError("unknown tracking method", method=str(method),
                                 registry=",".join(METHOD_REGISTRY))
    theta, phi = load_model(config["model"])
    seq = read_sequence_csv(config["sequence"])
    if seq.D != theta.D:
        raise DimensionMismatchError("sequence dimension differs from model",
                                     sequence_D=seq.D, model_D=theta.D)
    vem_config = _vem_config(config)

    run = run_method(method, theta, phi, seq.y, vem_config, clock=True)
    if run.failed:
        raise NumericalFailure(run.error)
    cov, resp = _track_posterior(method, theta, phi, seq.y, vem_config)
    est_path = out / "estimates.csv"
    write_posterior_csv(est_path, run.mean, cov, resp,
                        step_times_us=run.step_times_us)
    print(est_path)
    return 0


def _track_posterior(method, theta, phi, y, config):
    """Covariances and mode weights matching run_method's means."""
    from .gpb2 import gpb2_filter, gpb2_smooth
    from .kalman import kalman_filter
    from .static_em import InversePredictor
    from .variational import run_variational_filter, variational_smooth

    T = y.shape[0]
    if method == "static":
        machine = InversePredictor(theta)
        covs = np.empty((T, theta.L, theta.L))
        resp = np.empty((T, theta.K))
        for t in range(T):
            mix = machine.posterior(y[t])
            covs[t] = mix.cov()
            resp[t] = mix.weights
        return covs, resp
    if method == "kalman":
        belief = kalman_filter(theta, phi, y)
        return belief.filt_cov, np.ones((T, 1))
    if method == "gpb2-filter":
        result = gpb2_filter(theta, phi, y)
        return result.cov, result.resp
    if method == "gpb2-smoother":
        post = gpb2_smooth(theta, phi, y).posterior
        return post.cov, post.resp
    if method == "var-filter":
        result = run_variational_filter(theta, phi, y, config)
        return result.cov, result.resp
    post = variational_smooth(theta, phi, y, config)
    return post.cov, post.resp


def cmd_compare(args) -> int:
    config = _load_config(args.config)
    seed = _seed_of(config, args)
    out = _out_dir(config, args)
    methods = config.get("methods", list(METHOD_REGISTRY))
    for m in methods:
        if m not in METHOD_REGISTRY:
            raise UnknownMethodError("unknown method in config", method=m,
                                     registry=",".join(METHOD_REGISTRY))
    theta, phi = _resolve_model(config, seed)
    T = int(config.get("T", 200))
    seeds = config.get("seeds")
    if seeds is None:
        seeds = [seed + 1 + i for i in range(int(config.get("n_sequences", 1)))]
    if not seeds:
        raise BadConfigError("compare needs at least one sequence seed")
    vem_config = _vem_config(config)
    sequences = [sample_sequence(theta, phi, T, rng=int(s)) for s in seeds]

    result = run_benchmark(theta, phi, sequences, methods, vem_config,
                           max_workers=int(config.get("max_workers", 1)))

    report_path = out / "report.csv"
    report_path.write_text("\n".join(report_csv_lines(result.rows)) + "\n")
    text = render_report(result.rows)
    (out / "report.txt").write_text(text + "\n")

    for i, (s, seq) in enumerate(zip(seeds, sequences)):
        traj_path = out / f"trajectory_{i:03d}.csv"
        _write_trajectory(traj_path, seq, methods, result.runs, i)

    summary = {
        "seeds": [int(s) for s in seeds],
        "T": T,
        "methods": list(methods),
        "time_ratio_gpb2_var": result.time_ratio_gpb2_var,
        "rows": [row.as_dict() for row in result.rows],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")

    print(text)
    if np.isfinite(result.time_ratio_gpb2_var):
        print(f"per-step time ratio gpb2-filter / var-filter: "
              f"{result.time_ratio_gpb2_var:.2f}")
    return 0


def _write_trajectory(path, seq: Sequence, methods, runs, index: int):
    """Plot-ready overlay: truth plus each method's state estimates."""
    if seq.x is None:
        return
    L = seq.x.shape[1]
    header = ["t"] + [f"x_true_{j + 1}" for j in range(L)]
    blocks = [seq.x]
    for m in methods:
        run = runs[m][index]
        if run.failed:
            continue
        header += [f"{m}_{j + 1}" for j in range(L)]
        blocks.append(run.mean)
    table = np.hstack(blocks)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for t in range(seq.T):
            fh.write(",".join([str(t + 1)] + [repr(float(v))
                                              for v in table[t]]) + "\n")


def cmd_evaluate(args) -> int:
    config = _load_config(args.config) if args.config else {}
    estimates_path = args.estimates or config.get("estimates")
    truth_path = args.truth or config.get("truth")
    if not estimates_path or not truth_path:
        raise BadConfigError("evaluate needs estimates and truth paths")
    out = _out_dir(config, args)

    mean, _, resp = read_posterior_csv(estimates_path)
    truth = read_sequence_csv(truth_path)
    if truth.x is None:
        raise BadConfigError("truth file has no x_* columns",
                             path=str(truth_path))
    report = dict(summarize_errors(mean, truth.x))
    report["per_dimension_mae"] = per_dimension_mae(mean, truth.x).tolist()
    if truth.z is not None and resp.size:
        pred = np.argmax(resp, axis=1) + 1
        report["mode_acc"] = mode_accuracy(pred, truth.z)
    text = json.dumps(report, indent=1)
    (out / "evaluation.json").write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plds",
        description="Switching linear dynamical system toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, needs_config=True):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config,
                       help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="overrides the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(fn=fn)
        return p

    add("simulate", cmd_simulate)
    add("fit", cmd_fit)
    add("track", cmd_track)
    add("compare", cmd_compare)
    p_eval = add("evaluate", cmd_evaluate, needs_config=False)
    p_eval.add_argument("--estimates", default=None,
                        help="estimates CSV (overrides config)")
    p_eval.add_argument("--truth", default=None,
                        help="ground-truth sequence CSV (overrides config)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationFailure as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except OSError as exc:
        # unreadable/missing input files are configuration mistakes
        print(str(BadConfigError("cannot read input file", detail=str(exc))),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

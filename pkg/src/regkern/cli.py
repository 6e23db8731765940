"""Command-line interface.

Subcommands::

    regkern estimate     --data d.csv --family tc --criterion eb [--n 50] [--sigma2 s2]
    regkern benchmark    --config it2.json
    regkern rates        --config rates.json
    regkern closed-form  ridge|diagonal --theta-ls 1,1 --N 4 --sigma2 1

Exit codes: 0 success, 2 malformed input or configuration, 3 numerical failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .asymptotics import LimitSpec, convergence_rate_experiment
from ._inputs import input_covariance
from .bench import ExperimentConfig, run_experiment
from .criteria import Criterion
from .errors import ConfigError, RegKernError
from .hyperopt import OptimizerConfig, closed_form_diagonal, closed_form_ridge, estimate_hyperparameter
from .kernels import KernelSpec, canonical_family, default_eta
from .model import Dataset, noise_variance_estimate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_ORDER = 50


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("REGKERN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"REGKERN_THREADS must be an integer, got {env!r}") from None
    return 1


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def read_dataset_csv(path):
    """Read columns ``t, u, y``; rows are ``t = 0..N`` and ``y(0)`` is ignored.

    Returns ``(u, y)`` with ``u = u(0..N-1)`` and ``y = y(1..N)``.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["t", "u", "y"]:
            raise ConfigError(f"{path}: line 1: header must be 't,u,y', got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise ConfigError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row[:3]])
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: non-numeric field in {row!r}") from None
    data = np.array(rows, dtype=float)
    if data.shape[0] < 3:
        raise ConfigError(f"{path}: need at least 3 data rows")
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    return data[:-1, 1], data[1:, 2]


def _cmd_estimate(args):
    u, y = read_dataset_csv(args.data)
    N = y.size
    n = args.n if args.n is not None else min(DEFAULT_ORDER, N // 2)
    if n < 1 or n > N:
        raise ConfigError(f"--n must lie in [1, {N}], got {n}")
    try:
        kind = Criterion.parse(args.criterion)
        family = canonical_family(args.family)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    d = Dataset.from_io(u, y, n, burn_in=args.burn_in)
    theta0 = None
    if args.theta0:
        theta0 = np.asarray(_load_json(args.theta0), dtype=float).ravel()
        if theta0.size != n:
            raise ConfigError(f"{args.theta0}: theta0 has length {theta0.size}, expected {n}")
    sigma2 = args.sigma2 if args.sigma2 is not None else noise_variance_estimate(d)
    cfg = OptimizerConfig(seed=args.seed or 0, restarts=args.restarts)
    spec = KernelSpec(family, default_eta(family, n), n)
    rep = estimate_hyperparameter(kind, spec, d, sigma2, theta0, cfg)
    out = rep.to_dict()
    out["sigma2"] = float(sigma2)
    out["n"] = n
    out["N"] = d.N
    if out["fit"] is None:
        del out["fit"]
    out["optimizer_diagnostics"] = {k: v for k, v in out["optimizer_diagnostics"].items() if k != "trace"}
    _emit(out, args.out, "report.json")


def _emit(obj, out, default_name):
    text = json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
    if out:
        path = os.path.join(out, default_name) if os.path.isdir(out) else out
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_benchmark(args):
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out:
        raw["output_dir"] = args.out
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    _, summary = run_experiment(cfg, workers=_threads(args))
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")


RATES_FIELDS = {"input_kind", "Sigma", "theta0", "sigma2", "family", "N_grid", "replicates", "seed",
                "optimizer", "kinds"}


def _cmd_rates(args):
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be a JSON object")
    unknown = set(raw) - RATES_FIELDS
    if unknown:
        raise ConfigError(f"{args.config}: unknown field(s): {sorted(unknown)}")
    for key in ("theta0", "sigma2", "N_grid", "replicates"):
        if key not in raw:
            raise ConfigError(f"{args.config}: missing field '{key}'")
    try:
        theta0 = np.asarray(raw["theta0"], dtype=float).ravel()
        n = theta0.size
        input_kind = raw.get("input_kind", "IT2")
        Sigma = np.asarray(raw["Sigma"], dtype=float) if "Sigma" in raw else input_covariance(input_kind, n)
        fam = raw.get("family", {"family": "TC"})
        fam = dict(fam, n=n)
        ls = LimitSpec(Sigma, theta0, float(raw["sigma2"]), KernelSpec.from_dict(fam))
        opt = OptimizerConfig.from_dict(raw["optimizer"]) if "optimizer" in raw else None
        kinds = [Criterion.parse(k) for k in raw["kinds"]] if "kinds" in raw else None
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    res = convergence_rate_experiment(ls, input_kind, raw["N_grid"], int(raw["replicates"]), seed,
                                      cfg=opt, workers=_threads(args), kinds=kinds)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    res.write_csv(os.path.join(out, "rates.csv"))
    res.write_json(os.path.join(out, "slopes.json"))
    sys.stdout.write(json.dumps(res.summary()["fitted_slope"], indent=2, sort_keys=True) + "\n")


def _floats(text):
    try:
        return np.array([float(x) for x in text.split(",") if x.strip()], dtype=float)
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _cmd_closed_form(args):
    tls = _floats(args.theta_ls)
    if args.N < 1 or args.sigma2 < 0:
        raise ConfigError("--N must be positive and --sigma2 non-negative")
    if args.kind == "ridge":
        eta = [closed_form_ridge(tls, tls.size, args.N, args.sigma2)]
    else:
        eta = closed_form_diagonal(tls, args.N, args.sigma2).tolist()
    _emit({"family": "Ridge" if args.kind == "ridge" else "Diagonal", "eta_hat": eta}, args.out, "closed_form.json")


def build_parser():
    p = argparse.ArgumentParser(prog="regkern", description="Kernel-regularized FIR identification.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the random seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $REGKERN_THREADS or 1)")
    common.add_argument("--out", default=None, help="output file or directory")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", parents=[common], help="estimate hyperparameters for one dataset")
    e.add_argument("--data", required=True, help="CSV with columns t,u,y")
    e.add_argument("--family", default="tc")
    e.add_argument("--criterion", default="eb")
    e.add_argument("--n", type=int, default=None, help=f"FIR order (default min({DEFAULT_ORDER}, N/2))")
    e.add_argument("--sigma2", type=float, default=None, help="noise variance (default: LS residual estimate)")
    e.add_argument("--theta0", default=None, help="JSON file with the true impulse response")
    e.add_argument("--restarts", type=int, default=8)
    e.add_argument("--burn-in", action="store_true", help="drop the first n rows")
    e.set_defaults(func=_cmd_estimate)

    b = sub.add_parser("benchmark", parents=[common], help="run a Monte Carlo experiment")
    b.add_argument("--config", required=True)
    b.set_defaults(func=_cmd_benchmark)

    r = sub.add_parser("rates", parents=[common], help="convergence-rate experiment")
    r.add_argument("--config", required=True)
    r.set_defaults(func=_cmd_rates)

    c = sub.add_parser("closed-form", parents=[common], help="ridge or diagonal closed forms")
    c.add_argument("kind", choices=["ridge", "diagonal"])
    c.add_argument("--theta-ls", required=True, help="comma-separated LS estimate")
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--sigma2", type=float, required=True)
    c.set_defaults(func=_cmd_closed_form)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if getattr(args, "seed", None) is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        args.func(args)
    except ConfigError as exc:
        print(f"regkern: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegKernError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"regkern: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


cli_main = main

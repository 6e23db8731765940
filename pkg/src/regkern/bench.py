"""Monte Carlo benchmark: random test systems, inputs, estimators and reports.

Each system gets its own PRNG stream derived from ``(seed, system_id)``, so
serial and parallel runs produce identical records.
"""

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._inputs import INPUT_KINDS, as_generator, canonical_input, generate_input
from .criteria import Criterion
from .errors import ConfigError, NonConvergenceError, RegKernError
from .hyperopt import (
    SCALED_FAMILIES,
    OptimizerConfig,
    estimate_hyperparameter,
    estimate_profiled,
)
from .kernels import KernelSpec, canonical_family, default_eta
from .model import Dataset, SystemTruth, build_regressor

__all__ = [
    "INPUT_KINDS",
    "ExperimentConfig",
    "RunRecord",
    "generate_input",
    "generate_test_system",
    "run_experiment",
]

MAX_RADIUS = 0.95
MIN_RADIUS = 0.7

_SYSTEM, _INPUT, _SNR, _NOISE = range(4)


def generate_test_system(order, fir_n, seed=None):
    """Random stable system of the given order, truncated to ``fir_n`` impulse-response samples.

    The state matrix has standard Gaussian entries rescaled to a spectral
    radius drawn uniformly from ``[0.7, 0.95]``; ``B`` and ``C`` are Gaussian.
    The response ``g_k = C A^(k-1) B`` is normalized to unit Euclidean norm.
    The returned ``sigma2`` is a unit placeholder; experiments set the noise
    level from the signal-to-noise ratio.
    """
    order, fir_n = int(order), int(fir_n)
    if order < 1 or fir_n < 1:
        raise ValueError("order and fir_n must be positive")
    rng = as_generator(seed)
    while True:
        A = rng.standard_normal((order, order))
        B = rng.standard_normal(order)
        C = rng.standard_normal(order)
        radius = np.max(np.abs(np.linalg.eigvals(A)))
        if radius == 0:
            continue
        A *= rng.uniform(MIN_RADIUS, MAX_RADIUS) / radius
        g = np.empty(fir_n)
        x = B.copy()
        for k in range(fir_n):
            g[k] = C @ x
            x = A @ x
        norm = np.linalg.norm(g)
        if norm > 0 and np.all(np.isfinite(g)):
            return SystemTruth(g / norm, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one Monte Carlo experiment (one input kind, one data length)."""

    num_systems: int = 100
    system_order: int = 30
    fir_n: int = 200
    input_kind: str = "IT2"
    N: int = 8000
    snr_range: tuple = (1.0, 10.0)
    kernel_family: str = "TC"
    estimators: tuple = tuple(c.value for c in Criterion)
    seed: int = 0
    output_dir: str = "results"
    optimizer: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(restarts=2, method="profiled_scale")
    )

    def __post_init__(self):
        for name in ("num_systems", "system_order", "fir_n", "N", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < (0 if name == "seed" else 1):
                raise ConfigError(f"field '{name}': expected a positive integer, got {v!r}")
        if self.N <= self.fir_n:
            raise ConfigError(f"field 'N': must exceed fir_n={self.fir_n}, got {self.N}")
        try:
            object.__setattr__(self, "input_kind", canonical_input(self.input_kind))
        except ValueError as exc:
            raise ConfigError(f"field 'input_kind': {exc}") from None
        try:
            lo, hi = (float(x) for x in self.snr_range)
        except (TypeError, ValueError):
            raise ConfigError(f"field 'snr_range': expected [low, high], got {self.snr_range!r}") from None
        if not (0 < lo <= hi < math.inf):
            raise ConfigError(f"field 'snr_range': need 0 < low <= high < inf, got {self.snr_range!r}")
        object.__setattr__(self, "snr_range", (lo, hi))
        try:
            object.__setattr__(self, "kernel_family", canonical_family(self.kernel_family))
            ests = tuple(Criterion.parse(e).value for e in self.estimators)
        except ValueError as exc:
            raise ConfigError(f"field 'kernel_family'/'estimators': {exc}") from None
        if not ests:
            raise ConfigError("field 'estimators': at least one estimator is required")
        object.__setattr__(self, "estimators", ests)
        if isinstance(self.optimizer, dict):
            object.__setattr__(self, "optimizer", OptimizerConfig.from_dict(self.optimizer))

    def to_dict(self):
        return {
            "num_systems": self.num_systems,
            "system_order": self.system_order,
            "fir_n": self.fir_n,
            "input_kind": self.input_kind,
            "N": self.N,
            "snr_range": list(self.snr_range),
            "kernel_family": self.kernel_family,
            "estimators": list(self.estimators),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "optimizer": self.optimizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown field(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d)


@dataclass
class RunRecord:
    """One estimator applied to one test system."""

    system_id: int
    estimator: str
    fit: float
    eta_hat: list
    cond_gram: float
    wall_time_ms: float
    snr: float = math.nan
    sigma2: float = math.nan
    converged: bool = True
    error: str = ""


RUN_COLUMNS = ("system_id", "estimator", "fit", "eta_hat", "cond_gram", "snr", "sigma2",
               "converged", "error", "wall_time_ms")


def simulate_system(cfg, system_id):
    """Truth, dataset and drawn SNR for one system of the experiment."""
    root = np.random.SeedSequence(cfg.seed)
    streams = [np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(system_id, s)))
               for s in (_SYSTEM, _INPUT, _SNR, _NOISE)]
    truth = generate_test_system(cfg.system_order, cfg.fir_n, streams[_SYSTEM])
    u = generate_input(cfg.input_kind, cfg.N, streams[_INPUT])
    Phi = build_regressor(u, cfg.fir_n, cfg.N)
    clean = Phi @ truth.theta0
    snr = float(streams[_SNR].uniform(*cfg.snr_range))
    sigma2 = float(np.var(clean)) / snr
    Y = clean + math.sqrt(sigma2) * streams[_NOISE].standard_normal(cfg.N)
    return SystemTruth(truth.theta0, sigma2), Dataset(Y, Phi), snr


def _fmt(x):
    return repr(float(x))


def run_system(cfg, system_id):
    """Run every configured estimator on one system; never raises for numerical failures."""
    truth, d, snr = simulate_system(cfg, system_id)
    cond = float(d.cond_gram)
    spec = KernelSpec(cfg.kernel_family, default_eta(cfg.kernel_family, cfg.fir_n), cfg.fir_n)
    kinds = [Criterion.parse(e) for e in cfg.estimators]
    opt = cfg.optimizer
    t0 = time.perf_counter()
    if opt.method == "profiled_scale" and spec.family in SCALED_FAMILIES:
        outcomes = estimate_profiled(kinds, spec, d, truth.sigma2, truth.theta0, opt)
        per = (time.perf_counter() - t0) * 1e3 / len(kinds)
        times = {k: per for k in kinds}
    else:
        outcomes, times = {}, {}
        for k in kinds:
            s = time.perf_counter()
            try:
                outcomes[k] = estimate_hyperparameter(k, spec, d, truth.sigma2, truth.theta0, opt)
            except (RegKernError, np.linalg.LinAlgError) as exc:
                outcomes[k] = exc
            times[k] = (time.perf_counter() - s) * 1e3
    records = []
    for k in kinds:
        r = outcomes[k]
        rec = RunRecord(system_id, k.value, math.nan, [], cond, times[k], snr, truth.sigma2)
        if isinstance(r, NonConvergenceError) and r.best is not None:
            r, rec.converged, rec.error = r.best, False, "nonconverged"
        if isinstance(r, Exception):
            rec.converged, rec.error = False, type(r).__name__
        else:
            rec.fit = float(r.fit) if r.fit is not None else math.nan
            rec.eta_hat = [float(x) for x in r.eta_hat]
        records.append(rec)
    return records


def _run_system_args(args):
    cfg_dict, system_id = args
    return run_system(ExperimentConfig.from_dict(cfg_dict), system_id)


def summarize(cfg, records):
    """Mean and median fit per estimator (NaN fits excluded and counted)."""
    out = {"input_kind": cfg.input_kind, "N": cfg.N, "num_systems": cfg.num_systems,
           "kernel_family": cfg.kernel_family, "seed": cfg.seed, "estimators": {}}
    for est in cfg.estimators:
        fits = np.array([r.fit for r in records if r.estimator == est], dtype=float)
        ok = fits[np.isfinite(fits)]
        out["estimators"][est] = {
            "mean_fit": float(ok.mean()) if ok.size else None,
            "median_fit": float(np.median(ok)) if ok.size else None,
            "runs": int(fits.size),
            "failures": int(fits.size - ok.size),
            "nonconverged": int(sum(1 for r in records if r.estimator == est and r.error == "nonconverged")),
        }
    conds = np.array(sorted({(r.system_id, r.cond_gram) for r in records}))[:, 1] if records else np.array([])
    out["cond_gram_median"] = float(np.median(conds)) if conds.size else None
    return out


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return [math.nan] * 5
    return list(np.percentile(x, [0, 25, 50, 75, 100]))


def boxplot_rows(cfg, records):
    rows = []
    for est in cfg.estimators:
        rows.append(["fit", est] + _quantiles([r.fit for r in records if r.estimator == est]))
    conds = [c for _, c in sorted({(r.system_id, r.cond_gram) for r in records})]
    rows.append(["cond_gram", "all"] + _quantiles(conds))
    return rows


def write_outputs(cfg, records, summary, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "runs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for r in records:
            w.writerow([r.system_id, r.estimator, _fmt(r.fit), ";".join(_fmt(x) for x in r.eta_hat),
                        _fmt(r.cond_gram), _fmt(r.snr), _fmt(r.sigma2), int(r.converged), r.error,
                        f"{r.wall_time_ms:.3f}"])
    with open(os.path.join(out_dir, "boxplot.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "estimator", "min", "q25", "median", "q75", "max"])
        for row in boxplot_rows(cfg, records):
            w.writerow(row[:2] + [_fmt(v) for v in row[2:]])
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump({"config": cfg.to_dict(), "summary": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_runs(path):
    """Load ``runs.csv`` back into :class:`RunRecord` objects."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            eta = [float(x) for x in row["eta_hat"].split(";")] if row["eta_hat"] else []
            out.append(RunRecord(int(row["system_id"]), row["estimator"], float(row["fit"]), eta,
                                 float(row["cond_gram"]), float(row["wall_time_ms"]),
                                 float(row["snr"]), float(row["sigma2"]),
                                 bool(int(row["converged"])), row["error"]))
    return out


def run_experiment(cfg, workers=1, write=True):
    """Run all systems of ``cfg`` and return ``(records, summary)``.

    Systems are distributed over ``workers`` processes; records come back in
    system order whatever the scheduling. With ``write=True`` the files
    ``runs.csv``, ``summary.json`` and ``boxplot.csv`` are written to
    ``cfg.output_dir``.
    """
    ids = range(cfg.num_systems)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_system_args, [(cfg.to_dict(), i) for i in ids]))
    else:
        parts = [run_system(cfg, i) for i in ids]
    records = [r for part in parts for r in part]
    summary = summarize(cfg, records)
    if write:
        write_outputs(cfg, records, summary, cfg.output_dir)
    return records, summary

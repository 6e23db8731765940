"""Large-sample behaviour of the hyperparameter estimators.

When ``Phi^T Phi / N -> Sigma`` the suitably shifted and scaled criteria
converge to deterministic functionals of ``P``:

    W_g(P) = s4 theta0^T P^-T Sigma^-2 P^-1 theta0 - 2 s4 Tr(Sigma^-1 P^-1 Sigma^-1)
    W_y(P) = s4 theta0^T P^-T Sigma^-1 P^-1 theta0 - 2 s4 Tr(Sigma^-1 P^-1)
    W_B(P) = theta0^T P^-1 theta0 + log det P

with ``s4 = sigma2**2``. SUREg and MSEg share the limit ``W_g``, SUREy and
MSEy share ``W_y``, EB and EEB share ``W_B``. This module evaluates the
limits, finds their minimizers over a kernel family and measures how fast
the finite-sample estimators approach them.
"""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._inputs import as_generator, generate_input, input_covariance
from ._linalg import as_matrix, general_inverse, spd_inverse, symmetrize
from .criteria import Criterion, criterion_value
from .errors import DimensionError, NonConvergenceError, RegKernError
from .hyperopt import (
    OptimizerConfig,
    SCALED_FAMILIES,
    estimate_hyperparameter,
    estimate_profiled,
    minimize_box,
)
from .kernels import KernelSpec, contract_gradient, kernel_matrix
from .model import Dataset

LIMIT_KINDS = ("g", "y", "B")
LIMIT_OF = {
    Criterion.MSEG: "g", Criterion.SUREG: "g",
    Criterion.MSEY: "y", Criterion.SUREY: "y",
    Criterion.EB: "B", Criterion.EEB: "B",
}
PAIRS = (("SUREg", "MSEg"), ("SUREy", "MSEy"), ("EEB", "EB"))
BOOTSTRAP = 1000


@dataclass(frozen=True, eq=False)
class LimitSpec:
    """Limit design ``Sigma``, true response, noise variance and kernel family."""

    Sigma: np.ndarray
    theta0: np.ndarray
    sigma2: float
    family: KernelSpec

    def __post_init__(self):
        Sigma = symmetrize(as_matrix(self.Sigma, "Sigma"))
        theta0 = np.asarray(self.theta0, dtype=float).ravel()
        if Sigma.shape[0] != theta0.size or self.family.n != theta0.size:
            raise DimensionError("Sigma, theta0 and the kernel family disagree on n")
        if np.linalg.eigvalsh(Sigma)[0] <= 0:
            raise ValueError("Sigma must be positive definite")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n(self):
        return self.theta0.size

    def to_dict(self):
        return {
            "Sigma": self.Sigma.tolist(),
            "theta0": self.theta0.tolist(),
            "sigma2": self.sigma2,
            "family": self.family.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["Sigma"], dtype=float), d["theta0"], d["sigma2"],
                   KernelSpec.from_dict(d["family"]))


def _sigma_power(Sigma, k):
    Si = spd_inverse(Sigma, "Sigma")
    return Si if k == 1 else Si @ Si


def _w_sure(P, ls, k):
    Pi = general_inverse(P, "P")
    A = _sigma_power(ls.Sigma, k)
    v = Pi @ ls.theta0
    s4 = ls.sigma2**2
    return float(s4 * (v @ A @ v) - 2.0 * s4 * np.sum(A * Pi.T)), Pi, A, v


def w_g(P, ls):
    """Limit of the impulse-response criteria (SUREg and MSEg)."""
    return _w_sure(P, ls, 2)[0]


def w_y(P, ls):
    """Limit of the output-prediction criteria (SUREy and MSEy)."""
    return _w_sure(P, ls, 1)[0]


def w_b(P, theta0):
    """Limit ``theta0^T P^-1 theta0 + log det P`` of EB and EEB."""
    P = as_matrix(P, "P")
    Pi = general_inverse(P, "P")
    theta0 = np.asarray(theta0, dtype=float).ravel()
    sign, logdet = np.linalg.slogdet(P)
    if sign <= 0:
        raise ValueError("log det P needs det P > 0")
    return float(theta0 @ Pi @ theta0 + logdet)


def _grad_sure(P, ls, k):
    _, Pi, A, v = _w_sure(P, ls, k)
    s4 = ls.sigma2**2
    PiT = Pi.T
    return -2.0 * s4 * PiT @ A @ np.outer(v, v) + 2.0 * s4 * PiT @ A @ PiT


def w_g_grad_P(P, ls):
    return _grad_sure(P, ls, 2)


def w_y_grad_P(P, ls):
    return _grad_sure(P, ls, 1)


def w_b_grad_P(P, theta0):
    Pi = general_inverse(P, "P")
    theta0 = np.asarray(theta0, dtype=float).ravel()
    return Pi.T - np.outer(Pi.T @ theta0, Pi @ theta0)


def limit_value(kind, P, ls):
    kind = _limit_kind(kind)
    if kind == "g":
        return w_g(P, ls)
    if kind == "y":
        return w_y(P, ls)
    return w_b(P, ls.theta0)


def limit_grad_P(kind, P, ls):
    kind = _limit_kind(kind)
    if kind == "g":
        return w_g_grad_P(P, ls)
    if kind == "y":
        return w_y_grad_P(P, ls)
    return w_b_grad_P(P, ls.theta0)


def _limit_kind(kind):
    if isinstance(kind, Criterion):
        return LIMIT_OF[kind]
    k = str(kind)
    if k in LIMIT_KINDS:
        return k
    if k.lower() in ("g", "y", "b"):
        return {"g": "g", "y": "y", "b": "B"}[k.lower()]
    return LIMIT_OF[Criterion.parse(k)]


def limit_grad_eta(kind, eta, ls):
    """Gradient of ``W(P(eta))``; zero at interior minimizers (the trace equations)."""
    spec = ls.family.with_eta(eta)
    return contract_gradient(spec, limit_grad_P(kind, kernel_matrix(spec), ls))


def limit_eta(kind, ls, cfg=None):
    """Minimizer ``eta*`` of the limit functional ``kind`` (``g``, ``y`` or ``B``) over the box."""
    kind = _limit_kind(kind)
    cfg = OptimizerConfig() if cfg is None else cfg
    spec = ls.family

    def objective(eta):
        s = spec.with_eta(eta)
        P = kernel_matrix(s)
        return limit_value(kind, P, ls), contract_gradient(s, limit_grad_P(kind, P, ls))

    warm = np.empty(spec.p)
    scale = max(float(ls.theta0 @ ls.theta0) / ls.n, 1e-6)
    for i, name in enumerate(spec.names):
        warm[i] = {"alpha": 0.9, "rho": 0.0}.get(name, scale)
    warm = np.clip(warm, spec.omega[:, 0], spec.omega[:, 1])
    if cfg.method == "profiled_scale":
        cfg = OptimizerConfig(cfg.restarts, cfg.max_iters, cfg.grad_tol, cfg.step_tol, cfg.seed)
    res = minimize_box(objective, spec.omega, spec.names, cfg, warm=warm)
    return res.eta


def stationarity_residual(kind, eta, ls):
    """Norm of the limit gradient at ``eta`` over coordinates not pinned to the box."""
    g = limit_grad_eta(kind, eta, ls)
    lo, hi = ls.family.omega[:, 0], ls.family.omega[:, 1]
    eta = np.asarray(eta, dtype=float)
    pinned = ((eta <= lo) & (g > 0)) | ((eta >= hi) & (g < 0))
    return float(np.linalg.norm(np.where(pinned, 0.0, g)))


def shifted_criterion(kind, P, d, sigma2, theta0=None):
    """Criterion shifted and scaled so that it converges to its limit functional.

    ``N^2 (C - sigma2 Tr G^-1)`` for MSEg and SUREg,
    ``N (MSEy - (n + N) sigma2)``,
    ``N (F_Sy + b^T G^-1 b - Y^T Y - 2 n sigma2)``,
    ``EEB - (N - n) - (N - n) log sigma2 - log det G`` and
    ``F_EB + (b^T G^-1 b - Y^T Y) / sigma2 - (N - n) log sigma2 - log det G``
    with ``G = Phi^T Phi`` and ``b = Phi^T Y``.
    """
    kind = Criterion.parse(kind)
    v = criterion_value(kind, P, d, sigma2, theta0)
    N, n = d.N, d.n
    if kind in (Criterion.MSEG, Criterion.SUREG):
        Gi = spd_inverse(d.gram, "Phi^T Phi")
        return N**2 * (v - sigma2 * np.trace(Gi))
    if kind is Criterion.MSEY:
        return N * (v - (n + N) * sigma2)
    bGb = float(d.phiTy @ d.theta_ls)
    logdet_G = 2.0 * float(np.sum(np.log(np.diag(d.gram_factor[0]))))
    if kind is Criterion.SUREY:
        return N * (v + bGb - d.yTy - 2 * n * sigma2)
    if kind is Criterion.EEB:
        return v - (N - n) - (N - n) * np.log(sigma2) - logdet_G
    return v + (bGb - d.yTy) / sigma2 - (N - n) * np.log(sigma2) - logdet_G


@dataclass
class RateResult:
    """Errors of each estimator against its limit over a grid of sample sizes.

    ``median_errors[k][i]`` is the median over replicates at ``N_grid[i]``;
    slopes are least-squares fits of log median error against log N with
    percentile bootstrap intervals.
    """

    N_grid: list
    median_errors: dict
    fitted_slope: dict
    slope_ci: dict
    eta_star: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    failures: int = 0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "N", "replicate", "error"])
            for rec in self.records:
                w.writerow([rec[0], rec[1], rec[2], repr(float(rec[3]))])

    def summary(self):
        return {
            "N_grid": [int(x) for x in self.N_grid],
            "median_errors": {k: [float(x) for x in v] for k, v in self.median_errors.items()},
            "fitted_slope": {k: float(v) for k, v in self.fitted_slope.items()},
            "slope_ci": {k: [float(v[0]), float(v[1])] for k, v in self.slope_ci.items()},
            "eta_star": {k: [float(x) for x in v] for k, v in self.eta_star.items()},
            "failures": int(self.failures),
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fit_slope(N_grid, med):
    x = np.log(np.asarray(N_grid, dtype=float))
    y = np.log(np.asarray(med, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _replicate(args):
    """One (N, replicate) work item; returns ``{kind: eta_hat}`` or an error tag."""
    ls_dict, input_kind, N, seed_seq, cfg_dict, kinds = args
    ls = LimitSpec.from_dict(ls_dict)
    cfg = OptimizerConfig.from_dict(cfg_dict)
    rng = as_generator(seed_seq)
    n = ls.n
    u = generate_input(input_kind, N, rng)
    Phi = Dataset.from_io(u, np.zeros(N), n).Phi
    Y = Phi @ ls.theta0 + np.sqrt(ls.sigma2) * rng.standard_normal(N)
    d = Dataset(Y, Phi)
    spec = ls.family
    try:
        if cfg.method == "profiled_scale" and spec.family in SCALED_FAMILIES:
            out = estimate_profiled(kinds, spec, d, ls.sigma2, ls.theta0, cfg)
            res = {}
            for k, r in out.items():
                if isinstance(r, NonConvergenceError) and r.best is not None:
                    r = r.best
                if isinstance(r, Exception):
                    raise r
                res[k.value] = r.eta_hat
            return res
        res = {}
        for k in kinds:
            try:
                r = estimate_hyperparameter(k, spec, d, ls.sigma2, ls.theta0, cfg)
            except NonConvergenceError as exc:
                if exc.best is None:
                    raise
                r = exc.best
            res[Criterion.parse(k).value] = r.eta_hat
        return res
    except (RegKernError, np.linalg.LinAlgError) as exc:
        return {"error": type(exc).__name__}


def convergence_rate_experiment(ls, input_kind, N_grid, replicates, seed=0, cfg=None,
                                workers=1, kinds=None, bootstrap=BOOTSTRAP):
    """Simulate the six estimators over ``N_grid`` and measure convergence rates.

    For every ``N`` and replicate the input is drawn fresh, the output is
    ``Phi theta0 + v`` with ``v ~ N(0, sigma2)``, and each estimator's
    ``||eta_hat - eta*||`` is recorded against the minimizer of its limit
    functional. The pairwise distances SUREg-MSEg, SUREy-MSEy and EEB-EB are
    recorded too. Replicates whose optimization fails are dropped and
    counted in ``failures``.
    """
    N_grid = [int(x) for x in N_grid]
    if len(N_grid) < 3 or any(b <= a for a, b in zip(N_grid, N_grid[1:])):
        raise ValueError("N_grid needs at least three strictly increasing sizes")
    if replicates < 20:
        raise ValueError("replicates must be at least 20")
    cfg = OptimizerConfig(restarts=2, method="profiled_scale") if cfg is None else cfg
    kinds = [Criterion.parse(k) for k in (kinds or list(Criterion))]
    eta_star = {kk: limit_eta(kk, ls, OptimizerConfig(seed=cfg.seed)) for kk in LIMIT_KINDS}

    root = np.random.SeedSequence(seed)
    work = []
    for i, N in enumerate(N_grid):
        for r in range(replicates):
            ss = np.random.SeedSequence(root.entropy, spawn_key=(i, r))
            work.append((ls.to_dict(), input_kind, N, ss, cfg.to_dict(), [k.value for k in kinds]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_replicate, work))
    else:
        results = [_replicate(w) for w in work]

    labels = [k.value for k in kinds] + [f"{a}-{b}" for a, b in PAIRS
                                          if Criterion.parse(a) in kinds and Criterion.parse(b) in kinds]
    records = []
    failures = 0
    per = {lab: [[] for _ in N_grid] for lab in labels}
    for idx, res in enumerate(results):
        i, r = divmod(idx, replicates)
        if "error" in res:
            failures += 1
            continue
        for k in kinds:
            err = float(np.linalg.norm(res[k.value] - eta_star[LIMIT_OF[k]]))
            per[k.value][i].append(err)
            records.append((k.value, N_grid[i], r, err))
        for a, b in PAIRS:
            lab = f"{a}-{b}"
            if lab in per:
                err = float(np.linalg.norm(res[a] - res[b]))
                per[lab][i].append(err)
                records.append((lab, N_grid[i], r, err))

    rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(len(N_grid),)))
    med, slope, ci = {}, {}, {}
    for lab in labels:
        cols = [np.asarray(v) for v in per[lab]]
        if any(c.size == 0 for c in cols):
            continue
        med[lab] = np.array([np.median(c) for c in cols])
        if np.any(med[lab] <= 0):
            continue
        slope[lab] = _fit_slope(N_grid, med[lab])
        boots = np.empty(bootstrap)
        for b in range(bootstrap):
            m = [np.median(c[rng.integers(0, c.size, c.size)]) for c in cols]
            boots[b] = _fit_slope(N_grid, np.maximum(m, 1e-300))
        ci[lab] = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5)))
    return RateResult(N_grid, med, slope, ci, eta_star, records, failures)

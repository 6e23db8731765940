"""Hyperparameter estimation by multi-start box-constrained minimization.

Search happens in transformed coordinates ``z``:

* scale parameters with a positive lower bound (``c``, ridge or diagonal
  scales whose box excludes zero) use ``eta = exp(z)``;
* interval parameters (``alpha``, ``rho``) use a scaled logistic map onto
  their open interval;
* scale parameters whose box starts at zero use the same log map down to a
  floor of 1e-12; a coordinate that ends on the floor is snapped to exactly
  zero, where the optimum of ridge and diagonal kernels often sits.

Every restart is refined by a projected Newton polish on the analytic
gradient, so the returned point satisfies the first-order conditions to
``grad_tol`` rather than to the tolerance of the outer method.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize as sopt
from scipy.stats import qmc

from ._linalg import symmetrize
from .criteria import Criterion, criterion_value_and_grad_eta, derived_quantities
from .errors import (
    ConfigError,
    DimensionError,
    IllConditionedError,
    InvalidKernelError,
    MissingTruthError,
    NonConvergenceError,
)
from .kernels import KernelSpec, kernel_matrix
from ._spectral import ShapeSpectrum
from .model import EstimateReport, fit_metric

METHODS = ("gradient_quasi_newton", "simplex_search", "profiled_scale")
SCALED_FAMILIES = ("TC", "SS", "DC")

LOGISTIC_SPAN = 36.0  # |z| bound for logistic coordinates
LHS_LOGISTIC_SPAN = 6.0
TIE_RTOL = 1e-12
ORTHO_RTOL = 1e-8
# the outer method only needs to reach the Newton basin; the polish does the rest
OUTER_FTOL = 1e-11
OUTER_GTOL = 1e-7
POLISH_FACTOR = 1e-4
ZERO_FLOOR = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the multi-start optimizer.

    ``method=None`` picks ``simplex_search`` for at most three
    hyperparameters and ``gradient_quasi_newton`` otherwise.
    """

    restarts: int = 8
    max_iters: int = 500
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    seed: int = 0
    method: str = None

    def __post_init__(self):
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ConfigError(f"restarts must be a positive integer, got {self.restarts!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        for name in ("grad_tol", "step_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.method is not None and self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")

    def resolve_method(self, p):
        if self.method is not None:
            return self.method
        return "simplex_search" if p <= 3 else "gradient_quasi_newton"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("optimizer config must be a JSON object")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown optimizer field(s): {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


class BoxTransform:
    """Bijection between the feasible box and the optimizer coordinates."""

    def __init__(self, omega, names):
        self.omega = np.asarray(omega, dtype=float)
        self.lo, self.hi = self.omega[:, 0], self.omega[:, 1]
        scale = np.array([name == "c" or name.startswith("eta") for name in names])
        self.is_log = scale
        self.is_lgt = ~scale
        # zero-floored scales: log map on [ZERO_FLOOR, hi], snapped to 0 at the floor
        self.snaps = scale & (self.lo <= 0.0)
        self.floor = np.where(self.snaps, np.maximum(ZERO_FLOOR, self.lo), self.lo)
        zlo = np.full(self.lo.shape, -LOGISTIC_SPAN)
        zhi = np.full(self.lo.shape, LOGISTIC_SPAN)
        zlo[scale] = np.log(self.floor[scale])
        zhi[scale] = np.log(self.hi[scale])
        self.zlo, self.zhi = zlo, zhi

    @property
    def bounds(self):
        return list(zip(self.zlo, self.zhi))

    def clip(self, z):
        return np.clip(z, self.zlo, self.zhi)

    def to_eta(self, z):
        z = np.asarray(z, dtype=float)
        eta = z.copy()
        eta[self.is_log] = np.exp(z[self.is_log])
        s = 1.0 / (1.0 + np.exp(-z[self.is_lgt]))
        eta[self.is_lgt] = self.lo[self.is_lgt] + (self.hi - self.lo)[self.is_lgt] * s
        return np.clip(eta, self.lo, self.hi)

    def snap(self, z):
        """``to_eta`` with zero-floored coordinates on their floor set to exactly 0."""
        eta = self.to_eta(z)
        eta[self.snaps & (np.asarray(z) <= self.zlo)] = 0.0
        return eta

    def jacobian(self, z):
        """Diagonal of ``d eta / d z``."""
        z = np.asarray(z, dtype=float)
        jac = np.ones_like(z)
        jac[self.is_log] = np.exp(z[self.is_log])
        s = 1.0 / (1.0 + np.exp(-z[self.is_lgt]))
        jac[self.is_lgt] = (self.hi - self.lo)[self.is_lgt] * s * (1.0 - s)
        return jac

    def to_z(self, eta):
        eta = np.clip(np.asarray(eta, dtype=float), self.floor, self.hi)
        z = eta.copy()
        z[self.is_log] = np.log(eta[self.is_log])
        t = (eta - self.lo)[self.is_lgt] / (self.hi - self.lo)[self.is_lgt]
        t = np.clip(t, 1e-15, 1.0 - 1e-15)
        z[self.is_lgt] = np.log(t) - np.log1p(-t)
        return self.clip(z)

    def sample(self, k, rng, center=None):
        """``k`` Latin-hypercube starting points in ``z``.

        Log coordinates span the whole box, logistic coordinates
        ``[-6, 6]``; zero-floored scales cover three decades either side of
        ``center`` (or of 1) instead of reaching down to the floor.
        """
        p = self.omega.shape[0]
        u = qmc.LatinHypercube(d=p, seed=rng).random(k)
        lo = np.where(self.is_lgt, -LHS_LOGISTIC_SPAN, self.zlo)
        hi = np.where(self.is_lgt, LHS_LOGISTIC_SPAN, self.zhi)
        if np.any(self.snaps):
            ref = np.ones(p) if center is None else np.asarray(center, float)
            ref = np.log(np.maximum(ref, 1e-6))
            lo = np.where(self.snaps, ref - np.log(1e3), lo)
            hi = np.where(self.snaps, ref + np.log(1e3), hi)
        z = lo + u * (hi - lo)
        return self.clip(z)


@dataclass
class BoxResult:
    """Outcome of :func:`minimize_box`."""

    eta: np.ndarray
    value: float
    z: np.ndarray
    converged: bool
    boundary: bool
    diagnostics: dict = field(default_factory=dict)


def _safe(objective):
    """Map numerical failures of the objective to ``+inf``."""

    def fg(eta):
        try:
            f, g = objective(eta)
        except (InvalidKernelError, IllConditionedError, np.linalg.LinAlgError, FloatingPointError):
            return np.inf, np.full(eta.size, np.nan)
        if not np.isfinite(f):
            return np.inf, np.full(eta.size, np.nan)
        return float(f), np.asarray(g, dtype=float)

    return fg


def _free_mask(z, g, tr):
    at_lo = (z <= tr.zlo) & (g > 0)
    at_hi = (z >= tr.zhi) & (g < 0)
    return ~(at_lo | at_hi)


def _projected_norm(z, g, tr):
    if not np.all(np.isfinite(g)):
        return np.inf
    return float(np.linalg.norm(np.where(_free_mask(z, g, tr), g, 0.0)))


def _polish(fz, z, f, g, tr, cfg, trace):
    """Projected Newton iterations with a finite-difference Hessian of the gradient."""
    iters = 0
    for iters in range(1, 51):
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            break
        free = _free_mask(z, g, tr)
        gnorm = _projected_norm(z, g, tr)
        if gnorm <= POLISH_FACTOR * cfg.grad_tol * (1.0 + abs(f)) or not np.any(free):
            break
        idx = np.flatnonzero(free)
        Hm = np.empty((idx.size, idx.size))
        ok = True
        for col, j in enumerate(idx):
            h = 1e-6 * (1.0 + abs(z[j]))
            if z[j] + h > tr.zhi[j]:
                h = -h
            zp = z.copy()
            zp[j] += h
            _, gp = fz(zp)
            if not np.all(np.isfinite(gp)):
                ok = False
                break
            Hm[:, col] = (gp[idx] - g[idx]) / h
        if not ok:
            break
        lam, V = np.linalg.eigh(symmetrize(Hm))
        scale = max(np.max(np.abs(lam)), 1e-300)
        lam = np.maximum(np.abs(lam), 1e-10 * scale)
        step = np.zeros_like(z)
        step[idx] = -V @ ((V.T @ g[idx]) / lam)
        accepted = False
        t = 1.0
        for _ in range(40):
            zn = tr.clip(z + t * step)
            fn, gn = fz(zn)
            slack = 1e-13 * (1.0 + abs(f))
            if fn < f or (fn <= f + slack and _projected_norm(zn, gn, tr) < gnorm):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        moved = np.linalg.norm(zn - z)
        z, f, g = zn, fn, gn
        trace.append(f)
        if moved <= cfg.step_tol * (1.0 + np.linalg.norm(z)):
            break
    return z, f, g, iters


def _run_outer(fz, z0, tr, cfg, method):
    trace = []
    f0, g0 = fz(z0)
    trace.append(f0)
    nit = 0
    z, f, g = z0, f0, g0
    if np.isfinite(f0):
        if method == "simplex_search":
            res = sopt.minimize(
                lambda x: fz(x)[0],
                z0,
                method="Nelder-Mead",
                bounds=tr.bounds,
                options={"maxiter": cfg.max_iters, "xatol": 1e-6, "fatol": OUTER_FTOL,
                         "adaptive": z0.size > 2},
            )
        else:
            res = sopt.minimize(
                fz,
                z0,
                jac=True,
                method="L-BFGS-B",
                bounds=tr.bounds,
                options={"maxiter": cfg.max_iters, "gtol": OUTER_GTOL, "ftol": OUTER_FTOL},
            )
        nit = int(res.nit)
        zr = tr.clip(res.x)
        fr, gr = fz(zr)
        if fr <= f0:
            z, f, g = zr, fr, gr
            trace.append(f)
    return {"z": z, "f": f, "g": g, "iterations": nit, "trace": trace}


def _close_out(run, tr, cfg):
    gnorm = _projected_norm(run["z"], run["g"], tr)
    run["grad_norm"] = gnorm
    run["converged"] = bool(np.isfinite(run["f"]) and gnorm <= cfg.grad_tol * (1.0 + abs(run["f"])))
    return run


def _polish_run(fz, run, tr, cfg):
    z, f, g, npol = _polish(fz, run["z"], run["f"], run["g"], tr, cfg, run["trace"])
    run.update(z=z, f=f, g=g, iterations=run["iterations"] + npol, polished=True)
    return run


def _run_starts(fz, starts, tr, cfg, method):
    """Outer search from every start, then Newton polish in order of outer value.

    Polishing stops at the first run that meets the gradient tolerance; the
    remaining starts keep their outer result.
    """
    runs = [_run_outer(fz, np.asarray(z0, float), tr, cfg, method) for z0 in starts]
    order = sorted((i for i, r in enumerate(runs) if np.isfinite(r["f"])), key=lambda i: (runs[i]["f"], i))
    for i in order:
        if _close_out(_polish_run(fz, runs[i], tr, cfg), tr, cfg)["converged"]:
            break
    return [_close_out(r, tr, cfg) for r in runs]


def minimize_box(objective, omega, names, cfg=None, warm=None, center=None):
    """Minimize ``objective(eta) -> (value, grad_eta)`` over the box ``omega``.

    Starts are the warm start (if given) followed by ``cfg.restarts``
    Latin-hypercube points; restarts are reduced in index order, so the
    result does not depend on evaluation order. Raises
    :class:`NonConvergenceError` carrying the best :class:`BoxResult` when
    no start meets the gradient test.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    omega = np.asarray(omega, dtype=float)
    tr = BoxTransform(omega, names)
    fg, fz = _make_fz(objective, tr)
    rng = np.random.default_rng(cfg.seed)
    starts = []
    if warm is not None:
        starts.append(tr.to_z(warm))
    starts.extend(tr.sample(cfg.restarts, rng, center=center if center is not None else warm))
    method = cfg.resolve_method(omega.shape[0])
    if method == "profiled_scale":
        raise ConfigError("profiled_scale needs a scaled kernel family; use estimate_hyperparameter")
    runs = _run_starts(fz, starts, tr, cfg, method)
    return _finish(runs, tr, fg, {"method": method, "restarts": len(starts)})


def _make_fz(objective, tr):
    fg = _safe(objective)

    def fz(z):
        f, g = fg(tr.to_eta(z))
        return f, g * tr.jacobian(z)

    return fg, fz


def _tie_key(run):
    return (not run["converged"], not run.get("polished", False), np.linalg.norm(run["z"]))


def _select_best(runs):
    """Index of the best run.

    Lowest value wins; ties go to converged runs, then to polished runs,
    then to the smallest ``||z||``.
    """
    best = None
    for i, r in enumerate(runs):
        if not np.isfinite(r["f"]):
            continue
        if best is None:
            best = i
            continue
        fb, fi = runs[best]["f"], r["f"]
        tie = abs(fi - fb) <= TIE_RTOL * max(abs(fb), abs(fi), 1e-300)
        if tie:
            key_i = _tie_key(r)
            key_b = _tie_key(runs[best])
            if key_i < key_b:
                best = i
        elif fi < fb:
            best = i
    return best


def _finish(runs, tr, fg, info):
    best = _select_best(runs)
    if best is None:
        raise NonConvergenceError("every start produced a non-finite criterion", None)
    rb = runs[best]
    eta = tr.snap(rb["z"])
    value = rb["f"]
    if not np.array_equal(eta, tr.to_eta(rb["z"])):
        value = fg(eta)[0]
    boundary = bool(np.any(eta <= tr.lo) or np.any(eta >= tr.hi))
    diag = dict(info)
    diag.update({
        "best_start": best,
        "iterations": rb["iterations"],
        "converged": rb["converged"],
        "grad_norm": rb["grad_norm"],
        "converged_starts": int(sum(r["converged"] for r in runs)),
        "boundary": boundary,
        "trace": [float(x) for x in rb["trace"]],
    })
    result = BoxResult(eta, float(value), rb["z"], rb["converged"], boundary, diag)
    if not any(r["converged"] for r in runs):
        raise NonConvergenceError(
            f"no start converged (best projected gradient {rb['grad_norm']:.3e})", result
        )
    return result


def warm_start(spec, d):
    """Heuristic starting point: ``c = ||theta_LS||^2 / n``, ``alpha = 0.9``, ``rho = 0``."""
    if d.well_conditioned:
        scale = float(d.theta_ls @ d.theta_ls) / d.n
    else:
        scale = 1.0
    scale = max(scale, 1e-6)
    eta = np.empty(spec.p)
    for i, name in enumerate(spec.names):
        eta[i] = {"alpha": 0.9, "rho": 0.0}.get(name, scale)
    return np.clip(eta, spec.omega[:, 0], spec.omega[:, 1])


def is_orthonormal_design(d, rtol=ORTHO_RTOL):
    """True if ``Phi^T Phi = N I`` within ``rtol`` relative (Frobenius)."""
    target = d.N * np.eye(d.n)
    return bool(np.linalg.norm(d.gram - target) <= rtol * np.linalg.norm(target))


def closed_form_ridge(theta_ls, n, N, sigma2):
    """Ridge estimate ``max(0, ||theta_LS||^2 / n - sigma2 / N)`` for ``Phi^T Phi = N I``."""
    theta_ls = np.asarray(theta_ls, dtype=float).ravel()
    return max(0.0, float(theta_ls @ theta_ls) / n - sigma2 / N)


def closed_form_diagonal(theta_ls, N, sigma2):
    """Diagonal estimate ``max(0, g_i^2 - sigma2 / N)`` for ``Phi^T Phi = N I``."""
    theta_ls = np.asarray(theta_ls, dtype=float).ravel()
    return np.maximum(0.0, theta_ls**2 - sigma2 / N)


def optimal_unconstrained_kernel(theta0):
    """The kernel ``theta0 theta0^T`` that minimizes MSEg, MSEy and EEB over all PSD ``P``."""
    theta0 = np.asarray(theta0, dtype=float).ravel()
    return np.outer(theta0, theta0)


def closed_form_estimate(kind, family, d, sigma2, theta0=None):
    """Closed-form hyperparameter for ridge or diagonal kernels on orthonormal designs.

    Data-driven kinds use ``theta_LS``; oracle kinds use ``theta0`` and give
    ``||theta0||^2 / n`` (ridge) or ``theta0**2`` (diagonal). Raises
    ``ValueError`` if ``Phi^T Phi`` differs from ``N I`` by more than 1e-8
    relative or the family has no closed form.
    """
    kind = Criterion.parse(kind)
    family = KernelSpec(family, np.ones(1 if str(family).lower() == "ridge" else d.n), d.n).family
    if not is_orthonormal_design(d):
        raise ValueError("closed forms need Phi^T Phi = N I")
    if kind.oracle:
        if theta0 is None:
            raise MissingTruthError(f"{kind.value} needs theta0")
        t = np.asarray(theta0, dtype=float).ravel()
        if t.size != d.n:
            raise DimensionError(f"theta0 has length {t.size}, expected {d.n}")
        return np.array([t @ t / d.n]) if family == "Ridge" else t**2
    if family == "Ridge":
        return np.array([closed_form_ridge(d.theta_ls, d.n, d.N, sigma2)])
    return closed_form_diagonal(d.theta_ls, d.N, sigma2)


def _report(kind, spec, d, sigma2, theta0, eta, value, diagnostics):
    P = kernel_matrix(spec.with_eta(eta))
    theta_hat = derived_quantities(symmetrize(P), d, sigma2).theta_r
    fit = None
    if theta0 is not None:
        try:
            fit = fit_metric(theta_hat, theta0)
        except ValueError:
            fit = None
    return EstimateReport(
        eta_hat=np.asarray(eta, dtype=float),
        criterion_kind=kind.value,
        criterion_value=float(value),
        theta_hat=theta_hat,
        fit=fit,
        family=spec.family,
        optimizer_diagnostics=diagnostics,
    )


def estimate_hyperparameter(kind, spec, d, sigma2, theta0=None, cfg=None, use_closed_form=False):
    """Minimize criterion ``kind`` over the feasible box of ``spec``.

    Parameters
    ----------
    kind : Criterion or str
    spec : KernelSpec
        Family, dimension and box; ``spec.eta`` itself is not used as a start.
    d : Dataset
    sigma2 : float
    theta0 : array_like, optional
        Required for the oracle kinds; when given, the report carries the fit.
    cfg : OptimizerConfig, optional
    use_closed_form : bool
        For ridge and diagonal kernels on designs with ``Phi^T Phi = N I``
        return the closed-form estimate instead of optimizing.

    Returns
    -------
    EstimateReport

    Raises
    ------
    NonConvergenceError
        No restart met the gradient test; ``best`` holds the best report.
    IllConditionedError
        SUREg on a design whose Gram condition number exceeds 1e12.
    """
    kind = Criterion.parse(kind)
    cfg = OptimizerConfig() if cfg is None else cfg
    if d.n != spec.n:
        raise DimensionError(f"kernel dimension {spec.n} differs from dataset n={d.n}")
    if kind.oracle and theta0 is None:
        raise MissingTruthError(f"{kind.value} is an oracle criterion and needs theta0")
    if kind is Criterion.SUREG:
        d.gram_factor  # refuse ill-conditioned designs up front
    t0 = None if theta0 is None else np.asarray(theta0, dtype=float).ravel()
    crit_t0 = t0 if kind.oracle else None

    if use_closed_form and spec.family in ("Ridge", "Diagonal") and is_orthonormal_design(d):
        eta = closed_form_estimate(kind, spec.family, d, sigma2, t0)
        eta = np.clip(eta, spec.omega[:, 0], spec.omega[:, 1])
        value, _ = criterion_value_and_grad_eta(kind, spec.with_eta(eta), d, sigma2, crit_t0)
        diag = {"method": "closed_form", "restarts": 0, "iterations": 0, "converged": True,
                "boundary": bool(np.any(eta <= spec.omega[:, 0]))}
        return _report(kind, spec, d, sigma2, t0, eta, value, diag)

    def objective(eta):
        return criterion_value_and_grad_eta(kind, spec.with_eta(eta), d, sigma2, crit_t0)

    if cfg.resolve_method(spec.p) == "profiled_scale":
        out = estimate_profiled([kind], spec, d, sigma2, t0, cfg)[kind]
        if isinstance(out, Exception):
            raise out
        return out

    warm = warm_start(spec, d)
    try:
        res = minimize_box(objective, spec.omega, spec.names, cfg, warm=warm)
    except NonConvergenceError as exc:
        best = exc.best
        if best is not None:
            best = _report(kind, spec, d, sigma2, t0, best.eta, best.value, best.diagnostics)
        raise NonConvergenceError(str(exc), best) from None
    return _report(kind, spec, d, sigma2, t0, res.eta, res.value, res.diagnostics)


# scale-profiled search for c * P1(shape) families

PROFILE_C_POINTS = 97
SHAPE_GRID = {"TC": (41,), "SS": (41,), "DC": (21, 9)}
SHAPE_SPAN = {"alpha": (-4.0, 9.0), "rho": (-4.0, 4.0)}


def _spectrum(spec, tr, zshape, d, sigma2, theta0):
    eta = tr.to_eta(np.concatenate([[0.0], zshape]))
    eta[0] = np.clip(1.0, spec.omega[0, 0], spec.omega[0, 1])
    try:
        P1 = kernel_matrix(spec.with_eta(eta)) / eta[0]
        return ShapeSpectrum(P1, d, sigma2, theta0)
    except (InvalidKernelError, np.linalg.LinAlgError):
        return None


def _profile_c(sp, kind, tr, refine):
    """Best log-scale for one shape: grid search, then a bounded scalar refinement."""
    if sp is None:
        return 0.0, np.inf
    grid = np.linspace(tr.zlo[0], tr.zhi[0], PROFILE_C_POINTS)
    with np.errstate(all="ignore"):
        v = sp.values(kind, np.exp(grid))
    v = np.where(np.isfinite(v), v, np.inf)
    i = int(np.argmin(v))
    if not refine or not np.isfinite(v[i]):
        return grid[i], v[i]
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = sopt.minimize_scalar(
        lambda x: float(sp.values(kind, np.exp(x))[0]),
        bounds=(a, b), method="bounded", options={"xatol": 1e-9},
    )
    if np.isfinite(res.fun) and res.fun < v[i]:
        return float(res.x), float(res.fun)
    return grid[i], v[i]


def _grid_minima(table):
    """Flat indices of grid points no worse than any finite neighbour, best first."""
    idx = []
    for pos in np.ndindex(table.shape):
        v = table[pos]
        if not np.isfinite(v):
            continue
        ok = True
        for off in np.ndindex(*(3,) * table.ndim):
            nb = tuple(p + o - 1 for p, o in zip(pos, off))
            if nb == pos or any(x < 0 or x >= m for x, m in zip(nb, table.shape)):
                continue
            if table[nb] < v:
                ok = False
                break
        if ok:
            idx.append(pos)
    return sorted(idx, key=lambda q: table[q])


def estimate_profiled(kinds, spec, d, sigma2, theta0=None, cfg=None):
    """Estimate several criteria at once for ``TC``, ``SS`` or ``DC`` kernels.

    For kernels ``c P1(shape)`` every criterion is a cheap closed-form
    function of ``c`` once ``P1`` has been diagonalized against the Gram
    matrix. A shape grid (shared by all ``kinds``) is scanned with the scale
    profiled out; the best ``cfg.restarts`` grid-local minima are refined
    along the shape and the winner is polished jointly in ``(c, shape)``
    with the exact analytic gradient.

    Returns
    -------
    dict
        Maps each :class:`Criterion` to an :class:`EstimateReport`, or to the
        exception raised for that criterion (non-convergence carries the best
        report in ``best``).
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    kinds = [Criterion.parse(k) for k in kinds]
    if spec.family not in SCALED_FAMILIES:
        raise ConfigError(f"profiled_scale supports {SCALED_FAMILIES}, not {spec.family}")
    if d.n != spec.n:
        raise DimensionError(f"kernel dimension {spec.n} differs from dataset n={d.n}")
    t0 = None if theta0 is None else np.asarray(theta0, dtype=float).ravel()
    out = {}
    active = []
    for k in kinds:
        if k.oracle and t0 is None:
            out[k] = MissingTruthError(f"{k.value} is an oracle criterion and needs theta0")
        elif k is Criterion.SUREG and not d.well_conditioned:
            try:
                d.gram_factor
            except IllConditionedError as exc:
                out[k] = exc
        else:
            active.append(k)
    if not active:
        return out

    tr = BoxTransform(spec.omega, spec.names)
    axes = []
    for j, (name, m) in enumerate(zip(spec.names[1:], SHAPE_GRID[spec.family]), start=1):
        lo, hi = SHAPE_SPAN[name]
        axes.append(np.linspace(max(lo, tr.zlo[j]), min(hi, tr.zhi[j]), m))
    shape = tuple(a.size for a in axes)
    tables = {k: np.full(shape, np.inf) for k in active}
    for pos in np.ndindex(shape):
        zs = np.array([a[i] for a, i in zip(axes, pos)])
        sp = _spectrum(spec, tr, zs, d, sigma2, t0)
        for k in active:
            tables[k][pos] = _profile_c(sp, k, tr, refine=False)[1]

    for k in active:
        crit_t0 = t0 if k.oracle else None

        def objective(eta, k=k, crit_t0=crit_t0):
            return criterion_value_and_grad_eta(k, spec.with_eta(eta), d, sigma2, crit_t0)

        fg, fz = _make_fz(objective, tr)

        def profiled(zs, k=k):
            zs = np.atleast_1d(zs)
            return _profile_c(_spectrum(spec, tr, zs, d, sigma2, t0), k, tr, refine=True)

        runs = []
        for pos in _grid_minima(tables[k])[: cfg.restarts]:
            zs0 = np.array([a[i] for a, i in zip(axes, pos)])
            if len(axes) == 1:
                a = axes[0]
                i = pos[0]
                res = sopt.minimize_scalar(
                    lambda x: profiled(x)[1],
                    bounds=(a[max(i - 1, 0)], a[min(i + 1, a.size - 1)]),
                    method="bounded", options={"xatol": 1e-4},
                )
                zs = np.atleast_1d(res.x)
                nit = int(res.nfev)
            else:
                step = np.array([(a[1] - a[0]) / 2.0 for a in axes])
                simplex = np.vstack([zs0, zs0 + np.diag(step)])
                res = sopt.minimize(
                    lambda x: profiled(x)[1], zs0, method="Nelder-Mead",
                    bounds=list(zip(tr.zlo[1:], tr.zhi[1:])),
                    options={"initial_simplex": simplex, "xatol": 1e-6, "fatol": OUTER_FTOL,
                             "maxiter": cfg.max_iters},
                )
                zs = np.atleast_1d(res.x)
                nit = int(res.nit)
            zc, _ = profiled(zs)
            z = tr.clip(np.concatenate([[zc], zs]))
            f, g = fz(z)
            trace = [f]
            z, f, g, npol = _polish(fz, z, f, g, tr, cfg, trace)
            gnorm = _projected_norm(z, g, tr)
            runs.append({"z": z, "f": f, "grad_norm": gnorm, "trace": trace,
                         "converged": bool(np.isfinite(f) and gnorm <= cfg.grad_tol * (1.0 + abs(f))),
                         "iterations": nit + npol})
        info = {"method": "profiled_scale", "restarts": len(runs), "grid_points": int(np.prod(shape))}
        try:
            res = _finish(runs, tr, fg, info)
            out[k] = _report(k, spec, d, sigma2, t0, res.eta, res.value, res.diagnostics)
        except NonConvergenceError as exc:
            best = exc.best
            if best is not None:
                best = _report(k, spec, d, sigma2, t0, best.eta, best.value, best.diagnostics)
            out[k] = NonConvergenceError(str(exc), best)
    return {k: out[k] for k in kinds}

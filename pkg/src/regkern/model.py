"""FIR data model, least-squares and regularized least-squares estimators.

The system is ``y(t) = phi(t)^T theta + v(t)`` for ``t = 1..N`` with
``phi(t) = [u(t-1), ..., u(t-n)]`` and zero input before ``t = 0``.
Everything here is expressed through the ``n x n`` Gram matrix
``Phi^T Phi`` so no ``N x N`` matrix is ever formed.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._linalg import (
    COND_LIMIT,
    as_matrix,
    check_psd,
    spd_condition,
    spd_factor,
    spd_solve,
    symmetrize,
)
from .errors import DimensionError, IllConditionedError, UndefinedFitError


@dataclass(frozen=True)
class SystemTruth:
    """True impulse response ``theta0`` and noise variance ``sigma2``."""

    theta0: np.ndarray
    sigma2: float

    def __post_init__(self):
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if theta0.ndim != 1 or theta0.size < 1:
            raise DimensionError("theta0 must be a non-empty vector")
        if not np.all(np.isfinite(theta0)):
            raise ValueError("theta0 must be finite")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def n(self):
        return self.theta0.size


@dataclass(frozen=True, eq=False)
class Dataset:
    """Output vector ``Y`` (length N) and regression matrix ``Phi`` (N x n).

    Gram quantities are computed lazily and cached; a dataset is immutable
    and can be shared between threads.
    """

    Y: np.ndarray
    Phi: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float).ravel()
        Phi = np.asarray(self.Phi, dtype=float)
        if Phi.ndim == 1:
            Phi = Phi[:, None]
        if Phi.ndim != 2 or Phi.shape[0] != Y.size:
            raise DimensionError(
                f"Phi must be N x n with N = len(Y) = {Y.size}, got {Phi.shape}"
            )
        if Phi.shape[1] < 1 or Phi.shape[0] < Phi.shape[1]:
            raise DimensionError(f"need N >= n >= 1, got N={Phi.shape[0]}, n={Phi.shape[1]}")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Phi))):
            raise ValueError("Y and Phi must be finite")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "Phi", Phi)

    @classmethod
    def from_io(cls, u, y, n, burn_in=False):
        """Build a dataset from input samples ``u(0..N-1)`` and outputs ``y(1..N)``.

        With ``burn_in=True`` the first ``n`` rows (those touching the zero
        initial conditions) are dropped.
        """
        y = np.asarray(y, dtype=float).ravel()
        Phi = build_regressor(u, n, y.size)
        if burn_in:
            Phi, y = Phi[n:], y[n:]
        return cls(y, Phi)

    @property
    def N(self):
        return self.Phi.shape[0]

    @property
    def n(self):
        return self.Phi.shape[1]

    @cached_property
    def gram(self):
        return self.Phi.T @ self.Phi

    @cached_property
    def phiTy(self):
        return self.Phi.T @ self.Y

    @cached_property
    def yTy(self):
        return float(self.Y @ self.Y)

    @cached_property
    def cond_gram(self):
        """2-norm condition number of ``Phi^T Phi`` (``inf`` if singular)."""
        return spd_condition(self.gram)

    @property
    def well_conditioned(self):
        return self.cond_gram < COND_LIMIT

    @cached_property
    def gram_factor(self):
        """Cholesky factor of the Gram matrix; raises if it is ill-conditioned."""
        return spd_factor(self.gram, "Phi^T Phi")

    @cached_property
    def theta_ls(self):
        return spd_solve(self.gram_factor, self.phiTy)


@dataclass
class EstimateReport:
    """Outcome of one hyperparameter estimation run."""

    eta_hat: np.ndarray
    criterion_kind: str
    criterion_value: float
    theta_hat: np.ndarray
    fit: Optional[float] = None
    family: Optional[str] = None
    optimizer_diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "family": self.family,
            "criterion_kind": self.criterion_kind,
            "criterion_value": float(self.criterion_value),
            "eta_hat": [float(x) for x in self.eta_hat],
            "theta_hat": [float(x) for x in self.theta_hat],
            "fit": None if self.fit is None else float(self.fit),
            "optimizer_diagnostics": self.optimizer_diagnostics,
        }


def build_regressor(u, n, N):
    """Regression matrix with row ``t`` equal to ``[u(t-1), ..., u(t-n)]``, ``t = 1..N``.

    ``u`` holds ``u(0), u(1), ...``; samples at negative times are zero.
    """
    u = np.asarray(u, dtype=float).ravel()
    if n < 1 or N < 1:
        raise DimensionError(f"n and N must be positive, got n={n}, N={N}")
    if n > N:
        raise DimensionError(f"FIR order n={n} exceeds the number of samples N={N}")
    if u.size < N:
        raise DimensionError(f"need at least N={N} input samples, got {u.size}")
    first_row = np.zeros(n)
    first_row[0] = u[0]
    return sla.toeplitz(u[:N], first_row)


def ls_estimate(d):
    """Least-squares estimate ``(Phi^T Phi)^{-1} Phi^T Y``.

    Raises :class:`IllConditionedError` when the Gram condition number exceeds 1e12.
    """
    return d.theta_ls.copy()


def noise_variance_estimate(d):
    """Unbiased residual variance ``||Y - Phi theta_LS||^2 / (N - n)`` of the LS fit."""
    if d.N <= d.n:
        raise DimensionError("noise variance estimate needs N > n")
    r = d.Y - d.Phi @ d.theta_ls
    return float(r @ r) / (d.N - d.n)


def _check_sigma2(sigma2):
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return float(sigma2)


def _kernel(P, n):
    P = symmetrize(as_matrix(P, "P"))
    if P.shape[0] != n:
        raise DimensionError(f"P is {P.shape[0]}x{P.shape[0]} but the model order is {n}")
    check_psd(P)
    return P


def rls_estimate(d, P, sigma2):
    """Regularized least-squares estimate ``P Phi^T (Phi P Phi^T + sigma2 I)^{-1} Y``.

    Realized by solving ``(P Phi^T Phi + sigma2 I) theta = P Phi^T Y``, which
    is exact for singular ``P`` and always solvable for ``sigma2 > 0``.
    """
    sigma2 = _check_sigma2(sigma2)
    P = _kernel(P, d.n)
    H = P @ d.gram
    H[np.diag_indices_from(H)] += sigma2
    return np.linalg.solve(H, P @ d.phiTy)


def _mse_parts(P, Phi, theta0, sigma2):
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    theta0 = np.asarray(theta0, dtype=float).ravel()
    n = Phi.shape[1]
    if theta0.size != n:
        raise DimensionError(f"theta0 has length {theta0.size}, expected {n}")
    sigma2 = _check_sigma2(sigma2)
    P = _kernel(P, n)
    G = Phi.T @ Phi
    H = P @ G
    H[np.diag_indices_from(H)] += sigma2
    lu = sla.lu_factor(H, check_finite=False)
    # theta_R - theta0 = -sigma2 H^{-1} theta0 + H^{-1} P Phi^T V
    bias = -sigma2 * sla.lu_solve(lu, theta0, check_finite=False)
    X = sla.lu_solve(lu, P, check_finite=False)
    return G, bias, X, Phi.shape[0]


def mse_matrix(P, Phi, theta0, sigma2):
    """MSE matrix ``E (theta_R - theta0)(theta_R - theta0)^T``."""
    G, bias, X, _ = _mse_parts(P, Phi, theta0, sigma2)
    return np.outer(bias, bias) + sigma2 * (X @ G @ X.T)


def mseg_exact(P, Phi, theta0, sigma2):
    """Impulse-response MSE ``E ||theta_R(P) - theta0||^2`` in closed form."""
    G, bias, X, _ = _mse_parts(P, Phi, theta0, sigma2)
    return float(bias @ bias + sigma2 * np.sum((X @ G) * X))


def msey_exact(P, Phi, theta0, sigma2):
    """Output-prediction MSE over ``t = 1..N`` against an independent noise copy."""
    G, bias, X, N = _mse_parts(P, Phi, theta0, sigma2)
    GX = G @ X
    return float(bias @ G @ bias + N * sigma2 + sigma2 * np.sum((GX @ G) * X))


def fit_metric(theta_hat, theta0):
    """Fit ``100 (1 - ||theta_hat - theta0|| / ||theta0 - mean(theta0)||)``."""
    theta_hat = np.asarray(theta_hat, dtype=float).ravel()
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta_hat.shape != theta0.shape:
        raise DimensionError(f"length mismatch: {theta_hat.size} vs {theta0.size}")
    denom = np.linalg.norm(theta0 - theta0.mean())
    if denom == 0.0:
        raise UndefinedFitError("fit is undefined for a constant theta0")
    return float(100.0 * (1.0 - np.linalg.norm(theta_hat - theta0) / denom))


def regularization_gain_curve(A, beta_grid, Phi, theta0, sigma2):
    """MSEg and MSEy of RLS along ``P^{-1} = beta A / sigma2``.

    Returns a list of ``(beta, mseg, msey)``. The curve is evaluated through
    ``(Phi^T Phi + beta A)^{-1}`` so ``A`` may be singular. As ``beta -> 0``
    the values approach the LS ones, ``sigma2 tr((Phi^T Phi)^{-1})`` and
    ``(n + N) sigma2``.
    """
    A = symmetrize(as_matrix(A, "A"))
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    theta0 = np.asarray(theta0, dtype=float).ravel()
    sigma2 = _check_sigma2(sigma2)
    betas = np.atleast_1d(np.asarray(beta_grid, dtype=float))
    if np.any(~(betas > 0)):
        raise ValueError("beta grid entries must be positive")
    n = Phi.shape[1]
    if A.shape[0] != n or theta0.size != n:
        raise DimensionError("A, Phi and theta0 disagree on the model order")
    check_psd(A, "A")
    G = Phi.T @ Phi
    N = Phi.shape[0]
    At = A @ theta0
    out = []
    for beta in betas:
        C = G + beta * A
        bias = beta * np.linalg.solve(C, At)
        Ci = np.linalg.inv(C)
        V = sigma2 * (Ci @ G @ Ci)
        M = V + np.outer(bias, bias)
        out.append((float(beta), float(np.trace(M)), float(np.sum(M * G) + N * sigma2)))
    return out

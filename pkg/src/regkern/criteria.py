r"""Hyperparameter estimation criteria and their gradients with respect to ``P``.

Six criteria are supported: the empirical Bayes negative log marginal
likelihood (EB), Stein's unbiased risk estimators of the impulse-response
and output-prediction MSE (SUREg, SUREy), and the oracle counterparts that
need the true impulse response (MSEg, MSEy, EEB).

All evaluations avoid the ``N x N`` matrix ``Q = Phi P Phi^T + sigma2 I``.
With ``G = Phi^T Phi``, ``b = Phi^T Y``, ``H = P G + sigma2 I`` and
``Hbar = G P + sigma2 I`` the push-through identities give

    Phi^T Q^{-1} Phi = G H^{-1},     Phi^T Q^{-1} Y = Hbar^{-1} b,
    Y - Phi theta_R = sigma2 Q^{-1} Y,
    log det Q = (N - n) log sigma2 + log det H,

so every criterion costs ``O(n^3)`` once ``G`` and ``b`` are known. These
forms hold for singular ``P`` and for non-symmetric ``P`` (needed when the
elements of ``P`` are perturbed independently).

The EB value returned here is ``Y^T Q^{-1} Y + log det Q`` exactly; the
offset to the dense formula is zero.
"""

from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from ._linalg import COND_LIMIT, as_matrix, general_inverse, spd_solve
from .errors import DimensionError, MissingTruthError
from .kernels import contract_gradient, kernel_matrix


class Criterion(str, Enum):
    """Criterion tag; ``oracle`` is true for the kinds that need ``theta0``."""

    EB = "EB"
    SUREG = "SUREg"
    SUREY = "SUREy"
    MSEG = "MSEg"
    MSEY = "MSEy"
    EEB = "EEB"

    @property
    def oracle(self):
        return self in (Criterion.MSEG, Criterion.MSEY, Criterion.EEB)

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown criterion {value!r}") from None

    def __str__(self):
        return self.value


_ALIASES = {c.value.lower(): c for c in Criterion}
_ALIASES.update({"sg": Criterion.SUREG, "sy": Criterion.SUREY, "ml": Criterion.EB})

ALL_CRITERIA = tuple(Criterion)


class DerivedQuantities:
    """Cached ``n x n`` surrogates of ``Q`` for one ``(P, dataset, sigma2)``.

    Attributes that need ``(Phi^T Phi)^{-1}`` (``S``, ``theta_ls``) raise
    :class:`~regkern.errors.IllConditionedError` on ill-conditioned designs;
    ``R`` is ``None`` when ``P`` is numerically singular.
    """

    def __init__(self, P, d, sigma2):
        P = as_matrix(P, "P")
        if P.shape[0] != d.n:
            raise DimensionError(f"P is {P.shape[0]}x{P.shape[0]}, dataset has n={d.n}")
        if not sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {sigma2}")
        self.P = P
        self.sigma2 = float(sigma2)
        self.dataset = d
        self.N, self.n = d.N, d.n
        self.gram = d.gram
        self.phiTy = d.phiTy
        self.yTy = d.yTy
        self.symmetric = bool(np.array_equal(P, P.T))
        H = P @ self.gram
        H[np.diag_indices_from(H)] += self.sigma2
        self.H = H
        self._lu_H = sla.lu_factor(H, check_finite=False)

    # solves with H, H^T, Hbar, Hbar^T
    def solve_H(self, x):
        return sla.lu_solve(self._lu_H, x, check_finite=False)

    def solve_Ht(self, x):
        return sla.lu_solve(self._lu_H, x, trans=1, check_finite=False)

    @cached_property
    def Hbar(self):
        Hb = self.gram @ self.P
        Hb[np.diag_indices_from(Hb)] += self.sigma2
        return Hb

    @cached_property
    def _lu_Hbar(self):
        return sla.lu_factor(self.Hbar, check_finite=False)

    def solve_Hbar(self, x):
        if self.symmetric:
            return self.solve_Ht(x)
        return sla.lu_solve(self._lu_Hbar, x, check_finite=False)

    def solve_Hbart(self, x):
        if self.symmetric:
            return self.solve_H(x)
        return sla.lu_solve(self._lu_Hbar, x, trans=1, check_finite=False)

    @cached_property
    def w(self):
        """``Phi^T Q^{-1} Y``."""
        return self.solve_Hbar(self.phiTy)

    @cached_property
    def wt(self):
        """``Phi^T Q^{-T} Y``."""
        return self.solve_Ht(self.phiTy)

    @cached_property
    def theta_r(self):
        """Regularized least-squares estimate ``P Phi^T Q^{-1} Y``."""
        return self.P @ self.w

    @cached_property
    def Kt(self):
        """``Phi^T Q^{-T} Phi = H^{-T} G`` (the transpose of ``Phi^T Q^{-1} Phi``)."""
        return self.solve_Ht(self.gram)

    @property
    def K(self):
        """``Phi^T Q^{-1} Phi = G H^{-1}``."""
        return self.Kt.T

    @cached_property
    def logdet_H(self):
        diag = np.diag(self._lu_H[0])
        return float(np.sum(np.log(np.abs(diag))))

    @property
    def logdet_Q(self):
        return (self.N - self.n) * np.log(self.sigma2) + self.logdet_H

    @cached_property
    def yQy(self):
        """``Y^T Q^{-1} Y``."""
        return (self.yTy - self.phiTy @ self.theta_r) / self.sigma2

    @cached_property
    def rss(self):
        """``||Y - Phi theta_R||^2``."""
        t = self.theta_r
        return float(self.yTy - 2.0 * (self.phiTy @ t) + t @ self.gram @ t)

    @cached_property
    def trace_R_inv(self):
        """``Tr(R^{-1}) = Tr(H^{-1} P)``, finite also for singular ``P``."""
        return float(np.trace(self.solve_H(self.P)))

    # quantities that need (Phi^T Phi)^{-1}
    @property
    def gram_cond(self):
        return self.dataset.cond_gram

    @cached_property
    def gram_inv(self):
        return spd_solve(self.dataset.gram_factor, np.eye(self.n))

    @property
    def theta_ls(self):
        return self.dataset.theta_ls

    @cached_property
    def S(self):
        """``S = P + sigma2 (Phi^T Phi)^{-1}``."""
        return self.P + self.sigma2 * self.gram_inv

    @cached_property
    def S_inv(self):
        return general_inverse(self.S, "S")

    @cached_property
    def R(self):
        """``R = Phi^T Phi + sigma2 P^{-1}``, or ``None`` if ``P`` is singular."""
        if np.linalg.cond(self.P, 1) >= COND_LIMIT:
            return None
        return self.gram + self.sigma2 * np.linalg.inv(self.P)

    def identity_residuals(self):
        """Relative residuals of the n-dimensional identities used for fast evaluation.

        Returns a dict with ``Phi^T Q^{-1} Phi = S^{-1}``,
        ``Phi^T Q^{-1} Y = S^{-1} theta_LS`` and ``H = S Phi^T Phi``.
        """
        Si = self.S_inv
        rel = lambda a, b: float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
        return {
            "PhiTQinvPhi": rel(self.K, Si),
            "PhiTQinvY": rel(self.w, Si @ self.theta_ls),
            "H_eq_SG": rel(self.H, self.S @ self.gram),
        }


def derived_quantities(P, d, sigma2):
    """Compute the :class:`DerivedQuantities` for kernel ``P`` on dataset ``d``."""
    return DerivedQuantities(P, d, sigma2)


def _theta0(kind, theta0, n):
    if not kind.oracle:
        return None
    if theta0 is None:
        raise MissingTruthError(f"{kind.value} is an oracle criterion and needs theta0")
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta0.size != n:
        raise DimensionError(f"theta0 has length {theta0.size}, expected {n}")
    return theta0


def _value(kind, q, theta0):
    s2 = q.sigma2
    if kind is Criterion.EB:
        return q.yQy + q.logdet_Q
    if kind is Criterion.SUREG:
        diff = s2 * (q.gram_inv @ q.w)  # theta_LS - theta_R
        return float(diff @ diff + s2 * (2.0 * q.trace_R_inv - np.trace(q.gram_inv)))
    if kind is Criterion.SUREY:
        return q.rss + 2.0 * s2 * float(np.sum(q.P * q.Kt))
    if kind is Criterion.EEB:
        return float(theta0 @ q.K @ theta0) + (q.N - float(np.sum(q.P * q.Kt))) + q.logdet_Q
    bias = s2 * q.solve_H(theta0)
    X = q.solve_H(q.P)
    G = q.gram
    if kind is Criterion.MSEG:
        return float(bias @ bias + s2 * np.sum((X @ G) * X))
    return float(bias @ G @ bias + q.N * s2 + s2 * np.sum((G @ X @ G) * X))


def _grad(kind, q, theta0):
    s2 = q.sigma2
    s4 = s2 * s2
    Kt = q.Kt
    if kind is Criterion.EB:
        return Kt - np.outer(q.wt, q.w)
    if kind is Criterion.SUREG:
        Gi = q.gram_inv
        first = -2.0 * s4 * np.outer(Kt @ (Gi @ (Gi @ q.w)), q.w)
        second = 2.0 * s4 * q.solve_Ht(q.solve_Hbart(np.eye(q.n)))
        return first + second
    if kind is Criterion.SUREY:
        u = q.solve_Ht(q.phiTy - q.gram @ q.theta_r) / s2
        return -2.0 * s4 * np.outer(u, q.w) + 2.0 * s4 * q.solve_Hbar(q.K).T
    D = q.P - np.outer(theta0, theta0)
    if kind is Criterion.EEB:
        return Kt @ (q.P.T - np.outer(theta0, theta0)) @ Kt
    if kind is Criterion.MSEG:
        return 2.0 * s4 * q.solve_Ht(q.solve_H(D @ Kt))
    return 2.0 * s4 * Kt @ q.solve_H(D @ Kt)


def criterion_value(kind, P, d, sigma2, theta0=None):
    """Value of criterion ``kind`` at kernel matrix ``P``.

    SUREg refuses ill-conditioned designs (Gram condition above 1e12) with
    :class:`~regkern.errors.IllConditionedError`; the other kinds work through
    ``H`` and do not need ``(Phi^T Phi)^{-1}``.
    """
    kind = Criterion.parse(kind)
    theta0 = _theta0(kind, theta0, d.n)
    return float(_value(kind, derived_quantities(P, d, sigma2), theta0))


def criterion_grad_P(kind, P, d, sigma2, theta0=None):
    """Matrix derivative ``dC/dP`` with the elements of ``P`` treated independently."""
    kind = Criterion.parse(kind)
    theta0 = _theta0(kind, theta0, d.n)
    return _grad(kind, derived_quantities(P, d, sigma2), theta0)


def criterion_grad_P_rewritten(kind, P, d, sigma2, theta0=None):
    """``dC/dP`` in the form built on ``S = P + sigma2 (Phi^T Phi)^{-1}``.

    Mathematically equal to :func:`criterion_grad_P` but exposes the common
    structure: the data-driven kinds carry ``S - theta_LS theta_LS^T`` where
    the oracle kinds carry ``P - theta0 theta0^T``. Needs an invertible Gram
    matrix.
    """
    kind = Criterion.parse(kind)
    theta0 = _theta0(kind, theta0, d.n)
    q = derived_quantities(P, d, sigma2)
    s4 = q.sigma2**2
    Si = q.S_inv
    SiT = Si.T
    Gi = q.gram_inv
    if kind.oracle:
        target = np.outer(theta0, theta0)
        inner = q.P - target
    else:
        target = np.outer(q.theta_ls, q.theta_ls)
        inner = q.S - target
    if kind in (Criterion.MSEG, Criterion.SUREG):
        return 2.0 * s4 * SiT @ Gi @ Gi @ Si @ inner @ SiT
    if kind in (Criterion.MSEY, Criterion.SUREY):
        return 2.0 * s4 * SiT @ Gi @ Si @ inner @ SiT
    if kind is Criterion.EEB:
        return SiT @ (q.P.T - target) @ SiT
    return SiT @ (q.S.T - target) @ SiT


def criterion_value_and_grad_eta(kind, spec, d, sigma2, theta0=None):
    """Criterion value at ``P(eta)`` and its gradient with respect to ``eta``.

    Component ``i`` of the gradient is ``Tr(dC/dP (dP/d eta_i)^T)``.
    """
    kind = Criterion.parse(kind)
    theta0 = _theta0(kind, theta0, d.n)
    q = derived_quantities(kernel_matrix(spec), d, sigma2)
    g = _grad(kind, q, theta0)
    return float(_value(kind, q, theta0)), contract_gradient(spec, g)


def criterion_grad_eta(kind, spec, d, sigma2, theta0=None):
    """Gradient of ``C(P(eta))`` with respect to the kernel hyperparameters."""
    return criterion_value_and_grad_eta(kind, spec, d, sigma2, theta0)[1]


def surey_sureg_relation_check(P, d, sigma2):
    """Residual of the identity linking SUREy to the SUREg ingredients.

    ``F_Sy = Tr([(tLS - tR)(tLS - tR)^T + sigma2 (2 R^{-1} - G^{-1})] G)
    - (b^T G^{-1} b - Y^T Y - n sigma2)`` where the bracketed constant does not
    depend on ``P``. Returns the absolute residual, or ``None`` when ``P`` is
    singular and ``R`` is undefined.
    """
    q = derived_quantities(P, d, sigma2)
    if q.R is None:
        return None
    G, Gi, s2 = q.gram, q.gram_inv, q.sigma2
    e = q.theta_ls - q.theta_r
    Ri = np.linalg.inv(q.R)
    M = np.outer(e, e) + s2 * (2.0 * Ri - Gi)
    rhs = float(np.sum(M * G)) - (float(q.phiTy @ q.theta_ls) - q.yTy - q.n * s2)
    return abs(_value(Criterion.SUREY, q, None) - rhs)


# names used by external callers
CriterionKind = Criterion
surey_surug_relation_check = surey_sureg_relation_check

"""Parameterized kernel matrices ``P(eta)`` and their derivatives.

Families (indices ``k, j = 1..n``)::

    SS        c (alpha^(k+j+max(k,j)) / 2 - alpha^(3 max(k,j)) / 6)    eta = [c, alpha]
    DC        c alpha^((k+j)/2) rho^|k-j|                              eta = [c, alpha, rho]
    TC        c alpha^max(k,j)                                         eta = [c, alpha]
    Ridge     eta I                                                    eta = [eta]
    Diagonal  diag(eta_1, ..., eta_n)                                  eta = [eta_1..eta_n]

Only the natural parameterization lives here; search-space transforms
belong to :mod:`regkern.hyperopt`.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._linalg import check_psd
from .errors import DomainError

FAMILIES = ("SS", "DC", "TC", "Ridge", "Diagonal")

_ALIASES = {f.lower(): f for f in FAMILIES}
_ALIASES["diag"] = "Diagonal"

SCALE_BOX = (1e-8, 1e8)
UNIT_MARGIN = 1e-6
NONNEG_BOX = (0.0, 1e8)


def canonical_family(family):
    try:
        return _ALIASES[str(family).lower()]
    except KeyError:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {FAMILIES}") from None


def parameter_names(family, n):
    family = canonical_family(family)
    if family in ("SS", "TC"):
        return ("c", "alpha")
    if family == "DC":
        return ("c", "alpha", "rho")
    if family == "Ridge":
        return ("eta",)
    return tuple(f"eta_{i + 1}" for i in range(n))


def default_omega(family, n):
    """Feasible box as a ``(p, 2)`` array of ``[low, high]`` rows.

    Scale and decay parameters stay strictly away from the degenerate
    boundary (``c = 0``, ``alpha in {0, 1}``, ``|rho| = 1``); ridge and
    diagonal scales may reach zero.
    """
    family = canonical_family(family)
    alpha = (UNIT_MARGIN, 1.0 - UNIT_MARGIN)
    if family in ("SS", "TC"):
        rows = [SCALE_BOX, alpha]
    elif family == "DC":
        rows = [SCALE_BOX, alpha, (-1.0 + UNIT_MARGIN, 1.0 - UNIT_MARGIN)]
    elif family == "Ridge":
        rows = [NONNEG_BOX]
    else:
        rows = [NONNEG_BOX] * n
    return np.array(rows, dtype=float)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Kernel family, hyperparameter vector and feasible box."""

    family: str
    eta: np.ndarray
    n: int
    omega: np.ndarray = None

    def __post_init__(self):
        family = canonical_family(self.family)
        n = int(self.n)
        if n < 1:
            raise ValueError(f"kernel dimension must be positive, got {n}")
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float)).copy()
        p = len(parameter_names(family, n))
        if eta.shape != (p,):
            raise ValueError(f"{family} kernel needs {p} hyperparameters, got {eta.shape}")
        omega = default_omega(family, n) if self.omega is None else np.array(self.omega, dtype=float)
        if omega.shape != (p, 2) or np.any(omega[:, 0] > omega[:, 1]):
            raise ValueError(f"omega must be a ({p}, 2) array of [low, high] rows")
        if np.any(~np.isfinite(eta)) or np.any(eta < omega[:, 0]) or np.any(eta > omega[:, 1]):
            raise DomainError(f"eta={eta} lies outside the feasible box for {family}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "omega", omega)

    @property
    def p(self):
        return self.eta.size

    @property
    def names(self):
        return parameter_names(self.family, self.n)

    def with_eta(self, eta):
        return KernelSpec(self.family, eta, self.n, self.omega)

    def to_dict(self):
        return {"family": self.family, "eta": [float(x) for x in self.eta], "n": self.n}

    @classmethod
    def from_dict(cls, d):
        family = canonical_family(d["family"])
        n = int(d["n"])
        eta = d.get("eta")
        if eta is None:
            eta = default_eta(family, n)
        return cls(family, eta, n, d.get("omega"))


def default_eta(family, n):
    """A feasible, moderately regularizing starting point."""
    family = canonical_family(family)
    if family in ("SS", "TC"):
        return np.array([1.0, 0.9])
    if family == "DC":
        return np.array([1.0, 0.9, 0.0])
    if family == "Ridge":
        return np.array([1.0])
    return np.ones(n)


@lru_cache(maxsize=16)
def _grid(n):
    k = np.arange(1, n + 1)
    K, J = np.meshgrid(k, k, indexing="ij")
    M = np.maximum(K, J)
    D = np.abs(K - J)
    for a in (K, J, M, D):
        a.setflags(write=False)
    return K, J, M, D


def _powers(x, top):
    """``x**j`` for ``j = 0..top`` as a vector (exact zero powers for ``x = 0``)."""
    return np.power(x, np.arange(top + 1, dtype=float))


def _tc(c, alpha, n):
    _, _, M, _ = _grid(n)
    v = _powers(alpha, n)
    A = v[M]
    dv = np.zeros(n + 1)
    dv[1:] = np.arange(1, n + 1) * v[:-1]  # d alpha^m / d alpha
    return c * A, [A, c * dv[M]]


def _dc(c, alpha, rho, n):
    _, _, _, D = _grid(n)
    k = np.arange(1, n + 1, dtype=float)
    h = np.power(alpha, 0.5 * k)  # alpha^(k/2)
    As = np.outer(h, h)
    r = _powers(rho, n)
    Rd = r[D]
    base = As * Rd
    s = 0.5 * (k[:, None] + k[None, :])
    dr = np.zeros(n + 1)
    dr[1:] = np.arange(1, n + 1) * r[:-1]
    return c * base, [base, c * (s / alpha) * base, c * As * dr[D]]


def _ss(c, alpha, n):
    K, J, M, _ = _grid(n)
    v = _powers(alpha, 3 * n)
    e1 = K + J + M
    e2 = 3 * M
    base = 0.5 * v[e1] - v[e2] / 6.0
    dv = np.zeros(3 * n + 1)
    dv[1:] = np.arange(1, 3 * n + 1) * v[:-1]
    dalpha = 0.5 * dv[e1] - dv[e2] / 6.0
    return c * base, [base, c * dalpha]


def _evaluate(spec):
    family, eta, n = spec.family, spec.eta, spec.n
    if family == "TC":
        return _tc(eta[0], eta[1], n)
    if family == "DC":
        return _dc(eta[0], eta[1], eta[2], n)
    if family == "SS":
        return _ss(eta[0], eta[1], n)
    if family == "Ridge":
        eye = np.eye(n)
        return eta[0] * eye, [eye]
    grads = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        grads.append(E)
    return np.diag(eta), grads


def kernel_matrix(spec, check=True):
    """The ``n x n`` kernel matrix ``P(eta)``; exactly symmetric by construction.

    With ``check=True`` a non-PSD result (rounding in extreme DC settings)
    raises :class:`~regkern.errors.InvalidKernelError`.
    """
    if spec.family in ("Ridge", "Diagonal"):
        # nonnegative by the box, so PSD without a factorization
        return np.diag(np.broadcast_to(spec.eta, (spec.n,))).astype(float)
    P, _ = _evaluate(spec)
    if check:
        check_psd(P)
    return P


def kernel_gradient(spec, i):
    """Elementwise derivative ``dP / d eta_i``."""
    if not 0 <= i < spec.p:
        raise IndexError(f"coordinate {i} out of range for {spec.family} (p={spec.p})")
    return _evaluate(spec)[1][i]


def contract_gradient(spec, G):
    """``[sum(G * dP/d eta_i) for each i]`` without forming every ``dP/d eta_i``."""
    G = np.asarray(G, dtype=float)
    if spec.family == "Ridge":
        return np.array([np.trace(G)])
    if spec.family == "Diagonal":
        return np.diag(G).copy()
    return np.array([np.sum(G * D) for D in _evaluate(spec)[1]])


def kernel_matrix_and_gradients(spec, check=True):
    """``P(eta)`` together with the list of all ``dP / d eta_i``."""
    P, grads = _evaluate(spec)
    if check:
        check_psd(P)
    return P, grads

"""Small dense linear-algebra helpers used across the package."""

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedError, InvalidKernelError

COND_LIMIT = 1e12
PSD_RTOL = 1e-10


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {a.shape}")
    return a


def symmetrize(a):
    return 0.5 * (a + a.T)


def spd_condition(a):
    """2-norm condition number of a symmetric matrix; ``inf`` if not positive definite."""
    w = np.linalg.eigvalsh(symmetrize(a))
    if w[0] <= 0.0:
        return np.inf
    return float(w[-1] / w[0])


def check_psd(P, what="kernel matrix"):
    """Raise :class:`InvalidKernelError` unless ``min eig(P) >= -1e-10 * ||P||_F``.

    A shifted Cholesky attempt is tried first since it is several times cheaper
    than an eigendecomposition; eigenvalues are only computed on failure to
    decide and to report.
    """
    Ps = symmetrize(P)
    scale = np.linalg.norm(Ps)
    if scale == 0.0:
        return
    if not np.all(np.isfinite(Ps)):
        raise InvalidKernelError(f"{what} has non-finite entries")
    try:
        np.linalg.cholesky(Ps + (PSD_RTOL * scale) * np.eye(Ps.shape[0]))
        return
    except np.linalg.LinAlgError:
        pass
    lam = np.linalg.eigvalsh(Ps)[0]
    if lam < -PSD_RTOL * scale:
        raise InvalidKernelError(
            f"{what} is not positive semidefinite: smallest eigenvalue {lam:.3e}"
        )


def spd_factor(a, what="matrix", limit=COND_LIMIT):
    """Cholesky factor of a symmetric positive definite matrix with a condition guard."""
    a = symmetrize(a)
    cond = spd_condition(a)
    if not cond < limit:
        raise IllConditionedError(f"{what} is ill-conditioned", cond)
    return sla.cho_factor(a, lower=True, check_finite=False)


def spd_solve(factor, b):
    return sla.cho_solve(factor, b, check_finite=False)


def spd_inverse(a, what="matrix", limit=COND_LIMIT):
    f = spd_factor(a, what, limit)
    return spd_solve(f, np.eye(a.shape[0]))


def general_inverse(a, what="matrix", limit=COND_LIMIT):
    """Inverse of a general square matrix with a 1-norm condition guard."""
    a = as_matrix(a, what)
    cond = np.linalg.cond(a, 1) if np.all(np.isfinite(a)) else np.inf
    if not cond < limit:
        raise IllConditionedError(f"{what} is singular or ill-conditioned", cond)
    return np.linalg.inv(a)

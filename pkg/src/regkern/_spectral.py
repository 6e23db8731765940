"""Scale-profiled evaluation of all criteria for kernels ``P = c P1(shape)``.

With ``P1 = L L^T`` and ``L^T Phi^T Phi L = W diag(lam) W^T`` put
``B = L W`` and ``d_i(c) = c / (c lam_i + sigma2)``. Then

    Phi^T Q^{-1} Y  projects to  z = B^T Phi^T Y,
    P Phi^T Q^{-1}  = B diag(d) B^T Phi^T,

and every criterion is a closed-form function of ``c`` costing ``O(r^2)``
after one ``O(n^3)`` decomposition per shape.
"""

import numpy as np

from .criteria import Criterion

EIG_RTOL = 1e-13


class ShapeSpectrum:
    """Spectral summary of one kernel shape ``P1`` on a dataset."""

    def __init__(self, P1, d, sigma2, theta0=None):
        mu, U = np.linalg.eigh(0.5 * (P1 + P1.T))
        top = mu[-1] if mu.size else 0.0
        keep = mu > EIG_RTOL * max(top, 0.0)
        L = U[:, keep] * np.sqrt(mu[keep])
        M = L.T @ d.gram @ L
        lam, W = np.linalg.eigh(0.5 * (M + M.T))
        lam = np.maximum(lam, 0.0)
        B = L @ W
        self.r = lam.size
        self.lam = lam
        self.sigma2 = float(sigma2)
        self.N, self.n = d.N, d.n
        self.yTy = d.yTy
        self.z = B.T @ d.phiTy
        self.BtB = B.T @ B
        self.bn = np.diag(self.BtB).copy()
        self._d = d
        self._B = B
        self.theta0 = None
        if theta0 is not None:
            t = np.asarray(theta0, dtype=float).ravel()
            self.theta0 = t
            self.a = B.T @ (d.gram @ t)
            self.Bt0 = B.T @ t
            self.t0Gt0 = float(t @ d.gram @ t)
            self.t0t0 = float(t @ t)
        self._ls = None

    def _ls_parts(self):
        if self._ls is None:
            d = self._d
            tls = d.theta_ls
            gi_trace = float(np.trace(np.linalg.inv(d.gram)))
            self._ls = (self._B.T @ tls, float(tls @ tls), gi_trace)
        return self._ls

    def values(self, kind, c):
        """Criterion ``kind`` at every scale in the array ``c``."""
        kind = Criterion.parse(kind)
        c = np.atleast_1d(np.asarray(c, dtype=float))[:, None]
        s2 = self.sigma2
        lam = self.lam[None, :]
        den = c * lam + s2
        D = c / den
        if kind in (Criterion.EB, Criterion.EEB):
            logdet = (self.N - self.r) * np.log(s2) + np.sum(np.log(den), axis=1)
        if kind is Criterion.EB:
            return (self.yTy - D @ (self.z**2)) / s2 + logdet
        if kind is Criterion.SUREY:
            z2 = self.z**2
            return self.yTy - 2.0 * (D @ z2) + (D**2 * lam) @ z2 + 2.0 * s2 * np.sum(D * lam, axis=1)
        if kind is Criterion.SUREG:
            btl, tls2, gi_trace = self._ls_parts()
            Dz = D * self.z[None, :]
            quad = np.einsum("ki,ij,kj->k", Dz, self.BtB, Dz)
            return tls2 - 2.0 * (Dz @ btl) + quad + s2 * (2.0 * (D @ self.bn) - gi_trace)
        if self.theta0 is None:
            raise ValueError(f"{kind.value} needs theta0")
        a2 = self.a**2
        if kind is Criterion.EEB:
            return (self.t0Gt0 - D @ a2) / s2 + self.N - np.sum(D * lam, axis=1) + logdet
        if kind is Criterion.MSEY:
            return ((D**2 * lam) @ a2 - 2.0 * (D @ a2) + self.t0Gt0 + self.N * s2
                    + s2 * np.sum(D**2 * lam**2, axis=1))
        Da = D * self.a[None, :]
        quad = np.einsum("ki,ij,kj->k", Da, self.BtB, Da)
        return quad - 2.0 * (Da @ self.Bt0) + self.t0t0 + s2 * ((D**2 * lam) @ self.bn)

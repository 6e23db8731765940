"""Where the criteria point as the data length grows.

For a ridge kernel with an anisotropic input covariance the three limit
functionals have distinct minimizers; with an isotropic covariance they
coincide at ``theta0^T theta0 / n``.
"""

import numpy as np

from regkern import KernelSpec, LimitSpec, limit_eta

theta0 = np.array([2.0, 1.0])
for Sigma in (np.diag([1.0, 4.0]), 3.0 * np.eye(2)):
    ls = LimitSpec(Sigma, theta0, 0.7, KernelSpec("Ridge", [1.0], 2))
    vals = {k: limit_eta(k, ls)[0] for k in ("g", "y", "B")}
    print(f"Sigma diag {np.diag(Sigma)}: " + ", ".join(f"eta*_{k} = {v:.4f}" for k, v in vals.items()))

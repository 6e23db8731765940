"""Numeric hyperparameter search against the closed forms on an orthonormal design.

With ``Phi^T Phi = N I`` the ridge and diagonal kernels have explicit
optimal hyperparameters. This script draws one such design and prints the
numeric and closed-form values side by side.
"""

import numpy as np

from regkern import Dataset, KernelSpec, estimate_hyperparameter
from regkern.criteria import ALL_CRITERIA
from regkern.hyperopt import closed_form_estimate

N, n, sigma2 = 400, 6, 1.0
rng = np.random.default_rng(0)
Q, _ = np.linalg.qr(rng.standard_normal((N, n)))
Phi = np.sqrt(N) * Q
theta0 = 0.3 * rng.standard_normal(n)
d = Dataset(Phi @ theta0 + np.sqrt(sigma2) * rng.standard_normal(N), Phi)

for family, eta0 in (("Ridge", [1.0]), ("Diagonal", np.ones(n))):
    spec = KernelSpec(family, eta0, n)
    print(family)
    for kind in ALL_CRITERIA:
        num = estimate_hyperparameter(kind, spec, d, sigma2, theta0).eta_hat
        ref = closed_form_estimate(kind, family, d, sigma2, theta0)
        print(f"  {kind.value:>5}  max gap {np.abs(num - ref).max():.1e}  eta {np.round(num, 4)}")

"""Estimate one impulse response with all six criteria and compare fits.

Run with ``python3 demos/estimator_comparison.py``. A random stable system is
simulated with white input, TC hyperparameters are tuned by each criterion
and the resulting RLS estimates are scored against the truth. The SURE criteria
may settle on the upper scale bound and let the decay rate do the
regularizing.
"""

import numpy as np

from regkern import Dataset, KernelSpec, generate_input, generate_test_system
from regkern.criteria import ALL_CRITERIA
from regkern.hyperopt import estimate_profiled, OptimizerConfig

n, N, seed = 50, 500, 3
rng = np.random.default_rng(seed)
theta0 = generate_test_system(30, n, seed=seed).theta0
u = generate_input("IT2", N, rng)
d0 = Dataset.from_io(u, np.zeros(N), n)
sigma2 = np.var(d0.Phi @ theta0) / 5.0  # SNR of 5
d = Dataset(d0.Phi @ theta0 + np.sqrt(sigma2) * rng.standard_normal(N), d0.Phi)

spec = KernelSpec("TC", [1.0, 0.9], n)
reports = estimate_profiled(list(ALL_CRITERIA), spec, d, sigma2, theta0, OptimizerConfig(restarts=4, seed=seed))

print(f"{'criterion':>9}  {'c':>10}  {'alpha':>7}  {'fit':>6}")
for kind, rep in reports.items():
    c, alpha = rep.eta_hat
    print(f"{kind.value:>9}  {c:10.4g}  {alpha:7.4f}  {rep.fit:6.2f}")

"""Input signals IT1-IT4 and the exact autocorrelation of each.

IT1  white Gaussian noise through a 51-tap Hamming-windowed low-pass FIR
     with cutoff 0.6 (relative to Nyquist)
IT2  unit-variance white Gaussian noise
IT3  white noise through 1 / (1 - a q^-1)^2 with a = 0.95
IT4  the same filter with a = 0.05

Filtered inputs start from zero state and are rescaled to unit sample
variance.
"""

import numpy as np
import scipy.signal as ssig
from scipy.linalg import toeplitz

INPUT_KINDS = ("IT1", "IT2", "IT3", "IT4")
LOWPASS_TAPS = 51
LOWPASS_CUTOFF = 0.6
POLES = {"IT3": 0.95, "IT4": 0.05}


def canonical_input(kind):
    k = str(kind).upper()
    if k not in INPUT_KINDS:
        raise ValueError(f"unknown input kind {kind!r}; expected one of {INPUT_KINDS}")
    return k


def lowpass_taps():
    return ssig.firwin(LOWPASS_TAPS, LOWPASS_CUTOFF)


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_input(kind, N, seed=None):
    """Input samples ``u(0), ..., u(N-1)`` of the given kind."""
    kind = canonical_input(kind)
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    e = as_generator(seed).standard_normal(N)
    if kind == "IT2":
        return e
    if kind == "IT1":
        x = ssig.lfilter(lowpass_taps(), [1.0], e)
    else:
        a = POLES[kind]
        x = ssig.lfilter([1.0], [1.0, -2.0 * a, a * a], e)
    sd = x.std()
    return x / sd if sd > 0 else x


def autocorrelation(kind, lags):
    """Normalized stationary autocorrelation ``r(0..lags-1)`` with ``r(0) = 1``."""
    kind = canonical_input(kind)
    k = np.arange(int(lags), dtype=float)
    if kind == "IT2":
        return (k == 0).astype(float)
    if kind == "IT1":
        h = lowpass_taps()
        full = np.correlate(h, h, mode="full")[h.size - 1:]
        r = np.zeros(k.size)
        m = min(k.size, full.size)
        r[:m] = full[:m]
        return r / full[0]
    a = POLES[kind]
    # impulse response (j + 1) a^j of the double pole
    return a**k * ((1.0 + a * a) + k * (1.0 - a * a)) / (1.0 + a * a)


def input_covariance(kind, n):
    """Limit of ``Phi^T Phi / N`` for unit-variance stationary input of the given kind."""
    return toeplitz(autocorrelation(kind, n))

"""Invariants checked over randomly generated instances."""

import numpy as np
from hypothesis import given, settings, strategies as st

from oracles import dense_value, random_psd
from regkern import (
    Dataset,
    KernelSpec,
    build_regressor,
    closed_form_diagonal,
    closed_form_ridge,
    criterion_grad_P,
    criterion_grad_P_rewritten,
    criterion_value,
    fit_metric,
    kernel_matrix,
    msey_exact,
    mseg_exact,
    rls_estimate,
    w_b,
)
from regkern.criteria import ALL_CRITERIA
from regkern.hyperopt import BoxTransform
from regkern.kernels import default_omega, parameter_names

SETTINGS = settings(max_examples=30, deadline=None)
seeds = st.integers(0, 2**32 - 1)
kinds = st.sampled_from([c.value for c in ALL_CRITERIA])


def draw_instance(seed, n=4, N=30):
    rng = np.random.default_rng(seed)
    Phi = rng.standard_normal((N, n))
    t0 = rng.standard_normal(n)
    s2 = float(rng.uniform(0.05, 2.0))
    Y = Phi @ t0 + np.sqrt(s2) * rng.standard_normal(N)
    rank = int(rng.integers(1, n + 1))
    return Dataset(Y, Phi), random_psd(rng, n, rank), t0, s2


@SETTINGS
@given(seed=seeds, kind=kinds)
def test_fast_equals_dense(seed, kind):
    d, P, t0, s2 = draw_instance(seed)
    fast = criterion_value(kind, P, d, s2, t0)
    ref = dense_value(kind, P, d.Phi, d.Y, s2, t0)
    assert abs(fast - ref) <= 1e-8 * max(1.0, abs(ref))


@SETTINGS
@given(seed=seeds, kind=kinds)
def test_gradient_forms_agree(seed, kind):
    d, P, t0, s2 = draw_instance(seed)
    P = P + 0.05 * np.eye(4)
    a = criterion_grad_P(kind, P, d, s2, t0)
    b = criterion_grad_P_rewritten(kind, P, d, s2, t0)
    assert np.abs(a - b).max() <= 1e-7 * max(1.0, np.abs(a).max())


@SETTINGS
@given(seed=seeds)
def test_mse_lower_bounds(seed):
    d, P, t0, s2 = draw_instance(seed)
    assert mseg_exact(P, d.Phi, t0, s2) >= 0
    assert msey_exact(P, d.Phi, t0, s2) >= d.N * s2 * (1 - 1e-12)


@SETTINGS
@given(seed=seeds, c=st.floats(0.01, 100.0))
def test_rls_joint_scaling(seed, c):
    """Scaling P and sigma2 by the same factor leaves the estimate unchanged."""
    d, P, _, s2 = draw_instance(seed)
    a = rls_estimate(d, P, s2)
    b = rls_estimate(d, c * P, c * s2)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-10)


@SETTINGS
@given(seed=seeds, c=st.floats(0.1, 10.0))
def test_eb_joint_scaling(seed, c):
    d, P, _, s2 = draw_instance(seed)
    base = criterion_value("EB", P, d, s2)
    q = d.yTy - d.phiTy @ rls_estimate(d, P, s2)
    # Y^T Q^-1 Y scales by 1/c, log det Q shifts by N log c
    expect = q / s2 / c + (base - q / s2) + d.N * np.log(c)
    assert abs(criterion_value("EB", c * P, d, c * s2) - expect) <= 1e-9 * max(1.0, abs(expect))


@SETTINGS
@given(family=st.sampled_from(["TC", "SS", "DC"]), n=st.integers(1, 40),
       c=st.floats(1e-3, 1e3), alpha=st.floats(0.05, 0.99), rho=st.floats(-0.95, 0.95))
def test_kernel_psd(family, n, c, alpha, rho):
    eta = [c, alpha] + ([rho] if family == "DC" else [])
    P = kernel_matrix(KernelSpec(family, eta, n), check=False)
    assert np.array_equal(P, P.T)
    assert np.linalg.eigvalsh(P)[0] >= -1e-10 * np.abs(P).max()


@SETTINGS
@given(family=st.sampled_from(["TC", "DC", "Ridge", "Diagonal"]), seed=seeds)
def test_transform_roundtrip(family, seed):
    n = 3
    tr = BoxTransform(default_omega(family, n), parameter_names(family, n))
    rng = np.random.default_rng(seed)
    z = tr.sample(1, rng)[0]
    eta = tr.to_eta(z)
    np.testing.assert_allclose(tr.to_eta(tr.to_z(eta)), eta, rtol=1e-9)


@SETTINGS
@given(g=st.lists(st.floats(-10, 10), min_size=1, max_size=8), N=st.integers(1, 1000),
       s2=st.floats(0.0, 10.0))
def test_closed_forms_nonnegative_and_monotone(g, N, s2):
    g = np.array(g)
    r = closed_form_ridge(g, g.size, N, s2)
    dg = closed_form_diagonal(g, N, s2)
    assert r >= 0 and np.all(dg >= 0)
    assert closed_form_ridge(g, g.size, N, s2 + 1.0) <= r
    assert np.all(closed_form_diagonal(g, N, s2 + 1.0) <= dg)


@SETTINGS
@given(s=st.floats(0.1, 10.0), n=st.integers(1, 6), eta=st.floats(0.01, 100.0))
def test_wb_ridge_bound(s, n, eta):
    t0 = np.zeros(n)
    t0[0] = np.sqrt(s)
    assert w_b(eta * np.eye(n), t0) >= n + n * np.log(s / n) - 1e-9


@SETTINGS
@given(seed=seeds, a=st.floats(0.1, 10.0))
def test_fit_scale_invariant(seed, a):
    rng = np.random.default_rng(seed)
    t0, th = rng.standard_normal(6), rng.standard_normal(6)
    assert abs(fit_metric(a * th, a * t0) - fit_metric(th, t0)) <= 1e-9 * max(1.0, abs(fit_metric(th, t0)))


@SETTINGS
@given(seed=seeds, n=st.integers(1, 6), extra=st.integers(0, 20))
def test_regressor_linear(seed, n, extra):
    rng = np.random.default_rng(seed)
    N = n + extra
    u, v = rng.standard_normal(N), rng.standard_normal(N)
    np.testing.assert_allclose(build_regressor(2 * u - v, n, N),
                               2 * build_regressor(u, n, N) - build_regressor(v, n, N), atol=1e-12)

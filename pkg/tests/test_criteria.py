"""Criterion values and gradients against dense and finite-difference oracles."""

import numpy as np
import pytest

from oracles import dense_Q, dense_value, fd_grad_matrix, fd_grad_vector, orthonormal_design, random_instance, random_psd
from regkern import (
    Criterion,
    Dataset,
    KernelSpec,
    criterion_grad_eta,
    criterion_grad_P,
    criterion_grad_P_rewritten,
    criterion_value,
    derived_quantities,
    mseg_exact,
    msey_exact,
    surey_sureg_relation_check,
)
from regkern.criteria import ALL_CRITERIA, criterion_value_and_grad_eta, surey_surug_relation_check
from regkern.errors import IllConditionedError, MissingTruthError
from regkern.hyperopt import closed_form_ridge

KINDS = [c.value for c in ALL_CRITERIA]
SCALAR = Dataset([2.0], [[1.0]])


def instance(seed, n=5, N=40, rank=None):
    rng = np.random.default_rng(seed)
    Phi, Y, t0, s2 = random_instance(rng, n, N)
    return Dataset(Y, Phi), random_psd(rng, n, rank), t0, s2


class TestParse:
    def test_aliases(self):
        assert Criterion.parse("sg") is Criterion.SUREG
        assert Criterion.parse("ml") is Criterion.EB
        assert Criterion.parse("msey") is Criterion.MSEY
        assert {c.value for c in ALL_CRITERIA if c.oracle} == {"MSEg", "MSEy", "EEB"}
        with pytest.raises(ValueError):
            Criterion.parse("xyz")


class TestDerived:
    def test_scalar(self):
        q = derived_quantities([[1.0]], Dataset([1.0], [[1.0]]), 1.0)
        assert q.S[0, 0] == pytest.approx(2.0)
        assert q.H[0, 0] == pytest.approx(2.0)
        assert q.R[0, 0] == pytest.approx(2.0)

    def test_isotropic(self):
        N, n, s2 = 50, 4, 0.3
        Phi = orthonormal_design(np.random.default_rng(0), N, n)
        q = derived_quantities(np.eye(n), Dataset(np.ones(N), Phi), s2)
        np.testing.assert_allclose(q.S, (1 + s2 / N) * np.eye(n), atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_phi_q_y_two_ways(self, seed):
        d, P, _, s2 = instance(seed, N=150)
        q = derived_quantities(P, d, s2)
        dense = d.Phi.T @ np.linalg.solve(dense_Q(P, d.Phi, s2), d.Y)
        np.testing.assert_allclose(q.S_inv @ d.theta_ls, dense, rtol=1e-9)
        np.testing.assert_allclose(q.w, dense, rtol=1e-9)
        assert max(q.identity_residuals().values()) < 1e-9

    def test_singular_kernel(self):
        d, _, _, s2 = instance(1)
        q = derived_quantities(np.zeros((5, 5)), d, s2)
        assert q.R is None
        np.testing.assert_array_equal(q.theta_r, np.zeros(5))


class TestValues:
    def test_eb_scalar(self):
        assert criterion_value("EB", [[1.0]], SCALAR, 1.0) == pytest.approx(2.0 + np.log(2.0), abs=1e-12)

    def test_surey_zero_kernel(self):
        d, _, _, s2 = instance(2)
        assert criterion_value("SUREy", np.zeros((5, 5)), d, s2) == pytest.approx(d.yTy, rel=1e-13)

    @pytest.mark.parametrize("seed", range(20))
    def test_mse_matches_model(self, seed):
        d, P, t0, s2 = instance(seed)
        assert criterion_value("MSEg", P, d, s2, t0) == pytest.approx(mseg_exact(P, d.Phi, t0, s2), rel=1e-10)
        assert criterion_value("MSEy", P, d, s2, t0) == pytest.approx(msey_exact(P, d.Phi, t0, s2), rel=1e-10)

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("rank", [None, 2])
    def test_dense(self, kind, rank):
        d, P, t0, s2 = instance(7, n=6, N=120, rank=rank)
        fast = criterion_value(kind, P, d, s2, t0)
        ref = dense_value(kind, P, d.Phi, d.Y, s2, t0)
        assert fast == pytest.approx(ref, rel=1e-9)

    def test_oracle_needs_truth(self):
        d, P, _, s2 = instance(0)
        with pytest.raises(MissingTruthError):
            criterion_value("EEB", P, d, s2)

    def test_sureg_refuses_ill_conditioned(self):
        Phi = np.ones((10, 2))
        Phi[0, 1] += 1e-10
        with pytest.raises(IllConditionedError):
            criterion_value("SUREg", np.eye(2), Dataset(np.ones(10), Phi), 1.0)


class TestGradP:
    def test_eb_scalar(self):
        g = criterion_grad_P("EB", [[1.0]], SCALAR, 1.0)
        assert g[0, 0] == pytest.approx(-0.5, abs=1e-14)

    @pytest.mark.parametrize("kind", KINDS)
    def test_finite_difference(self, kind):
        d, P, t0, s2 = instance(3)
        g = criterion_grad_P(kind, P, d, s2, t0)
        fd = fd_grad_matrix(lambda A: criterion_value(kind, A, d, s2, t0), P)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())

    @pytest.mark.parametrize("kind", ["MSEg", "MSEy", "EEB"])
    def test_oracle_stationary(self, kind):
        d, _, t0, s2 = instance(4)
        g = criterion_grad_P(kind, np.outer(t0, t0), d, s2, t0)
        scale = np.abs(criterion_grad_P(kind, np.eye(5), d, s2, t0)).max()
        assert np.abs(g).max() <= 1e-9 * scale

    def test_nonsymmetric_kernel(self):
        d, P, t0, s2 = instance(5)
        P = P + 0.05 * np.triu(np.ones((5, 5)), 1)
        for kind in KINDS:
            g = criterion_grad_P(kind, P, d, s2, t0)
            fd = fd_grad_matrix(lambda A: criterion_value(kind, A, d, s2, t0), P)
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


class TestRewritten:
    def test_eb_scalar(self):
        g = criterion_grad_P_rewritten("EB", [[1.0]], SCALAR, 1.0)
        assert g[0, 0] == pytest.approx(-0.5, abs=1e-14)

    def test_sure_ratio(self):
        d = Dataset([1.0, 3.0, -0.5], [[1.0], [2.0], [0.5]])
        gy = criterion_grad_P_rewritten("SUREy", [[0.7]], d, 0.4)
        gg = criterion_grad_P_rewritten("SUREg", [[0.7]], d, 0.4)
        assert gy[0, 0] / gg[0, 0] == pytest.approx(d.gram[0, 0], rel=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("seed", range(3))
    def test_equivalence(self, kind, seed):
        d, P, t0, s2 = instance(seed + 10)
        a = criterion_grad_P(kind, P, d, s2, t0)
        b = criterion_grad_P_rewritten(kind, P, d, s2, t0)
        np.testing.assert_allclose(b, a, rtol=1e-8, atol=1e-10 * np.abs(a).max())


FAMILY_ETA = {"TC": [0.8, 0.7], "SS": [1.5, 0.8], "DC": [0.9, 0.75, 0.3], "Ridge": [0.6]}


class TestGradEta:
    @pytest.mark.parametrize("family", ["TC", "SS", "DC", "Ridge", "Diagonal"])
    @pytest.mark.parametrize("kind", KINDS)
    def test_finite_difference(self, family, kind):
        d, _, t0, s2 = instance(21, n=6, N=60)
        eta = np.asarray(FAMILY_ETA.get(family, np.linspace(0.2, 1.2, 6)))
        spec = KernelSpec(family, eta, 6)
        g = criterion_grad_eta(kind, spec, d, s2, t0)
        fd = fd_grad_vector(lambda e: criterion_value_and_grad_eta(kind, spec.with_eta(e), d, s2, t0)[0], eta)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7 * max(np.abs(fd).max(), 1.0))

    def test_ridge_stationary_at_closed_form(self):
        rng = np.random.default_rng(0)
        N, n = 200, 6
        Phi = orthonormal_design(rng, N, n)
        Y = Phi @ rng.standard_normal(n) + rng.standard_normal(N)
        d = Dataset(Y, Phi)
        eta = closed_form_ridge(d.theta_ls, n, N, 1.0)
        assert eta > 0
        g = criterion_grad_eta("EB", KernelSpec("Ridge", [eta], n), d, 1.0)
        assert abs(g[0]) < 1e-8

    def test_surey_increasing_at_large_scale(self):
        d, _, _, s2 = instance(22, n=6, N=60)
        g = criterion_grad_eta("SUREy", KernelSpec("TC", [1e6, 0.8], 6), d, s2)
        assert g[0] > 0


class TestRelation:
    def test_scalar(self):
        assert surey_sureg_relation_check([[1.0]], SCALAR, 1.0) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_random(self, seed):
        d, P, _, s2 = instance(seed)
        assert surey_sureg_relation_check(P, d, s2) <= 1e-8 * criterion_value("SUREy", P, d, s2)

    def test_singular_skipped(self):
        d, _, _, s2 = instance(0)
        assert surey_sureg_relation_check(np.zeros((5, 5)), d, s2) is None
        assert surey_surug_relation_check is surey_sureg_relation_check


@pytest.mark.parametrize("kind,exact", [("SUREg", mseg_exact), ("SUREy", msey_exact)])
def test_sure_unbiased(kind, exact):
    rng = np.random.default_rng(0)
    n, N, s2 = 4, 30, 0.5
    Phi = rng.standard_normal((N, n))
    t0 = rng.standard_normal(n)
    P = random_psd(rng, n)
    v = np.array([criterion_value(kind, P, Dataset(Phi @ t0 + np.sqrt(s2) * rng.standard_normal(N), Phi), s2)
                  for _ in range(5000)])
    z = (v.mean() - exact(P, Phi, t0, s2)) / (v.std() / np.sqrt(v.size))
    assert abs(z) < 4

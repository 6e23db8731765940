"""Optimizer plumbing, closed forms and hyperparameter estimation."""

import numpy as np
import pytest

from oracles import orthonormal_design, random_psd
from regkern import (
    Dataset,
    KernelSpec,
    OptimizerConfig,
    closed_form_diagonal,
    closed_form_ridge,
    estimate_hyperparameter,
    mseg_exact,
    kernel_matrix,
    optimal_unconstrained_kernel,
)
from regkern.criteria import Criterion, criterion_value
from regkern.errors import ConfigError, IllConditionedError, MissingTruthError, NonConvergenceError
from regkern.hyperopt import BoxTransform, closed_form_estimate, estimate_profiled, minimize_box
from regkern.kernels import default_omega, parameter_names


def ortho_dataset(seed, N=400, n=10, s2=1.0):
    rng = np.random.default_rng(seed)
    Phi = orthonormal_design(rng, N, n)
    t0 = rng.standard_normal(n) * 0.3
    Y = Phi @ t0 + np.sqrt(s2) * rng.standard_normal(N)
    return Dataset(Y, Phi), t0, s2


def tc_dataset(seed, n=20, N=300, s2=0.05):
    rng = np.random.default_rng(seed)
    t0 = 0.8 ** np.arange(n) * np.cos(0.5 * np.arange(n))
    u = rng.standard_normal(N)
    d = Dataset.from_io(u, np.zeros(N), n)
    return Dataset(d.Phi @ t0 + np.sqrt(s2) * rng.standard_normal(N), d.Phi), t0, s2


class TestConfig:
    def test_roundtrip(self):
        cfg = OptimizerConfig(restarts=3, seed=7, method="simplex_search")
        assert OptimizerConfig.from_json(cfg.to_json()) == cfg

    @pytest.mark.parametrize("bad", [{"restarts": 0}, {"grad_tol": -1.0}, {"method": "magic"}, {"seed": -1},
                                     {"bogus": 1}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            OptimizerConfig.from_dict(bad)

    def test_method_default(self):
        assert OptimizerConfig().resolve_method(2) == "simplex_search"
        assert OptimizerConfig().resolve_method(10) == "gradient_quasi_newton"


class TestTransform:
    @pytest.mark.parametrize("family", ["TC", "DC", "Ridge", "Diagonal"])
    def test_roundtrip(self, family):
        tr = BoxTransform(default_omega(family, 3), parameter_names(family, 3))
        for z in tr.sample(10, np.random.default_rng(0)):
            np.testing.assert_allclose(tr.to_z(tr.to_eta(z)), z, rtol=1e-9, atol=1e-9)
            eta = tr.to_eta(z)
            assert np.all(eta >= tr.lo) and np.all(eta <= tr.hi)

    def test_snap_to_zero(self):
        tr = BoxTransform(default_omega("Ridge", 1), ("eta",))
        assert tr.snap(tr.zlo.copy())[0] == 0.0

    def test_jacobian(self):
        tr = BoxTransform(default_omega("DC", 3), parameter_names("DC", 3))
        z = np.array([0.3, -1.2, 0.7])
        h = 1e-6
        fd = [(tr.to_eta(z + h * e) - tr.to_eta(z - h * e))[i] / (2 * h) for i, e in enumerate(np.eye(3))]
        np.testing.assert_allclose(tr.jacobian(z), fd, rtol=1e-6)


class TestMinimizeBox:
    def test_quadratic_with_active_bound(self):
        target = np.array([0.3, -2.0])

        def f(x):
            r = x - target
            return float(r @ r), 2 * r

        omega = np.array([[0.0, 1e8], [0.0, 1e8]])
        res = minimize_box(f, omega, ("eta_1", "eta_2"), OptimizerConfig(restarts=3))
        np.testing.assert_allclose(res.eta, [0.3, 0.0], atol=1e-8)
        assert res.boundary

    def test_profiled_needs_criterion(self):
        with pytest.raises(ConfigError):
            minimize_box(lambda x: (0.0, 0 * x), np.array([[0.0, 1.0]]), ("eta",),
                         OptimizerConfig(method="profiled_scale"))


class TestClosedForms:
    def test_ridge_examples(self):
        assert closed_form_ridge([1.0, 1.0], 2, 4, 1.0) == pytest.approx(0.75)
        assert closed_form_ridge([0.1, 0.1], 2, 4, 1.0) == 0.0
        assert closed_form_ridge([1.0, 2.0], 2, 4, 0.0) == pytest.approx(2.5)

    def test_diagonal_examples(self):
        np.testing.assert_allclose(closed_form_diagonal([2.0, 0.1], 1, 1.0), [3.0, 0.0])
        np.testing.assert_array_equal(closed_form_diagonal([0.0, 0.0], 5, 1.0), [0.0, 0.0])
        np.testing.assert_allclose(closed_form_diagonal([2.0, -0.5], 5, 0.0), [4.0, 0.25])

    def test_unconstrained_kernel(self):
        np.testing.assert_array_equal(optimal_unconstrained_kernel([1.0, 2.0]), [[1, 2], [2, 4]])
        np.testing.assert_array_equal(optimal_unconstrained_kernel([0.0, 0.0]), np.zeros((2, 2)))

    def test_unconstrained_kernel_beats_random(self):
        rng = np.random.default_rng(1)
        n, N, s2 = 4, 30, 0.5
        Phi = rng.standard_normal((N, n))
        t0 = rng.standard_normal(n)
        best = mseg_exact(optimal_unconstrained_kernel(t0), Phi, t0, s2)
        for _ in range(50):
            P = random_psd(rng, n)
            P *= (t0 @ t0) / np.trace(P)
            assert best <= mseg_exact(P, Phi, t0, s2) + 1e-12

    def test_requires_orthonormal(self):
        rng = np.random.default_rng(0)
        d = Dataset(rng.standard_normal(20), rng.standard_normal((20, 3)))
        with pytest.raises(ValueError):
            closed_form_estimate("EB", "Ridge", d, 1.0)


class TestEstimate:
    @pytest.mark.parametrize("kind", ["EB", "SUREg", "SUREy"])
    def test_ridge_matches_closed_form(self, kind):
        d, t0, s2 = ortho_dataset(0)
        rep = estimate_hyperparameter(kind, KernelSpec("Ridge", [1.0], 10), d, s2)
        ref = closed_form_ridge(d.theta_ls, 10, d.N, s2)
        assert rep.eta_hat[0] == pytest.approx(ref, abs=1e-6)

    @pytest.mark.parametrize("kind", ["EB", "SUREy"])
    def test_diagonal_matches_closed_form(self, kind):
        d, t0, s2 = ortho_dataset(1, n=6)
        rep = estimate_hyperparameter(kind, KernelSpec("Diagonal", np.ones(6), 6), d, s2)
        np.testing.assert_allclose(rep.eta_hat, closed_form_diagonal(d.theta_ls, d.N, s2), atol=1e-6)

    @pytest.mark.parametrize("kind", ["MSEg", "EEB"])
    def test_oracle_diagonal(self, kind):
        d, t0, s2 = ortho_dataset(2, n=5)
        rep = estimate_hyperparameter(kind, KernelSpec("Diagonal", np.ones(5), 5), d, s2, t0)
        np.testing.assert_allclose(rep.eta_hat, t0**2, atol=1e-6)

    def test_closed_form_path(self):
        d, t0, s2 = ortho_dataset(3)
        rep = estimate_hyperparameter("EB", KernelSpec("Ridge", [1.0], 10), d, s2, use_closed_form=True)
        assert rep.optimizer_diagnostics["method"] == "closed_form"
        assert rep.eta_hat[0] == closed_form_ridge(d.theta_ls, 10, d.N, s2)

    def test_report_contents(self):
        d, t0, s2 = tc_dataset(0)
        rep = estimate_hyperparameter("EB", KernelSpec("TC", [1.0, 0.9], 20), d, s2, t0)
        assert rep.fit > 50
        assert rep.optimizer_diagnostics["converged"]
        P = kernel_matrix(KernelSpec("TC", rep.eta_hat, 20))
        assert rep.criterion_value == pytest.approx(criterion_value("EB", P, d, s2), rel=1e-10)

    def test_missing_truth(self):
        d, _, s2 = tc_dataset(0)
        with pytest.raises(MissingTruthError):
            estimate_hyperparameter("MSEy", KernelSpec("TC", [1.0, 0.9], 20), d, s2)

    def test_sureg_ill_conditioned(self):
        Phi = np.ones((40, 3))
        Phi[:, 2] = np.arange(40.0)
        Phi[0, 1] += 1e-10
        with pytest.raises(IllConditionedError):
            estimate_hyperparameter("SUREg", KernelSpec("TC", [1.0, 0.9], 3), Dataset(np.ones(40), Phi), 1.0)

    def test_deterministic(self):
        d, t0, s2 = tc_dataset(1)
        spec = KernelSpec("DC", [1.0, 0.9, 0.0], 20)
        cfg = OptimizerConfig(restarts=3, seed=5)
        a = estimate_hyperparameter("SUREy", spec, d, s2, cfg=cfg)
        b = estimate_hyperparameter("SUREy", spec, d, s2, cfg=cfg)
        np.testing.assert_array_equal(a.eta_hat, b.eta_hat)

    def test_nonconvergence_carries_best(self):
        d, t0, s2 = tc_dataset(2)
        cfg = OptimizerConfig(restarts=1, max_iters=1, grad_tol=1e-300)
        with pytest.raises(NonConvergenceError) as info:
            estimate_hyperparameter("EB", KernelSpec("TC", [1.0, 0.9], 20), d, s2, cfg=cfg)
        assert info.value.best is not None
        assert np.all(np.isfinite(info.value.best.eta_hat))

    @pytest.mark.parametrize("family", ["TC", "DC"])
    def test_profiled_agrees_with_generic(self, family):
        d, t0, s2 = tc_dataset(3)
        spec = KernelSpec(family, [1.0, 0.9] + ([0.0] if family == "DC" else []), 20)
        gen = estimate_hyperparameter("EB", spec, d, s2)
        prof = estimate_profiled(["EB", "MSEg"], spec, d, s2, t0, OptimizerConfig(restarts=3))
        assert prof[Criterion.EB].criterion_value == pytest.approx(gen.criterion_value, abs=1e-6)
        assert prof[Criterion.MSEG].fit > 50

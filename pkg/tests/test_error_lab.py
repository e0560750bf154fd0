"""Weak/strong error oracles, Monte Carlo closure, representation identity,
rate fitting."""

import numpy as np
import pytest

from ratelab.error_lab import (expectation, fit_rate, gauss_exp_functional,
                               ito_isometry_error, quadratic_functional,
                               representation_check, sine_functional,
                               strong_error_exact, strong_error_mc,
                               temporal_joint_law, weak_error_exact,
                               weak_error_mc)
from ratelab.models import JointLaw, ModelSpec, mild_law
from ratelab.schemes import DiscreteLawRequest, discrete_law, make_scheme
from ratelab.spectral_core import CovarianceSpec, build_basis


def wave_model(J=8, gamma=0.25, X0=None):
    basis = build_basis("dirichlet", J)
    if X0 is None:
        X0 = np.zeros((2, J))
        X0[0, 0] = 1.0
        X0[1, 1] = 0.5
    return ModelSpec(family="wave", basis=basis, Q=CovarianceSpec.power(gamma), X0=X0)


def gauss_hermite_expect(f, mean, sd, n=120):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return np.sum(w * f(mean + sd * x)) / np.sqrt(2 * np.pi)


class TestWeakErrorExact:
    def test_identical_laws(self):
        model = wave_model()
        law = mild_law(model, 1.0)
        F = sine_functional(np.ones((2, 8)) * 0.1)
        assert weak_error_exact(law, law, F) == 0.0

    def test_sine_gauss_hermite_oracle(self):
        model = wave_model(J=4)
        law = mild_law(model, 0.7)
        rng = np.random.default_rng(41)
        psi = rng.normal(size=(2, 4)) * 0.5
        F = sine_functional(psi)
        got = expectation(F, law)
        # the linear form is scalar Gaussian: integrate sin with GH
        from ratelab.error_lab import _linear_moments
        m, v = _linear_moments(law, psi)
        want = gauss_hermite_expect(np.sin, m, np.sqrt(v))
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_sine_variance_only_factor(self):
        # mu = 0: E sin = 0; cos-type reading via gauss_exp instead
        J = 4
        basis = build_basis("dirichlet", J)
        model = ModelSpec(family="wave", basis=basis, Q=CovarianceSpec.power(0.25),
                          X0=np.zeros((2, J)))
        law = mild_law(model, 1.0)
        F = sine_functional(np.ones((2, J)))
        assert expectation(F, law) == pytest.approx(0.0, abs=1e-14)

    def test_gauss_exp_2d_quadrature_oracle(self):
        model = wave_model(J=2)
        law = mild_law(model, 0.9)
        Mb = np.zeros((2, 2, 2))
        Mb[0] = np.array([[0.8, 0.2], [0.2, 0.4]])
        Mb[1] = np.array([[0.3, 0.0], [0.0, 0.1]])
        F = gauss_exp_functional(Mb)
        got = expectation(F, law)
        # direct 2x2-blockwise Gauss-Hermite over raw coordinates
        x, w = np.polynomial.hermite_e.hermegauss(80)
        total = 1.0
        mu = law.raw_mean()
        blocks = law.raw_blocks()
        for j in range(2):
            C = blocks[j]
            L = np.linalg.cholesky(C + 1e-15 * np.eye(2))
            X1, X2 = np.meshgrid(x, x, indexing="ij")
            W = np.outer(w, w) / (2 * np.pi)
            pts = mu[:, j][:, None, None] + np.einsum(
                "ab,bij->aij", L, np.stack([X1, X2]))
            quadform = (Mb[j, 0, 0] * pts[0] ** 2 + 2 * Mb[j, 0, 1] * pts[0] * pts[1]
                        + Mb[j, 1, 1] * pts[1] ** 2)
            total *= np.sum(W * np.exp(-0.5 * quadform))
        np.testing.assert_allclose(got, total, rtol=1e-8)

    def test_quadratic_mc_oracle(self):
        model = wave_model(J=4)
        law = mild_law(model, 1.1)
        Mb = np.zeros((4, 2, 2))
        Mb[0] = [[1.0, 0.0], [0.0, 0.0]]      # rank-1 on mode 1
        m = np.zeros((2, 4))
        m[0, 1] = 0.7
        F = quadratic_functional(Mb, m)
        got = expectation(F, law)
        rng = np.random.default_rng(6)
        n = 100_000
        vals = np.zeros(n)
        mu = law.raw_mean()
        blocks = law.raw_blocks()
        draws = []
        for j in range(4):
            L = np.linalg.cholesky(blocks[j] + 1e-14 * np.eye(2))
            draws.append(mu[:, j][None, :] + rng.normal(size=(n, 2)) @ L.T)
        x = np.stack(draws, axis=1)           # (n, J, 2)
        vals = (np.einsum("nja,jab,njb->n", x, Mb, x)
                + np.einsum("aj,nja->n", m, x))
        se = vals.std(ddof=1) / np.sqrt(n)
        assert abs(got - vals.mean()) <= 3 * se

    def test_quadratic_scaling_in_q(self):
        # scaling Q by c scales the exact weak error for quadratic F by c
        J = 8
        X0 = np.zeros((2, J))
        s = make_scheme("backward_euler")
        Mb = np.zeros((J, 2, 2))
        Mb[:, 0, 0] = 1.0
        Mb[:, 1, 1] = 1.0 / build_basis("dirichlet", J).lambdas
        F = quadratic_functional(Mb)
        errs = []
        for c in (1.0, 3.5):
            basis = build_basis("dirichlet", J)
            Q = CovarianceSpec.diagonal(c * basis.lambdas ** -0.25)
            model = ModelSpec(family="wave", basis=basis, Q=Q, X0=X0)
            req = DiscreteLawRequest(model=model, scheme=s, k=0.125, N=8)
            errs.append(weak_error_exact(mild_law(model, 1.0), discrete_law(req), F))
        np.testing.assert_allclose(errs[1], 3.5 * errs[0], rtol=1e-12)

    def test_frame_mismatch_needs_gramian(self):
        from ratelab.fem1d import assemble_fem, fully_discrete_law
        model = wave_model(J=16)
        sp = assemble_fem(1.0 / 4, "dirichlet")
        law, _ = fully_discrete_law(sp, make_scheme("crank_nicolson"), 0.125, 8, model)
        exact = mild_law(model, 1.0)
        F = sine_functional(np.ones((2, 16)) * 0.1)
        with pytest.raises(ValueError):
            weak_error_exact(exact, law, F)


class TestStrongErrorExact:
    def test_identical_processes(self):
        model = wave_model(J=8)
        law = mild_law(model, 1.0)
        joint = JointLaw(lawA=law, lawB=law, CP=law.P.astype(complex), CS=law.S)
        assert strong_error_exact(joint, norm="H") == pytest.approx(0.0, abs=1e-12)
        assert strong_error_exact(joint) == pytest.approx(0.0, abs=1e-12)

    def test_two_code_paths_agree(self):
        X0 = np.zeros((2, 32))
        X0[0, :4] = [1.0, -0.3, 0.2, 0.1]
        model = wave_model(J=32, X0=X0)
        for name in ("backward_euler", "crank_nicolson"):
            req = DiscreteLawRequest(model=model, scheme=make_scheme(name),
                                     k=1.0 / 16, N=16)
            joint = temporal_joint_law(req)
            for norm in ("H", "first_component"):
                a = strong_error_exact(joint, norm=norm)
                b = ito_isometry_error(req, norm=norm)
                np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_mc_within_three_se(self):
        model = wave_model(J=8, gamma=0.25)
        req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                                 k=1.0 / 8, N=8)
        exact = strong_error_exact(temporal_joint_law(req))
        mc = strong_error_mc(model, req, n_paths=4000, seed=17)
        assert abs(mc.estimate - exact) <= 3 * mc.standard_error


class TestWeakErrorMc:
    def test_zero_noise_deterministic(self):
        J = 4
        X0 = np.zeros((2, J))
        X0[0, 0] = 1.0
        basis = build_basis("dirichlet", J)
        model = ModelSpec(family="wave", basis=basis,
                          Q=CovarianceSpec.diagonal(np.zeros(J)), X0=X0)
        req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                                 k=0.25, N=4)
        F = sine_functional(np.ones((2, J)) * 0.3)
        mc = weak_error_mc(model, req, F, n_paths=16, seed=3)
        assert mc.standard_error == 0.0
        exact = weak_error_exact(mild_law(model, 1.0), discrete_law(req), F)
        np.testing.assert_allclose(mc.estimate, exact, rtol=1e-10)

    def test_agreement_with_exact(self):
        model = wave_model(J=8, gamma=0.25)
        req = DiscreteLawRequest(model=model, scheme=make_scheme("crank_nicolson"),
                                 k=1.0 / 8, N=8)
        psi = np.zeros((2, 8))
        psi[0] = 0.4 / np.arange(1, 9) ** 0.45
        F = sine_functional(psi)
        exact = weak_error_exact(mild_law(model, 1.0), discrete_law(req), F)
        mc = weak_error_mc(model, req, F, n_paths=4000, seed=29)
        assert abs(mc.estimate - exact) <= 3 * mc.standard_error

    def test_se_scaling(self):
        model = wave_model(J=4, gamma=0.25)
        req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                                 k=0.25, N=4)
        F = sine_functional(np.ones((2, 4)) * 0.3)
        ns = [250, 1000, 4000, 16000]
        ses = [weak_error_mc(model, req, F, n_paths=n, seed=5).standard_error
               for n in ns]
        slope = np.polyfit(np.log(ns), np.log(ses), 1)[0]
        assert abs(slope + 0.5) <= 0.05

    def test_seed_reproducibility(self):
        model = wave_model(J=4, gamma=0.25)
        req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                                 k=0.25, N=4)
        F = sine_functional(np.ones((2, 4)) * 0.3)
        a = weak_error_mc(model, req, F, n_paths=500, seed=11)
        b = weak_error_mc(model, req, F, n_paths=500, seed=11)
        assert a.estimate == b.estimate and a.standard_error == b.standard_error


class TestRepresentation:
    def test_unperturbed_scheme_gives_zero(self):
        # with tilde E = E all terms of the split vanish identically
        model = wave_model(J=4, gamma=0.25)
        law = mild_law(model, 1.0)
        Mb = np.zeros((4, 2, 2))
        Mb[0, 0, 0] = 1.0
        F = quadratic_functional(Mb)
        assert weak_error_exact(law, law, F) == 0.0

    def test_backward_euler_wave_identity(self):
        model = wave_model(J=4, gamma=0.0)
        Mb = np.zeros((4, 2, 2))
        Mb[0] = [[1.0, 0.1], [0.1, 0.2]]
        m = np.zeros((2, 4))
        m[0, 0] = 0.3
        F = quadratic_functional(Mb, m)
        rep = representation_check(model, make_scheme("backward_euler"),
                                   k=1.0 / 8, N=8, F=F)
        assert rep["rel_gap"] <= 1e-8
        assert rep["f1_f2_gap"] <= 1e-10

    def test_randomized_configurations(self):
        rng = np.random.default_rng(53)
        for trial in range(20):
            J = int(rng.integers(2, 8))
            N = int(2 ** rng.integers(2, 6))
            name = ("backward_euler", "crank_nicolson")[trial % 2]
            X0 = rng.normal(size=(2, J)) / np.arange(1, J + 1) ** 2
            basis = build_basis("dirichlet", J)
            model = ModelSpec(family="wave", basis=basis,
                              Q=CovarianceSpec.power(float(rng.uniform(0, 0.5))),
                              X0=X0)
            rank = int(rng.integers(1, 3))
            Mb = np.zeros((J, 2, 2))
            for _ in range(rank):
                v = rng.normal(size=2)
                Mb[int(rng.integers(0, J))] += np.outer(v, v)
            F = quadratic_functional(Mb, rng.normal(size=(2, J)) * 0.2)
            rep = representation_check(model, make_scheme(name),
                                       k=1.0 / N, N=N, F=F)
            assert rep["rel_gap"] <= 1e-8, (trial, rep)
            assert rep["f1_f2_gap"] <= 1e-10

    def test_parabolic_identity(self):
        J = 6
        basis = build_basis("dirichlet", J)
        X0 = 1.0 / np.arange(1, J + 1) ** 2
        model = ModelSpec(family="heat", basis=basis, Q=CovarianceSpec.identity(),
                          X0=X0)
        F = quadratic_functional(np.ones(J), np.zeros(J))
        rep = representation_check(model, make_scheme("backward_euler"),
                                   k=1.0 / 16, N=16, F=F)
        assert rep["rel_gap"] <= 1e-8

    def test_requires_quadratic(self):
        model = wave_model(J=4)
        F = sine_functional(np.ones((2, 4)))
        with pytest.raises(ValueError):
            representation_check(model, make_scheme("backward_euler"), 0.25, 4, F)


class TestFitRate:
    def test_exact_power_law(self):
        pts = [(1.0, 1.0), (2.0, 4.0), (4.0, 16.0), (8.0, 64.0)]
        rep = fit_rate(pts, expected=2.0, tolerance=0.05)
        assert rep.slope == pytest.approx(2.0, abs=1e-12)
        assert rep.r2 == pytest.approx(1.0)
        assert rep.passed

    def test_jittered_three_quarters(self):
        rng = np.random.default_rng(61)
        ks = [2.0 ** -l for l in range(4, 12)]
        errs = [k ** 0.75 * (1 + 0.01 * rng.standard_normal()) for k in ks]
        rep = fit_rate(list(zip(ks, errs)))
        assert abs(rep.slope - 0.75) <= 0.02

    def test_log_corrected_synthetic(self):
        T = 1.0
        ks = [2.0 ** -l for l in range(4, 12)]
        errs = [np.sqrt(k) * np.log(T / k) for k in ks]
        Ls = [np.log(T / k) for k in ks]
        rep = fit_rate(list(zip(ks, errs)), model_hint="log_corrected",
                       expected=0.5, tolerance=0.03, log_factors=Ls)
        assert rep.passed
        raw = fit_rate(list(zip(ks, errs)))
        assert raw.slope < 0.45   # uncorrected fit is biased low

    def test_negative_error_invalid(self):
        with pytest.raises(ValueError):
            fit_rate([(1, 1.0), (2, -1.0), (4, 1.0), (8, 1.0)])

    def test_zero_errors_excluded(self):
        pts = [(1.0, 1.0), (2.0, 4.0), (4.0, 16.0), (8.0, 64.0), (16.0, 0.0)]
        rep = fit_rate(pts)
        assert rep.n_excluded == 1
        assert rep.slope == pytest.approx(2.0, abs=1e-12)

    def test_span_requirement(self):
        with pytest.raises(ValueError):
            fit_rate([(1.0, 1), (2.0, 2), (2.5, 3), (4.0, 4)])


class TestFemMonteCarlo:
    def test_fem_weak_and_strong_closure(self):
        from ratelab.fem1d import (assemble_fem, cross_gramian,
                                   fully_discrete_law, joint_vs_semidiscrete,
                                   semidiscrete_law)
        J = 16
        basis = build_basis("dirichlet", J)
        X0 = np.zeros((2, J))
        X0[0, 0] = 1.0
        model = ModelSpec(family="wave", basis=basis,
                          Q=CovarianceSpec.power(0.25), X0=X0)
        sp = assemble_fem(1.0 / 8, "dirichlet")
        gram = cross_gramian(sp, basis)
        scheme = make_scheme("crank_nicolson")
        req = DiscreteLawRequest(model=model, scheme=scheme, k=1.0 / 8, N=8,
                                 space=sp)
        psi = np.zeros((2, J))
        psi[0, :4] = [0.5, -0.3, 0.2, 0.1]
        F = sine_functional(psi, selector="first_component")
        law, joint = fully_discrete_law(sp, scheme, 1.0 / 8, 8, model, gram=gram)
        exact = weak_error_exact(mild_law(model, 1.0), law, F, gram=gram)
        mc = weak_error_mc(model, req, F, n_paths=3000, seed=71, gram=gram)
        assert abs(mc.estimate - exact) <= 3.2 * mc.standard_error
        exact_s = strong_error_exact(joint, norm="first_component")
        mcs = strong_error_mc(model, req, n_paths=3000, seed=72,
                              norm="first_component", gram=gram)
        assert abs(mcs.estimate - exact_s) <= 3.2 * mcs.standard_error


def test_se_shrinks_by_sqrt2_when_paths_double():
    basis = build_basis("dirichlet", 8)
    X0 = np.zeros((2, 8))
    X0[0, 0] = 1.0
    model = ModelSpec(family="wave", basis=basis, Q=CovarianceSpec.power(0.25),
                      X0=X0)
    req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                             k=0.25, N=4)
    F = sine_functional(np.vstack([0.3 * np.ones(8), np.zeros(8)]))
    se1 = weak_error_mc(model, req, F, n_paths=4000, seed=7).standard_error
    se2 = weak_error_mc(model, req, F, n_paths=8000, seed=7).standard_error
    assert 0.9 * np.sqrt(2.0) <= se1 / se2 <= 1.1 * np.sqrt(2.0)

"""Counter-based increment sampling and refinement coupling."""

import numpy as np
import pytest
from scipy.stats import ks_2samp

from ratelab.noise import coarsen, sample_path
from ratelab.spectral_core import CovarianceSpec, build_basis


def setup():
    return build_basis("dirichlet", 8), CovarianceSpec.power(0.25)


class TestSamplePath:
    def test_zero_weights_zero_path(self):
        basis = build_basis("dirichlet", 4)
        Q = CovarianceSpec.diagonal(np.zeros(4))
        path = sample_path(Q, basis, N=16, k=0.1, seed=5)
        np.testing.assert_array_equal(path.increments, 0.0)

    def test_seed_reproducibility(self):
        basis, Q = setup()
        a = sample_path(Q, basis, N=32, k=0.05, seed=123)
        b = sample_path(Q, basis, N=32, k=0.05, seed=123)
        np.testing.assert_array_equal(a.increments, b.increments)
        c = sample_path(Q, basis, N=32, k=0.05, seed=124)
        assert not np.array_equal(a.increments, c.increments)

    def test_empirical_variance(self):
        basis, Q = setup()
        k = 0.2
        path = sample_path(Q, basis, N=100_000, k=k, seed=9)
        q1 = Q.weights_on(basis)[0]
        var = np.var(path.increments[0])
        se = k * q1 * np.sqrt(2.0 / path.N)
        assert abs(var - k * q1) <= 3 * se

    def test_mode_subset_matches_rows(self):
        basis, Q = setup()
        full = sample_path(Q, basis, N=37, k=0.1, seed=77)
        sub = sample_path(Q, basis, N=37, k=0.1, seed=77, modes=[5])
        np.testing.assert_array_equal(sub.increments[5], full.increments[5])
        sub2 = sample_path(Q, basis, N=37, k=0.1, seed=77, modes=[2, 5, 6])
        np.testing.assert_array_equal(sub2.increments[5], full.increments[5])
        np.testing.assert_array_equal(sub2.increments[2], full.increments[2])

    def test_dense_q_unsupported(self):
        basis = build_basis("dirichlet", 2)
        with pytest.raises(ValueError):
            sample_path(CovarianceSpec.dense(np.eye(2)), basis, N=4, k=0.1, seed=1)


class TestCoarsen:
    def test_pairwise_sum(self):
        basis, Q = setup()
        path = sample_path(Q, basis, N=2, k=0.5, seed=3)
        coarse = coarsen(path, 2)
        np.testing.assert_allclose(coarse.increments[:, 0],
                                   path.increments.sum(axis=1))
        assert coarse.k == pytest.approx(1.0)

    def test_partial_sums_preserved(self):
        # the coarse path is the same Brownian path at shared gridpoints
        basis, Q = setup()
        path = sample_path(Q, basis, N=64, k=0.125, seed=11)
        coarse = coarsen(path, 4)
        fine_cum = np.cumsum(path.increments, axis=1)[:, 3::4]
        np.testing.assert_allclose(np.cumsum(coarse.increments, axis=1), fine_cum,
                                   rtol=1e-13, atol=1e-15)

    def test_variance_additivity(self):
        basis, Q = setup()
        path = sample_path(Q, basis, N=80_000, k=0.05, seed=13)
        coarse = coarsen(path, 4)
        q = Q.weights_on(basis)
        var = np.var(coarse.increments[2])
        want = 4 * 0.05 * q[2]
        se = want * np.sqrt(2.0 / coarse.N)
        assert abs(var - want) <= 3 * se

    def test_indivisible_steps_rejected(self):
        basis, Q = setup()
        path = sample_path(Q, basis, N=10, k=0.1, seed=1)
        with pytest.raises(ValueError):
            coarsen(path, 3)

    def test_coarse_distribution_matches_direct(self):
        basis, Q = setup()
        fine = sample_path(Q, basis, N=100_000, k=0.01, seed=21)
        coarse = coarsen(fine, 2)
        direct = sample_path(Q, basis, N=50_000, k=0.02, seed=22)
        stat = ks_2samp(coarse.increments[0], direct.increments[0])
        assert stat.pvalue > 0.001

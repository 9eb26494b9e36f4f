import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import chisquare

from advsamp.aux_tree import fit_tree
from advsamp.data_io import PcaProjection, fit_pca
from advsamp.errors import DataError
from advsamp.noise import (
    LOG_PROB_FLOOR,
    AdversarialNoise,
    FrequencyNoise,
    UniformNoise,
    make_noise,
)

from conftest import dataset_from_dense, make_sparse_vector


def goodness_of_fit(samples, probs):
    obs = np.bincount(samples, minlength=probs.size)
    return chisquare(obs, probs * samples.size).pvalue


class TestUniform:
    def test_log_prob_constant(self):
        n = UniformNoise(5)
        x = make_sparse_vector([1.0])
        assert n.log_prob(x, 0) == pytest.approx(-np.log(5))
        assert np.allclose(n.log_prob_all(x), -np.log(5))

    def test_normalized(self):
        n = UniformNoise(7)
        assert np.exp(n.log_prob_all(make_sparse_vector([1.0]))).sum() == pytest.approx(1.0)

    def test_sampling_distribution(self, rng):
        n = UniformNoise(6)
        X = sp.csr_matrix(np.ones((100_000, 1)))
        draws = n.sample_batch(X, rng)
        assert goodness_of_fit(draws, np.full(6, 1 / 6)) > 0.001

    def test_out_of_range_label(self):
        with pytest.raises(DataError):
            UniformNoise(3).log_prob(make_sparse_vector([1.0]), 3)


class TestFrequency:
    def test_unsmoothed_probs(self):
        n = FrequencyNoise([3, 1, 0], smoothing=0.0)
        assert np.allclose(n.probs, [0.75, 0.25, 0.0])

    def test_add_one_smoothing(self):
        n = FrequencyNoise([3, 1, 0], smoothing=1.0)
        assert np.allclose(n.probs, [4 / 7, 2 / 7, 1 / 7])

    def test_zero_count_floor(self):
        n = FrequencyNoise([5, 0], smoothing=0.0)
        assert n.log_prob(make_sparse_vector([1.0]), 1) == LOG_PROB_FLOOR

    def test_normalized(self):
        n = FrequencyNoise([2, 9, 4, 1], smoothing=0.5)
        assert np.exp(n.log_prob_all(make_sparse_vector([1.0]))).sum() == pytest.approx(1.0)

    def test_sampling_distribution(self, rng):
        n = FrequencyNoise([10, 30, 60], smoothing=0.0)
        X = sp.csr_matrix(np.ones((100_000, 1)))
        draws = n.sample_batch(X, rng)
        assert goodness_of_fit(draws, n.probs) > 0.001

    def test_log_prob_pairs_matches(self):
        n = FrequencyNoise([1, 2, 3])
        X = sp.csr_matrix(np.ones((3, 1)))
        pairs = n.log_prob_pairs(X, [2, 0, 1])
        assert np.allclose(pairs, n.log_probs[[2, 0, 1]])

    def test_rejects_negative(self):
        with pytest.raises(DataError):
            FrequencyNoise([1, -2])
        with pytest.raises(DataError):
            FrequencyNoise([0, 0], smoothing=0.0)


class TestAdversarial:
    def fitted(self, rng, C=4, K=6, k=2, n=400):
        # two gaussian context clusters, each favoring half the labels
        X = rng.standard_normal((n, K))
        X[: n // 2, 0] += 4.0
        labels = np.where(
            np.arange(n) < n // 2,
            rng.integers(0, C // 2, n),
            rng.integers(C // 2, C, n),
        )
        ds = dataset_from_dense(X, labels, C)
        proj = fit_pca(ds, k)
        Xr = (X - proj.mean) @ proj.components.T
        tree = fit_tree(Xr, labels, C, 0.1)
        return AdversarialNoise(tree, proj), ds

    def test_normalized_per_context(self, rng):
        noise, ds = self.fitted(rng)
        totals = np.exp(noise.log_prob_matrix(ds.features)).sum(axis=1)
        assert np.abs(totals - 1.0).max() < 1e-9

    def test_conditional_on_context(self, rng):
        noise, ds = self.fitted(rng)
        # a cluster-0 context should put most mass on the first half of labels
        p0 = np.exp(noise.log_prob_all(ds.example(0)[0]))
        p1 = np.exp(noise.log_prob_all(ds.example(ds.num_examples - 1)[0]))
        assert p0[:2].sum() > 0.8
        assert p1[2:].sum() > 0.8

    def test_sampling_matches_log_prob(self, rng):
        noise, ds = self.fitted(rng)
        x, _ = ds.example(3)
        X = sp.csr_matrix((np.tile(x.values, 100_000),
                           np.tile(x.indices, 100_000),
                           np.arange(0, 100_001 * x.indices.size, x.indices.size)),
                          shape=(100_000, x.dim))
        draws = noise.sample_batch(X, rng)
        probs = np.exp(noise.log_prob_all(x))
        assert goodness_of_fit(draws, probs) > 0.001

    def test_scalar_batch_agree(self, rng):
        noise, ds = self.fitted(rng)
        x, _ = ds.example(0)
        lp_scalar = [noise.log_prob(x, y) for y in range(4)]
        lp_all = noise.log_prob_all(x)
        assert np.allclose(lp_scalar, lp_all, atol=1e-12)
        row = noise.log_prob_matrix(ds.features[0])[0]
        assert np.allclose(row, lp_all, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        noise, _ = self.fitted(rng)
        bad = PcaProjection(np.zeros(6), np.eye(3, 6), np.ones(3))
        with pytest.raises(DataError):
            AdversarialNoise(noise.tree, bad)


class TestFactory:
    def test_kinds(self, rng):
        assert isinstance(make_noise("uniform", num_labels=3), UniformNoise)
        assert isinstance(make_noise("frequency", label_counts=[1, 2]), FrequencyNoise)

    def test_missing_arguments(self):
        with pytest.raises(DataError):
            make_noise("uniform")
        with pytest.raises(DataError):
            make_noise("frequency")
        with pytest.raises(DataError):
            make_noise("adversarial")
        with pytest.raises(DataError):
            make_noise("gaussian", num_labels=2)

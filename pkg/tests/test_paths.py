import numpy as np
import pytest

from polyem.paths import (
    aggregate,
    derive_stream,
    partial_sums,
    sample_fine_increments,
    standard_normals,
)

SEED = 987654321


class TestDeriveStream:
    def test_deterministic(self):
        a = standard_normals(derive_stream(SEED, 3), 100)
        b = standard_normals(derive_stream(SEED, 3), 100)
        assert np.array_equal(a, b)

    def test_adjacent_indices_differ(self):
        a = standard_normals(derive_stream(SEED, 0), 100)
        b = standard_normals(derive_stream(SEED, 1), 100)
        assert np.sum(a != b) > 90

    def test_streams_decorrelated(self):
        a = standard_normals(derive_stream(SEED, 0), 100_000)
        b = standard_normals(derive_stream(SEED, 1), 100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


class TestSampleFineIncrements:
    def test_reproducible(self):
        x = sample_fine_increments(SEED, 5, 512, 2)
        y = sample_fine_increments(SEED, 5, 512, 2)
        assert np.array_equal(x.fine_increments, y.fine_increments)
        assert x.fine_increments.shape == (2, 512)

    def test_moments(self):
        n_ref = 1 << 20
        inc = sample_fine_increments(SEED, 0, n_ref, 1).fine_increments.ravel()
        m = inc.size
        se_mean = np.sqrt(1.0 / n_ref) / np.sqrt(m)
        assert abs(inc.mean()) < 4 * se_mean
        var = inc.var(ddof=1)
        se_var = (1.0 / n_ref) * np.sqrt(2.0 / m)
        assert abs(var - 1.0 / n_ref) < 4 * se_var

    def test_fourth_moment_identity(self):
        # E[((dW)^2 - 1/n)^2] = 2 / n^2
        n_ref = 1 << 20
        inc = sample_fine_increments(SEED, 1, n_ref, 1).fine_increments.ravel()
        stat = (inc ** 2 - 1.0 / n_ref) ** 2
        se = stat.std(ddof=1) / np.sqrt(stat.size)
        assert abs(stat.mean() - 2.0 / n_ref ** 2) < 4 * se

    def test_normality_sanity(self):
        z = standard_normals(derive_stream(SEED, 2), 1_000_000)
        m = z.size
        skew = np.mean(z ** 3)
        kurt = np.mean(z ** 4)
        assert abs(skew) < 4 * np.sqrt(6.0 / m)
        assert abs(kurt - 3.0) < 4 * np.sqrt(24.0 / m)

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_fine_increments(SEED, 0, 100, 1)  # not a power of two
        with pytest.raises(ValueError):
            sample_fine_increments(SEED, 0, 64, 0)


class TestAggregate:
    def test_identity_level(self):
        b = sample_fine_increments(SEED, 0, 256, 2)
        assert np.array_equal(aggregate(b, 256), b.fine_increments)

    def test_total_sum_preserved(self):
        b = sample_fine_increments(SEED, 0, 4096, 2)
        for n in (1, 8, 64, 512):
            agg = aggregate(b, n)
            assert np.allclose(agg.sum(axis=1), b.fine_increments.sum(axis=1), atol=1e-12)

    def test_single_block(self):
        b = sample_fine_increments(SEED, 0, 128, 1)
        w1 = aggregate(b, 1)
        assert w1.shape == (1, 1)
        assert w1[0, 0] == pytest.approx(b.fine_increments.sum(), abs=1e-14)

    def test_divisibility(self):
        b = sample_fine_increments(SEED, 0, 64, 1)
        with pytest.raises(ValueError):
            aggregate(b, 48)
        with pytest.raises(ValueError):
            aggregate(b, 128)


class TestPartialSums:
    def test_endpoints(self):
        b = sample_fine_increments(SEED, 0, 512, 2)
        W = partial_sums(b)
        assert W.shape == (2, 513)
        assert np.all(W[:, 0] == 0.0)
        assert np.allclose(W[:, -1], b.fine_increments.sum(axis=1), atol=1e-13)

    def test_consistent_with_aggregate(self):
        b = sample_fine_increments(SEED, 0, 1024, 1)
        W = partial_sums(b)
        for n in (16, 64):
            r = 1024 // n
            coarse_W = np.concatenate(([0.0], np.cumsum(aggregate(b, n)[0])))
            assert np.allclose(W[0, ::r], coarse_W, atol=1e-12)

    def test_coupling_reproduces_endpoint(self):
        b = sample_fine_increments(SEED, 9, 2048, 2)
        w1_fine = partial_sums(b)[:, -1]
        for n in (2, 32, 512):
            assert np.allclose(aggregate(b, n).sum(axis=1), w1_fine, atol=1e-12)

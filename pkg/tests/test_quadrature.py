import numpy as np
import pytest

from polyem.quadrature import (
    QuadratureError,
    build_weight_table,
    cumulative_at,
    dump_weight_table,
)

# int_0^1 t^(-1/2) (log(e/t))^(-1) dt, mpmath tanh-sinh at 40 digits
FULL_INTEGRAL = 0.9229106324837304688328493758289


class TestBuildWeightTable:
    def test_constant_hook(self):
        t = build_weight_table(8, integrand=lambda s: 1.0)
        assert np.allclose(t.weights, 1.0 / 8.0, rtol=1e-14)
        assert t.cumulative[-1] == pytest.approx(1.0, rel=1e-14)

    def test_full_interval_oracle(self):
        t = build_weight_table(1)
        assert t.weights[0] == pytest.approx(FULL_INTEGRAL, abs=1e-10)

    def test_two_interval_additivity(self):
        one = build_weight_table(1)
        two = build_weight_table(2)
        assert two.weights.sum() == pytest.approx(one.weights[0], abs=2e-12)

    def test_weights_positive(self):
        t = build_weight_table(128)
        assert np.all(t.weights > 0)

    def test_cumulative_structure(self):
        t = build_weight_table(64)
        assert t.cumulative[0] == 0.0
        # built by prefix-summing the weights
        assert np.array_equal(t.cumulative, np.concatenate(([0.0], np.cumsum(t.weights))))
        assert t.cumulative[-1] == pytest.approx(FULL_INTEGRAL, abs=1e-10)

    def test_nesting_consistency(self):
        coarse = build_weight_table(64)
        fine = build_weight_table(128)
        paired = fine.weights.reshape(64, 2).sum(axis=1)
        assert np.allclose(paired, coarse.weights, atol=1e-10)
        assert np.allclose(fine.cumulative[::2], coarse.cumulative, atol=1e-10)

    def test_square_integrability_sanity(self):
        # n * sum of tail weights^2 approximates int f^2 <= 1; no divergence in n
        for n in (64, 256, 1024, 4096, 8192):
            t = build_weight_table(n)
            assert n * np.sum(t.weights[1:] ** 2) < 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            build_weight_table(0)
        with pytest.raises(ValueError):
            build_weight_table(4, tol=0.0)

    def test_nonconvergence_reported(self):
        # discontinuity keeps the Simpson refinement error from ever meeting tol
        with pytest.raises(QuadratureError):
            build_weight_table(1, tol=1e-13,
                               integrand=lambda s: 1.0 if s < 1.0 / np.pi else 0.0)


class TestCumulativeAt:
    def test_endpoints(self):
        t = build_weight_table(16)
        assert cumulative_at(t, 0) == 0.0
        assert cumulative_at(t, 16) == pytest.approx(FULL_INTEGRAL, abs=1e-10)

    def test_monotone(self):
        t = build_weight_table(32)
        assert np.all(np.diff(t.cumulative) > 0)

    def test_out_of_range(self):
        t = build_weight_table(4)
        with pytest.raises(IndexError):
            cumulative_at(t, 5)
        with pytest.raises(IndexError):
            cumulative_at(t, -1)


def test_dump_format(tmp_path):
    t = build_weight_table(4)
    out = tmp_path / "weights.txt"
    dump_weight_table(t, out)
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    k, w, c = lines[2].split()
    assert int(k) == 2
    assert float(w) == t.weights[2]
    assert float(c) == t.cumulative[3]

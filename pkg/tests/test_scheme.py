import math

import numpy as np
import pytest

import polyem.backend
import polyem.modulus
from polyem.models import (
    SdeProblem,
    constant_sigma_problem,
    example_a,
    example_b,
    lower_bound_problem,
)
from polyem.modulus import g_series
from polyem.paths import aggregate, partial_sums, sample_fine_increments
from polyem.quadrature import build_weight_table
from polyem.scheme import (
    SchemeError,
    Trajectory,
    classical_em_step,
    dump_trajectory,
    extend_to_fine,
    polygonal_step,
    reference_solution,
    solve_on_grid,
)

SEED = 20240801


class TestPolygonalStep:
    def test_no_drift_no_noise(self):
        p = lower_bound_problem()
        x = np.array([0.7])
        out = polygonal_step(x, 0.0, 0.25, np.zeros(1), p)
        assert np.array_equal(out, x)

    def test_constant_sigma_telescopes(self):
        p = constant_sigma_problem(dim=1, c=2.0)
        rng = np.random.default_rng(3)
        dW = rng.normal(0, 0.1, 32)
        x = np.array([0.5])
        for d in dW:
            x = polygonal_step(x, 0.0, 1.0 / 32, np.array([d]), p)
        assert x[0] == pytest.approx(0.5 + 2.0 * dW.sum(), abs=1e-12)

    def test_example_a_hand_value(self, spec):
        p = example_a(spec)
        out = polygonal_step(np.array([0.4]), 0.01, 1.0 / 64, np.array([0.05]), p)
        expected = 0.4 + 0.01 * g_series(0.4, spec) + (1.0 + 0.5 * math.tanh(0.4)) * 0.05
        assert out[0] == pytest.approx(expected, rel=1e-14)

    def test_rejects_bad_args(self, spec):
        p = example_a(spec)
        with pytest.raises(ValueError):
            polygonal_step(np.zeros(1), -0.1, 0.1, np.zeros(1), p)
        with pytest.raises(ValueError):
            polygonal_step(np.zeros(1), 0.1, 0.0, np.zeros(1), p)


class TestClassicalEmStep:
    def test_lower_bound_value(self):
        p = lower_bound_problem()
        out = classical_em_step(np.zeros(1), 1.0 / 64, np.array([0.1]), p)
        assert out[0] == pytest.approx(0.2, rel=1e-15)

    def test_zero_noise_fixed_point(self):
        p = lower_bound_problem()
        x = np.array([1.3])
        assert np.array_equal(classical_em_step(x, 0.01, np.zeros(1), p), x)

    def test_rejected_for_singular_drift(self, spec):
        with pytest.raises(SchemeError, match="classical EM not defined"):
            classical_em_step(np.zeros(1), 0.01, np.zeros(1), example_a(spec))


class TestSolveOnGrid:
    def test_single_step_constant_sigma(self):
        p = constant_sigma_problem(dim=1, c=1.5)
        inc = np.array([[0.3]])
        traj = solve_on_grid(p, 1, inc, None)
        assert traj.states[1, 0] == pytest.approx(1.5 * 0.3, abs=1e-15)

    def test_coarse_fine_nesting_exact_for_constant_sigma(self):
        p = constant_sigma_problem(dim=1, c=1.0)
        b = sample_fine_increments(SEED, 0, 256, 1)
        fine = solve_on_grid(p, 256, b.fine_increments, None)
        coarse = solve_on_grid(p, 32, aggregate(b, 32), None)
        assert np.allclose(fine.states[::8, 0], coarse.states[:, 0], atol=1e-12)

    def test_against_straight_line_oracle(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 2, 64, 1)
        wt = build_weight_table(64)
        traj = solve_on_grid(p, 64, b.fine_increments, wt)
        x = 0.0
        for k in range(64):
            x = x + wt.weights[k] * g_series(x, spec) \
                + (1.0 + 0.5 * math.tanh(x)) * b.fine_increments[0, k]
        assert traj.states[-1, 0] == pytest.approx(x, abs=1e-12)

    def test_backends_agree_smooth(self):
        # bounded-slope drift/diffusion: no rounding amplification, so the
        # two backends must track each other to near machine precision
        p = lower_bound_problem()
        b = sample_fine_increments(SEED, 4, 256, 1)
        compiled = solve_on_grid(p, 256, b.fine_increments, None)
        assert polyem.backend.active_backend() == "compiled"
        try:
            polyem.backend._kernels = None
            fallback = solve_on_grid(p, 256, b.fine_increments, None)
        finally:
            from polyem import _kernels
            polyem.backend._kernels = _kernels
        assert np.allclose(compiled.states, fallback.states, atol=1e-13)

    def test_backends_agree_singular(self, spec):
        # the multiscale drift has enormous local slopes, so last-ulp
        # rounding-order differences between the C and numpy step are
        # amplified along the path; agreement is only to ~1e-6 there, with
        # the series evaluators themselves agreeing bit-exactly
        from polyem import _kernels
        xs = np.linspace(-3.0, 3.0, 1001)
        g_py = np.array([g_series(x, spec) for x in xs])
        g_c = np.asarray(_kernels.g_series_batch(
            xs, np.asarray(polyem.modulus.level_weights(spec))))
        assert np.array_equal(g_py, g_c)

        p = example_b(spec)
        b = sample_fine_increments(SEED, 4, 128, 2)
        wt = build_weight_table(128)
        compiled = solve_on_grid(p, 128, b.fine_increments, wt)
        try:
            polyem.backend._kernels = None
            fallback = solve_on_grid(p, 128, b.fine_increments, wt)
        finally:
            polyem.backend._kernels = _kernels
        assert np.allclose(compiled.states, fallback.states, atol=1e-4)

    def test_requires_weight_table(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 0, 16, 1)
        with pytest.raises(ValueError):
            solve_on_grid(p, 16, b.fine_increments, None)
        with pytest.raises(ValueError):
            solve_on_grid(p, 16, b.fine_increments, build_weight_table(8))

    def test_classical_rejected_for_singular(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 0, 16, 1)
        with pytest.raises(SchemeError):
            solve_on_grid(p, 16, b.fine_increments, build_weight_table(16), scheme="classical")

    def test_nonfinite_aborts(self):
        # quadratic sigma explodes double-exponentially under unit increments
        def zero(x):
            return np.zeros_like(x)

        def sigma(x):
            with np.errstate(over="ignore"):
                return (x[:, 0] ** 2 + 1.0)[:, None, None]

        p = SdeProblem(name="explode", dim=1, initial_state=np.ones(1),
                       G=zero, H=zero, sigma=sigma,
                       has_singular_part=False, classical_em_allowed=True)
        inc = np.full((1, 64), 1.0)
        with pytest.raises(SchemeError, match="non-finite"):
            solve_on_grid(p, 64, inc, None)


class TestExtendToFine:
    def test_identity_at_reference_level(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 1, 256, 1)
        wt = build_weight_table(256)
        traj = solve_on_grid(p, 256, b.fine_increments, wt)
        ext = extend_to_fine(p, traj, b, wt)
        assert np.allclose(ext, traj.states, atol=1e-12)

    def test_driftless_constant_sigma_closed_form(self):
        p = constant_sigma_problem(dim=1, c=2.0)
        b = sample_fine_increments(SEED, 3, 512, 1)
        coarse = solve_on_grid(p, 16, aggregate(b, 16), None)
        ext = extend_to_fine(p, coarse, b, None)
        W = partial_sums(b)
        assert np.allclose(ext[:, 0], 2.0 * W[0], atol=1e-12)

    def test_coarse_node_consistency(self, spec):
        p = example_b(spec)
        b = sample_fine_increments(SEED, 6, 1024, 2)
        wt_fine = build_weight_table(1024)
        coarse = solve_on_grid(p, 32, aggregate(b, 32), build_weight_table(32))
        ext = extend_to_fine(p, coarse, b, wt_fine)
        assert np.allclose(ext[::32], coarse.states, atol=1e-10)

    def test_endpoint_matches(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 7, 512, 1)
        coarse = solve_on_grid(p, 64, aggregate(b, 64), build_weight_table(64))
        ext = extend_to_fine(p, coarse, b, build_weight_table(512))
        assert ext[-1, 0] == pytest.approx(coarse.states[-1, 0], abs=1e-10)

    def test_grid_mismatch(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 0, 64, 1)
        traj = Trajectory(n=48, states=np.zeros((49, 1)))
        with pytest.raises(ValueError):
            extend_to_fine(p, traj, b, build_weight_table(64))


class TestReferenceSolution:
    def test_unit_sigma_is_wiener_path(self):
        p = constant_sigma_problem(dim=2, c=1.0)
        b = sample_fine_increments(SEED, 0, 256, 2)
        ref = reference_solution(p, b, None)
        assert np.allclose(ref.states, partial_sums(b).T, atol=1e-13)

    def test_deterministic(self, spec):
        p = example_a(spec)
        b = sample_fine_increments(SEED, 0, 128, 1)
        wt = build_weight_table(128)
        r1 = reference_solution(p, b, wt)
        r2 = reference_solution(p, b, wt)
        assert np.array_equal(r1.states, r2.states)

    def test_lower_bound_second_moment_bracket(self):
        # E[X_1^2] = int_0^1 E[sigma(X_s)^2] ds must sit inside (1, 9)
        p = lower_bound_problem()
        ends = []
        for i in range(2000):
            b = sample_fine_increments(SEED, i, 256, 1)
            ends.append(reference_solution(p, b, None).states[-1, 0])
        m2 = np.mean(np.square(ends))
        assert 1.0 < m2 < 9.0


def test_dump_trajectory(tmp_path, spec):
    p = example_b(spec)
    b = sample_fine_increments(SEED, 0, 8, 2)
    traj = solve_on_grid(p, 8, b.fine_increments, build_weight_table(8))
    out = tmp_path / "traj.txt"
    dump_trajectory(traj, out)
    lines = out.read_text().splitlines()
    assert len(lines) == 9
    t, x1, x2 = lines[4].split()
    assert float(t) == 0.5
    assert float(x1) == traj.states[4, 0]

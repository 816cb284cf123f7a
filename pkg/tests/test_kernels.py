"""Dot-product and cyclic kernel construction, evaluation, and assembly."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kgflow.basis import dim_spherical_harmonics
from kgflow.data import sample_sphere
from kgflow.kernels import (
    Activation,
    CyclicKernel,
    KernelError,
    build_dot_kernel,
    constant,
    cyclic_cross_matrix,
    cyclic_kernel_matrix,
    cyclic_kernel_value,
    kernel_matrix,
    kernel_value,
    linear,
    relu,
    relu_closed_form,
    relu_plus_he3,
    resolve_activation,
    spectrum_table,
    tail_traces,
)


@pytest.fixture(scope="module")
def relu_spec_100():
    return build_dot_kernel(relu(), 100, 30)


class TestBuildDotKernel:
    def test_linear_activation_spectrum(self):
        # E_w[<w,x1><w,x2>] = <x1,x2>/d: single degree-1 eigenvalue
        # xi_1 = (E[x^2]/sqrt(d))^2 = 1/d, with multiplicity B(d,1) = d
        d = 20
        spec = build_dot_kernel(linear(), d, 10)
        assert spec.xi[1] == pytest.approx(1.0 / d, rel=1e-12)
        mask = np.ones(11, dtype=bool)
        mask[1] = False
        assert np.all(spec.xi[mask] < 1e-25)
        assert spec.diagonal_exact == pytest.approx(1.0, rel=1e-12)

    def test_linear_kernel_value_is_identity(self):
        spec = build_dot_kernel(linear(), 20, 10)
        s = np.linspace(-1, 1, 21)
        assert_allclose(kernel_value(spec, s), s, atol=1e-12)
        assert kernel_value(spec, 0.37) == pytest.approx(0.37, abs=1e-13)

    def test_constant_activation(self):
        spec = build_dot_kernel(constant(1.7), 9, 5)
        assert spec.xi[0] == pytest.approx(1.7**2, rel=1e-13)
        assert_allclose(spec.xi[1:], 0.0, atol=1e-20)
        assert kernel_value(spec, -0.4) == pytest.approx(1.7**2, rel=1e-12)

    def test_linear_activation_monte_carlo(self):
        # oracle for the analytic form: expectation over random unit features
        d = 15
        rng = np.random.default_rng(5)
        x1, x2 = sample_sphere(2, d, rng)
        w = rng.standard_normal((200_000, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        prods = (w @ x1) * (w @ x2)
        se = prods.std(ddof=1) / math.sqrt(len(prods))
        spec = build_dot_kernel(linear(), d, 10)
        val = kernel_value(spec, float(x1 @ x2) / d)
        assert abs(val - prods.mean()) < 3 * se

    def test_activation_scaling_is_quadratic(self):
        # doubling sigma scales every eigenvalue (and h) by 4
        d = 12
        base = build_dot_kernel(relu(), d, 8)
        doubled = build_dot_kernel(
            Activation(lambda x: 2.0 * np.maximum(x, 0.0), "2relu", (0.0,)), d, 8
        )
        assert_allclose(doubled.xi, 4.0 * base.xi, rtol=1e-12)
        assert doubled.diagonal_exact == pytest.approx(4 * base.diagonal_exact,
                                                       rel=1e-12)

    def test_positive_spectrum_and_trace_bound(self):
        spec = build_dot_kernel(relu_plus_he3(), 50, 30)
        assert np.all(spec.xi >= 0)
        assert spec.truncated_trace <= spec.diagonal_exact + 1e-9


class TestReluClosedForm:
    def test_monte_carlo_validation(self):
        # independent check of the arc-cosine formula before it is trusted
        d = 30
        rng = np.random.default_rng(42)
        s_target = 0.17
        x1 = np.zeros(d)
        x1[0] = math.sqrt(d)
        x2 = np.zeros(d)
        x2[0] = s_target * math.sqrt(d)
        x2[1] = math.sqrt(d * (1 - s_target**2))
        w = rng.standard_normal((400_000, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        prods = np.maximum(w @ x1, 0) * np.maximum(w @ x2, 0)
        se = prods.std(ddof=1) / math.sqrt(len(prods))
        assert abs(relu_closed_form(s_target) - prods.mean()) < 3 * se

    @pytest.mark.parametrize("d", [50, 100])
    def test_series_matches_closed_form(self, d):
        spec = build_dot_kernel(relu(), d, 30)
        s = np.linspace(-0.3, 0.3, 61)
        err = np.abs(kernel_value(spec, s) - relu_closed_form(s))
        assert err.max() <= 1e-6 * 0.5

    def test_diagonal_value(self):
        # h(1) = E[relu(<w,x>)^2] = E[<w,x>^2]/2 = 1/2 by symmetry
        spec = build_dot_kernel(relu(), 64, 30)
        assert spec.diagonal_exact == pytest.approx(0.5, rel=1e-12)
        assert relu_closed_form(1.0) == pytest.approx(0.5, rel=1e-12)


class TestKernelValue:
    def test_series_at_one_approaches_diagonal(self, relu_spec_100):
        spec = relu_spec_100
        val = kernel_value(spec, 1.0)
        assert val == pytest.approx(spec.truncated_trace, rel=1e-12)
        gap = spec.diagonal_exact - val
        assert 0 <= gap < 1e-3
        assert gap == pytest.approx(spec.truncation_gap, abs=1e-12)

    def test_domain_check(self, relu_spec_100):
        with pytest.raises(KernelError):
            kernel_value(relu_spec_100, 1.5)

    def test_even_symmetry_for_even_activation(self):
        # |x| has only even coefficients, so h is an even function of s
        spec = build_dot_kernel(Activation(np.abs, "abs", (0.0,)), 25, 20)
        s = np.linspace(0, 1, 11)
        assert_allclose(kernel_value(spec, s), kernel_value(spec, -s), atol=1e-14)


class TestKernelMatrix:
    def test_single_point(self, relu_spec_100):
        X = sample_sphere(1, 100, 0)
        H = kernel_matrix(relu_spec_100, X)
        assert H.shape == (1, 1)
        assert H[0, 0] == relu_spec_100.diagonal_exact

    def test_duplicate_rows(self, relu_spec_100):
        x = sample_sphere(1, 100, 1)
        X = np.vstack([x, x])
        H = kernel_matrix(relu_spec_100, X)
        assert H[0, 1] == pytest.approx(kernel_value(relu_spec_100, 1.0), rel=1e-12)
        assert H[0, 0] == relu_spec_100.diagonal_exact
        evals = np.linalg.eigvalsh(H)
        assert evals.min() >= -1e-8 * np.trace(H)

    def test_linear_kernel_matrix_closed_form(self):
        d, n = 20, 5
        spec = build_dot_kernel(linear(), d, 10)
        X = sample_sphere(n, d, 3)
        H = kernel_matrix(spec, X)
        expected = X @ X.T / d
        off = ~np.eye(n, dtype=bool)
        assert_allclose(H[off], expected[off], atol=1e-10)
        assert_allclose(np.diag(H), 1.0, atol=1e-12)

    def test_row_norm_violation_names_row(self, relu_spec_100):
        X = sample_sphere(3, 100, 0)
        X[1] *= 1.001
        with pytest.raises(KernelError, match="row 1"):
            kernel_matrix(relu_spec_100, X)

    def test_psd_random(self, relu_spec_100):
        X = sample_sphere(200, 100, 7)
        H = kernel_matrix(relu_spec_100, X)
        assert np.linalg.eigvalsh(H).min() >= -1e-8 * np.trace(H)

    def test_trace_identity(self, relu_spec_100):
        X = sample_sphere(40, 100, 9)
        H = kernel_matrix(relu_spec_100, X)
        assert np.diag(H).mean() == relu_spec_100.diagonal_exact

    def test_shift_equivariance_exact(self, relu_spec_100):
        # H(g x1, g x2) = H(x1, x2): the inner product is the same multiset
        x1, x2 = sample_sphere(2, 100, 11)
        s = math.fsum((x1 * x2).tolist()) / 100
        s_shift = math.fsum((np.roll(x1, 3) * np.roll(x2, 3)).tolist()) / 100
        assert s == s_shift
        assert kernel_value(relu_spec_100, s) == kernel_value(relu_spec_100, s_shift)


class TestCyclicKernel:
    def test_invariance_under_shifts(self):
        d = 8
        spec = build_dot_kernel(relu(), d, 15)
        ck = CyclicKernel(spec)
        x1, x2 = sample_sphere(2, d, 21)
        ref = cyclic_kernel_value(ck, x1, x2)
        for j in (1, 3, 5):
            assert cyclic_kernel_value(ck, x1, np.roll(x2, -j)) == ref
            assert cyclic_kernel_value(ck, np.roll(x1, -j), x2) == ref

    def test_constant_vector_fixed_point(self):
        # all-equal coordinates: every shift sees s = 1, value = truncated h(1)
        d = 6
        spec = build_dot_kernel(relu(), d, 12)
        ck = CyclicKernel(spec)
        x = np.ones(d)
        val = cyclic_kernel_value(ck, x, x)
        assert val == pytest.approx(kernel_value(spec, 1.0), rel=1e-13)

    def test_linear_activation_hand_sum(self):
        # d = 4: value is the average of the four shifted inner products / d
        d = 4
        spec = build_dot_kernel(linear(), d, 6)
        ck = CyclicKernel(spec)
        x1 = np.array([2.0, 0.0, 0.0, 0.0])
        x2 = np.array([1.0, 1.0, 1.0, 1.0])
        expected = np.mean([np.dot(x1, np.roll(x2, -i)) / d for i in range(d)])
        assert cyclic_kernel_value(ck, x1, x2) == pytest.approx(expected, abs=1e-14)

    def test_matrix_psd_and_symmetric(self):
        d = 10
        spec = build_dot_kernel(relu(), d, 20)
        ck = CyclicKernel(spec)
        X = sample_sphere(60, d, 2)
        H = cyclic_kernel_matrix(ck, X)
        assert_allclose(H, H.T, atol=0)
        assert np.linalg.eigvalsh(H).min() >= -1e-8 * np.trace(H)

    def test_matrix_matches_value_function(self):
        d = 7
        spec = build_dot_kernel(relu(), d, 15)
        ck = CyclicKernel(spec)
        X = sample_sphere(4, d, 3)
        H = cyclic_kernel_matrix(ck, X)
        assert H[0, 2] == pytest.approx(cyclic_kernel_value(ck, X[0], X[2]), abs=1e-13)
        # diagonal: identity-shift term carries the exact h(1)
        diag_expect = cyclic_kernel_value(ck, X[1], X[1]) + (
            spec.diagonal_exact - kernel_value(spec, 1.0)
        ) / d
        assert H[1, 1] == pytest.approx(diag_expect, abs=1e-13)

    def test_cross_matrix_consistency(self):
        d = 6
        spec = build_dot_kernel(relu(), d, 12)
        ck = CyclicKernel(spec)
        A = sample_sphere(3, d, 4)
        B = sample_sphere(5, d, 5)
        C = cyclic_cross_matrix(ck, A, B)
        assert C[1, 4] == pytest.approx(cyclic_kernel_value(ck, A[1], B[4]), abs=1e-13)


class TestTailTraces:
    def test_full_level_leaves_residual(self, relu_spec_100):
        spec = relu_spec_100
        tt = tail_traces(spec, spec.K)
        assert tt.kappa_h == pytest.approx(spec.truncation_gap, abs=1e-15)
        assert tt.kappa_m == 0.0

    def test_linear_exhausted_at_level_one(self):
        spec = build_dot_kernel(linear(), 20, 10)
        tt = tail_traces(spec, 1)
        assert tt.kappa_h < 1e-10

    def test_relu_level_zero_monte_carlo(self, relu_spec_100):
        # E_{x,x'}[h(<x,x'>/d)] = xi_0, so kappa_H(0) = h(1) - xi_0
        spec = relu_spec_100
        tt = tail_traces(spec, 0)
        assert tt.kappa_h == pytest.approx(
            spec.diagonal_exact - spec.level_weights[0], abs=1e-15
        )
        rng = np.random.default_rng(8)
        X = sample_sphere(400, 100, rng)
        Y = sample_sphere(400, 100, rng)
        vals = kernel_value(spec, np.clip((X * Y).sum(axis=1) / 100, -1, 1))
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - spec.level_weights[0]) < 3 * se

    def test_level_beyond_truncation_rejected(self, relu_spec_100):
        with pytest.raises(KernelError):
            tail_traces(relu_spec_100, 31)

    def test_kappa_m_matches_direct_sum(self, relu_spec_100):
        spec = relu_spec_100
        tt = tail_traces(spec, 1)
        dims = np.array([dim_spherical_harmonics(100, k) for k in range(31)], float)
        assert tt.kappa_m == pytest.approx(float((spec.xi[2:] ** 2 * dims[2:]).sum()))


class TestDescriptors:
    def test_resolve_named(self):
        assert resolve_activation("relu").name == "relu"
        assert resolve_activation("linear").name == "linear"
        assert resolve_activation("constant:2.5")(np.array([3.0]))[0] == 2.5

    def test_resolve_relu_he3(self):
        act = resolve_activation("relu+0.1he3")
        x = np.array([1.5])
        assert act(x)[0] == pytest.approx(1.5 + 0.1 * (1.5**3 - 4.5))

    def test_unknown_rejected(self):
        with pytest.raises(KernelError):
            resolve_activation("swish")

    def test_spectrum_table_shape(self, relu_spec_100):
        table = spectrum_table(relu_spec_100)
        lines = table.strip().split("\n")
        assert len(lines) == 3 + 31  # two comment lines, header, K+1 rows
        last = lines[-1].split()
        assert int(last[0]) == 30
        assert float(last[-1]) == pytest.approx(relu_spec_100.truncated_trace,
                                                rel=1e-9)

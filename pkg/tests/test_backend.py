"""Compiled series core versus the pure-NumPy fallback."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kgflow._kernelcore import BACKEND, series_eval, series_eval_python


def test_backend_selected():
    assert BACKEND in ("compiled", "python")


def test_paths_agree_on_random_inputs():
    rng = np.random.default_rng(0)
    s = rng.uniform(-1, 1, 10_000)
    coeffs = rng.uniform(0, 1, 31)
    assert_allclose(series_eval(s, coeffs, 57.0),
                    series_eval_python(s, coeffs, 57.0), rtol=1e-13, atol=1e-15)


def test_shapes_preserved():
    s = np.linspace(-1, 1, 12).reshape(3, 4)
    out = series_eval(s, np.array([1.0, 0.5]), 10.0)
    assert out.shape == (3, 4)
    assert_allclose(out, 1.0 + 0.5 * s)
    assert np.shape(series_eval(0.3, np.array([2.0]), 10.0)) == ()


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=1, max_size=40),
    st.lists(st.floats(0, 2), min_size=1, max_size=12),
    st.integers(3, 500),
)
def test_property_equivalence(svals, coeffs, d):
    s = np.array(svals)
    c = np.array(coeffs)
    a = series_eval(s, c, float(d))
    b = series_eval_python(s, c, float(d))
    assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.integers(3, 200))
def test_series_bounded_by_trace(s, d):
    # |q_k(s)| <= 1 on [-1, 1], so |h(s)| <= h(1) for nonnegative weights
    c = np.array([0.3, 0.1, 0.05, 0.01])
    val = float(series_eval(np.array([s]), c, float(d))[0])
    assert abs(val) <= c.sum() + 1e-12


def test_degree_zero_only():
    s = np.linspace(-1, 1, 5)
    assert_allclose(series_eval(s, np.array([3.25]), 42.0), 3.25)

"""Backend selection for the hot series-evaluation kernel.

The compiled Cython extension is preferred when it imports cleanly; otherwise
the pure-NumPy twin is used. Set ``KGFLOW_BACKEND=python`` or
``KGFLOW_BACKEND=compiled`` to force a choice (``compiled`` raises if the
extension is unavailable). Both implementations run the same recurrence and
agree to floating-point roundoff; ``benchmarks/bench_series.py`` compares
their speed.
"""
import os

import numpy as np

from . import _pyref

_requested = os.environ.get("KGFLOW_BACKEND", "auto").lower()

if _requested not in ("auto", "compiled", "python"):
    raise RuntimeError(f"unknown KGFLOW_BACKEND value: {_requested!r}")

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _gegen as _impl
    except ImportError:
        if _requested == "compiled":
            raise RuntimeError(
                "KGFLOW_BACKEND=compiled but the extension is not built; "
                "run `pip install -e .` with Cython available"
            )
        _impl = None

BACKEND = "compiled" if _impl is not None else "python"
_series_eval_raw = (_impl or _pyref).series_eval


def series_eval(s, coeffs, d):
    """Evaluate sum_k coeffs[k] * q_k(s) elementwise for any array shape."""
    shape = np.shape(s)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    flat = np.ascontiguousarray(s, dtype=np.float64).reshape(-1)
    out = np.empty_like(flat)
    _series_eval_raw(flat, coeffs, float(d), out)
    return out.reshape(shape)


def series_eval_python(s, coeffs, d):
    """Force the pure-NumPy path (used by the benchmark and equivalence tests)."""
    shape = np.shape(s)
    flat = np.ascontiguousarray(s, dtype=np.float64).reshape(-1)
    out = np.empty_like(flat)
    _pyref.series_eval(flat, np.asarray(coeffs, dtype=np.float64), float(d), out)
    return out.reshape(shape)

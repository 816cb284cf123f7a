"""Pure-NumPy reference implementation of the compiled series core.

Mathematically identical to ``_gegen.series_eval``; the recurrence is run
vectorized over the whole input array instead of fused per element.
"""
import numpy as np


def series_eval(s, coeffs, d, out):
    """Accumulate sum_k coeffs[k] * q_k(s[i]) into out[i] for every i."""
    s = np.asarray(s, dtype=np.float64)
    if out.shape != s.shape:
        raise ValueError("output buffer size mismatch")
    kmax = len(coeffs) - 1
    out[:] = coeffs[0]
    if kmax >= 1:
        qprev = np.ones_like(s)
        qcur = s.copy()
        out += coeffs[1] * qcur
        for k in range(1, kmax):
            qnext = ((2 * k + d - 2) * s * qcur - k * qprev) / (k + d - 2)
            out += coeffs[k + 1] * qnext
            qprev = qcur
            qcur = qnext
    return out

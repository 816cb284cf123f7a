"""Closed-form population-world ("oracle") gradient-flow risk.

The oracle flow solves f_t = f - exp(-t H) f where H is the kernel operator,
so the excess risk is a sum of decaying exponentials, one per polynomial
degree: every eigenfunction of degree k shares the eigenvalue xi_{d,k}, and
the target's energy at degree k is |P_k f|^2. No sampling, no matrices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpectrum


class OracleError(ValueError):
    """Inconsistent oracle-curve computation."""


def _aligned(spec: KernelSpectrum, norms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pad the shorter of (xi, norms) with zeros so degrees line up.

    Degrees beyond the spectrum truncation are treated as xi = 0; targets in
    this package are low-degree polynomials, so the pad is never exercised
    with real mass unless K was chosen absurdly small.
    """
    norms = np.asarray(norms, dtype=np.float64)
    m = max(len(spec.xi), len(norms))
    xi = np.zeros(m)
    xi[: len(spec.xi)] = spec.xi
    nn = np.zeros(m)
    nn[: len(norms)] = norms
    return xi, nn


def oracle_risk(
    spec: KernelSpectrum, norms: np.ndarray, sigma_eps2: float, t
) -> np.ndarray | float:
    """R(f_t^or) = sum_k exp(-2 t xi_k) |P_k f|^2 + sigma_eps^2."""
    xi, nn = _aligned(spec, norms)
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(tt < 0):
        raise OracleError("time must be nonnegative")
    vals = np.exp(-2.0 * np.outer(tt, xi)) @ nn + sigma_eps2
    return float(vals[0]) if np.isscalar(t) else vals


def oracle_l2_distance(
    spec: KernelSpectrum, norms: np.ndarray, level: int, t
) -> np.ndarray | float:
    """|f_t^or - P_{<=level} f|^2, exact at finite d.

    Degrees k <= level contribute the not-yet-learned mass
    exp(-2 t xi_k) |P_k f|^2; degrees k > level contribute the
    already-learned overshoot (1 - exp(-t xi_k))^2 |P_k f|^2.
    """
    if level < 0:
        raise OracleError("level must be >= 0")
    xi, nn = _aligned(spec, norms)
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(tt < 0):
        raise OracleError("time must be nonnegative")
    decay = np.exp(-np.outer(tt, xi))
    low = (decay**2)[:, : level + 1] @ nn[: level + 1]
    high = ((1.0 - decay) ** 2)[:, level + 1 :] @ nn[level + 1 :]
    vals = low + high
    return float(vals[0]) if np.isscalar(t) else vals


@dataclass(frozen=True)
class OracleCurve:
    times: np.ndarray
    risk: np.ndarray
    l2_to_projection: np.ndarray | None = None


def oracle_curve(
    spec: KernelSpectrum,
    norms: np.ndarray,
    sigma_eps2: float,
    time_grid: np.ndarray,
    level: int | None = None,
) -> OracleCurve:
    """Vectorized oracle risk over a strictly increasing positive grid."""
    times = np.asarray(time_grid, dtype=np.float64)
    if times.ndim != 1 or len(times) == 0:
        raise OracleError("time grid must be a nonempty 1-d array")
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise OracleError("time grid must be strictly increasing and positive")
    risk = oracle_risk(spec, norms, sigma_eps2, times)
    if np.any(np.diff(risk) > 1e-12):
        raise OracleError("computed oracle risk is not non-increasing")
    l2 = None
    if level is not None:
        l2 = oracle_l2_distance(spec, norms, level, times)
    return OracleCurve(times=times, risk=risk, l2_to_projection=l2)

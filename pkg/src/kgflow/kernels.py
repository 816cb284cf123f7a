"""Dot-product and cyclic-invariant kernels on the sphere.

A kernel is represented by its spectrum: per-degree operator eigenvalues
xi_{d,k}, each carried with multiplicity B(d, k), plus the exact diagonal
value h(1) = E[sigma(<w, x>)^2]. Kernel values are evaluated through the
truncated Gegenbauer series

    h(s) = sum_{k<=K} xi_k B(d,k) q_k(s),      s = <x1, x2>/d,

whose tail mass (the difference between the exact diagonal and the
truncated trace) is folded back into matrix diagonals, preserving the
self-induced ridge that controls the flow's late-time behavior.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernelcore import series_eval
from .basis import (
    BasisError,
    GegenbauerBasis,
    MarginalQuadrature,
    gegenbauer_coefficients,
    harmonic_dims,
    marginal_quadrature,
    piecewise_coefficients,
)

logger = logging.getLogger(__name__)


class KernelError(ValueError):
    """Invalid kernel construction or evaluation input."""


@dataclass(frozen=True)
class Activation:
    """Scalar activation with optional kink locations.

    Declared breakpoints route coefficient extraction through the
    piecewise-exact integrator instead of the plain Gauss rule.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str
    breakpoints: tuple[float, ...] = ()

    def __call__(self, x):
        return self.fn(x)


def relu() -> Activation:
    return Activation(lambda x: np.maximum(x, 0.0), "relu", breakpoints=(0.0,))


def relu_plus_he3(scale: float = 0.1) -> Activation:
    """ReLU plus scale * He_3; the cubic term feeds odd degrees >= 3."""
    def fn(x):
        return np.maximum(x, 0.0) + scale * (x**3 - 3.0 * x)

    return Activation(fn, f"relu+{scale:g}he3", breakpoints=(0.0,))


def linear() -> Activation:
    return Activation(lambda x: np.asarray(x, dtype=np.float64), "linear")


def constant(c: float = 1.0) -> Activation:
    return Activation(lambda x: np.full_like(np.asarray(x, dtype=np.float64), c),
                      f"constant:{c:g}")


_NAMED_ACTIVATIONS = {
    "relu": relu,
    "linear": linear,
    "identity": linear,
}


def resolve_activation(name: str) -> Activation:
    """Parse an activation descriptor: relu, linear, constant:<c>, relu+<c>he3."""
    key = name.strip().lower()
    if key in _NAMED_ACTIVATIONS:
        return _NAMED_ACTIVATIONS[key]()
    if key.startswith("constant:"):
        return constant(float(key.split(":", 1)[1]))
    if key.startswith("relu+") and key.endswith("he3"):
        return relu_plus_he3(float(key[len("relu+"):-len("he3")]))
    raise KernelError(f"unknown activation descriptor {name!r}")


@dataclass(frozen=True)
class KernelSpectrum:
    """Spectral form of a dot-product kernel, truncated at degree K.

    ``xi[k]`` is the operator eigenvalue on the degree-k harmonic subspace
    (multiplicity B(d, k)); ``level_weights[k] = xi[k] * B(d, k)`` are the
    series coefficients of h; ``diagonal_exact`` is h(1) computed without
    truncation.
    """

    d: int
    xi: np.ndarray
    diagonal_exact: float
    K: int
    activation_id: str
    level_weights: np.ndarray = field(repr=False)
    basis: GegenbauerBasis = field(repr=False)

    @property
    def truncated_trace(self) -> float:
        return float(self.level_weights.sum())

    @property
    def truncation_gap(self) -> float:
        """Series tail mass: diagonal_exact minus the truncated trace."""
        return self.diagonal_exact - self.truncated_trace


@dataclass(frozen=True)
class TailTraces:
    """Tail traces of the kernel operator above a degree cutoff."""

    level_degree: int
    kappa_h: float
    kappa_m: float


@dataclass(frozen=True)
class CyclicKernel:
    """Group average of a dot-product kernel over all cyclic coordinate shifts."""

    base: KernelSpectrum

    @property
    def group_size(self) -> int:
        return self.base.d

    @property
    def d(self) -> int:
        return self.base.d


def build_dot_kernel(
    sigma: Activation | Callable[[np.ndarray], np.ndarray],
    d: int,
    K: int = 30,
    quad: MarginalQuadrature | None = None,
    num_nodes: int = 200,
) -> KernelSpectrum:
    """Spectrum of H(x1, x2) = E_w[sigma(<w, x1>) sigma(<w, x2>)], w ~ Unif(S^{d-1}).

    <w, x> for x on S^{d-1}(sqrt d) has law tau^1_d, so the degree-k operator
    eigenvalue is the square of sigma's degree-k Gegenbauer coefficient. The
    exact diagonal is E[sigma^2] under the same marginal.
    """
    if not isinstance(sigma, Activation):
        sigma = Activation(sigma, getattr(sigma, "__name__", "custom"))
    basis = GegenbauerBasis(d, K)
    if sigma.breakpoints:
        coeffs = piecewise_coefficients(basis, sigma.fn, sigma.breakpoints)
        sq = piecewise_coefficients(
            GegenbauerBasis(d, 0), lambda x: sigma.fn(x) ** 2, sigma.breakpoints
        )
        diagonal = float(sq[0])
    else:
        if quad is None:
            quad = marginal_quadrature(d, num_nodes)
        coeffs = gegenbauer_coefficients(basis, sigma.fn, quad)
        diagonal = quad.integrate(sigma.fn(quad.nodes) ** 2)
    if diagonal < 0:
        raise KernelError(
            f"quadrature produced negative kernel diagonal {diagonal!r}"
        )
    xi = coeffs**2
    dims = harmonic_dims(d, K)
    weights = xi * dims
    trace = weights.sum()
    if trace > diagonal + 1e-9:
        # roundoff in the diagonal integral; clamp so the invariant holds
        logger.warning(
            "truncated trace %.3e exceeds diagonal %.3e; clamping", trace, diagonal
        )
        diagonal = float(trace)
    xi.setflags(write=False)
    weights.setflags(write=False)
    return KernelSpectrum(
        d=d,
        xi=xi,
        diagonal_exact=diagonal,
        K=K,
        activation_id=sigma.name,
        level_weights=weights,
        basis=basis,
    )


def kernel_value(spec: KernelSpectrum, s) -> np.ndarray | float:
    """Truncated series h(s) for s = <x1, x2>/d in [-1, 1].

    The truncation error is bounded by ``spec.truncation_gap`` (attained at
    s = 1); off the diagonal the neglected terms are exponentially smaller.
    """
    arr = np.asarray(s, dtype=np.float64)
    if np.any(np.abs(arr) > 1 + 1e-9):
        raise KernelError("kernel argument outside [-1, 1]")
    out = series_eval(np.clip(arr, -1.0, 1.0), spec.level_weights, spec.d)
    return float(out) if np.isscalar(s) else out


def _check_sphere_rows(X: np.ndarray, d: int, tol: float = 1e-8) -> None:
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(np.abs(norms - math.sqrt(d)) > tol * math.sqrt(d))
    if bad.size:
        raise KernelError(
            f"row {int(bad[0])} has norm {norms[bad[0]]!r}, expected sqrt({d})"
        )


def kernel_matrix(spec: KernelSpectrum, X: np.ndarray) -> np.ndarray:
    """n x n kernel matrix; off-diagonal truncated series, diagonal exact.

    Setting H_ii = h(1)_exact folds the series tail into the diagonal, which
    keeps the matrix positive semidefinite and preserves the tail trace.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_sphere_rows(X, spec.d)
    S = (X @ X.T) / spec.d
    H = series_eval(np.clip(S, -1.0, 1.0), spec.level_weights, spec.d)
    H = 0.5 * (H + H.T)
    np.fill_diagonal(H, spec.diagonal_exact)
    return H


def cross_kernel_matrix(
    spec: KernelSpectrum, X1: np.ndarray, X2: np.ndarray
) -> np.ndarray:
    """Kernel values between two point sets (no diagonal adjustment)."""
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    _check_sphere_rows(X1, spec.d)
    _check_sphere_rows(X2, spec.d)
    S = (X1 @ X2.T) / spec.d
    return series_eval(np.clip(S, -1.0, 1.0), spec.level_weights, spec.d)


def _shifted(X: np.ndarray, i: int) -> np.ndarray:
    # cyclic coordinate rotation g_i: (x_1, ..., x_d) -> (x_{1+i}, ..., x_i)
    return np.roll(X, -i, axis=1)


def cyclic_kernel_value(ck: CyclicKernel, x1: np.ndarray, x2: np.ndarray) -> float:
    """(1/d) sum_i h(<x1, g_i x2>/d) over all cyclic shifts g_i.

    The shift sum uses exact (fsum) accumulation, so the value is invariant
    under shifting either argument to the last bit.
    """
    spec = ck.base
    x1 = np.asarray(x1, dtype=np.float64).reshape(1, -1)
    x2 = np.asarray(x2, dtype=np.float64).reshape(1, -1)
    _check_sphere_rows(x1, spec.d)
    _check_sphere_rows(x2, spec.d)
    d = spec.d
    vals = [
        float(kernel_value(spec, min(1.0, max(-1.0, (x1 @ _shifted(x2, i).T).item() / d))))
        for i in range(d)
    ]
    return math.fsum(vals) / d


def cyclic_kernel_matrix(ck: CyclicKernel, X: np.ndarray) -> np.ndarray:
    """n x n cyclic kernel matrix.

    The exact-diagonal policy of :func:`kernel_matrix` is applied to the
    identity-shift term only, matching the block structure of the augmented
    dot-kernel matrix entry for entry.
    """
    spec = ck.base
    X = np.asarray(X, dtype=np.float64)
    _check_sphere_rows(X, spec.d)
    d = spec.d
    acc = kernel_matrix(spec, X)  # identity shift, exact diagonal
    for i in range(1, d):
        S = (X @ _shifted(X, i).T) / d
        acc += series_eval(np.clip(S, -1.0, 1.0), spec.level_weights, spec.d)
    acc /= d
    return 0.5 * (acc + acc.T)


def cyclic_cross_matrix(
    ck: CyclicKernel, X1: np.ndarray, X2: np.ndarray
) -> np.ndarray:
    """Cyclic kernel values between two point sets."""
    spec = ck.base
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    _check_sphere_rows(X1, spec.d)
    _check_sphere_rows(X2, spec.d)
    d = spec.d
    acc = np.zeros((X1.shape[0], X2.shape[0]))
    for i in range(d):
        S = (X1 @ _shifted(X2, i).T) / d
        acc += series_eval(np.clip(S, -1.0, 1.0), spec.level_weights, spec.d)
    return acc / d


def tail_traces(spec: KernelSpectrum, m_star_degree: int) -> TailTraces:
    """kappa_H and kappa_M above degree m_star.

    kappa_H uses the exact diagonal, so it includes the mass beyond the
    series truncation; kappa_M is summed within the truncated spectrum.
    """
    if m_star_degree > spec.K:
        raise KernelError(
            f"m_star {m_star_degree} exceeds truncation degree {spec.K}"
        )
    low = float(spec.level_weights[: m_star_degree + 1].sum())
    kappa_h = max(0.0, spec.diagonal_exact - low)
    dims = harmonic_dims(spec.d, spec.K)
    kappa_m = float((spec.xi[m_star_degree + 1 :] ** 2
                     * dims[m_star_degree + 1 :]).sum())
    return TailTraces(level_degree=m_star_degree, kappa_h=kappa_h, kappa_m=kappa_m)


def spectrum_table(spec: KernelSpectrum) -> str:
    """Text table: degree, multiplicity, eigenvalue, cumulative trace."""
    from .basis import dim_spherical_harmonics

    lines = [
        f"# kernel spectrum: activation={spec.activation_id} d={spec.d} K={spec.K}",
        f"# diagonal_exact={spec.diagonal_exact:.12g} "
        f"truncation_gap={spec.truncation_gap:.6g}",
        f"{'k':>4} {'B(d,k)':>16} {'xi_k':>24} {'cumulative_trace':>20}",
    ]
    cum = 0.0
    for k in range(spec.K + 1):
        cum += float(spec.level_weights[k])
        lines.append(
            f"{k:>4} {dim_spherical_harmonics(spec.d, k):>16} "
            f"{spec.xi[k]:>24.16e} {cum:>20.12g}"
        )
    return "\n".join(lines) + "\n"


def relu_closed_form(s) -> np.ndarray:
    """Arc-cosine closed form for the degree-1 ReLU random-feature kernel.

    E_w[relu(<w, x1>) relu(<w, x2>)] for w uniform on the unit sphere equals
    (sqrt(1 - s^2) + (pi - arccos s) s) / (2 pi) with s = <x1, x2>/d; derived
    from the Gaussian arc-cosine kernel by homogeneity (w = g/|g| with |g|
    independent of direction) and cross-checked by Monte Carlo in the tests.
    """
    s = np.clip(np.asarray(s, dtype=np.float64), -1.0, 1.0)
    return (np.sqrt(1.0 - s * s) + (math.pi - np.arccos(s)) * s) / (2.0 * math.pi)

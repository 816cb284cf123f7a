"""Orthogonal polynomials and quadrature for the sphere S^{d-1}(sqrt(d)).

Building blocks:

* ``dim_spherical_harmonics(d, k)`` — dimension B(d, k) of the degree-k
  spherical-harmonic subspace, computed in exact integer arithmetic.
* ``GegenbauerBasis`` — the polynomials Q_k on [-d, d], normalized so
  Q_k(d) = 1, orthogonal for the one-coordinate marginal of the sphere.
* ``MarginalQuadrature`` — Gauss rule for that marginal (the law of
  <e_1, x> on [-sqrt(d), sqrt(d)]), built by Golub-Welsch from the exact
  symmetric-Jacobi recurrence, so polynomials up to degree
  2*num_nodes - 1 are integrated exactly.
* ``HermiteSeries`` — probabilists' Hermite coefficients, the d -> infinity
  limit of the Gegenbauer coefficients.

Everything here is immutable after construction and safe to share across
threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.polynomial.hermite_e as herme
from numpy.polynomial.legendre import leggauss
from scipy.linalg import eigh_tridiagonal


class BasisError(ValueError):
    """Invalid construction or evaluation request."""


def dim_spherical_harmonics(d: int, k: int) -> int:
    """Dimension B(d, k) of the space of degree-k spherical harmonics on S^{d-1}.

    Exact integer arithmetic throughout; Python integers cannot overflow, so
    the result is exact for any (d, k).
    """
    if d < 3:
        raise BasisError(f"dimension must be >= 3, got d={d}")
    if k < 0:
        raise BasisError(f"degree must be >= 0, got k={k}")
    if k == 0:
        return 1
    num = (2 * k + d - 2) * math.comb(k + d - 3, k)
    if num % (d - 2) != 0:  # cannot happen; guards the formula
        raise BasisError(f"non-integer harmonic dimension for d={d}, k={k}")
    return num // (d - 2)


def harmonic_dims(d: int, kmax: int) -> np.ndarray:
    """B(d, 0..kmax) as a float array (exact values, converted once)."""
    return np.array([float(dim_spherical_harmonics(d, k)) for k in range(kmax + 1)])


@dataclass(frozen=True)
class GegenbauerBasis:
    """Gegenbauer polynomials Q_k^{(d)} on [-d, d] with Q_k(d) = 1.

    Written in the rescaled variable u = t/d in [-1, 1], the three-term
    recurrence is

        q_0 = 1,  q_1(u) = u,
        q_{k+1}(u) = (rec_a[k] * u * q_k(u) - rec_b[k] * q_{k-1}(u)),

    with rec_a[k] = (2k + d - 2)/(k + d - 2) and rec_b[k] = k/(k + d - 2).
    These are the classical ultraspherical polynomials C_k^{(d-2)/2}
    divided by their value at 1.
    """

    d: int
    max_degree: int
    rec_a: np.ndarray
    rec_b: np.ndarray

    def __init__(self, d: int, max_degree: int):
        if d < 3:
            raise BasisError(f"dimension must be >= 3, got d={d}")
        if max_degree < 0:
            raise BasisError(f"max_degree must be >= 0, got {max_degree}")
        k = np.arange(max_degree + 1, dtype=np.float64)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "max_degree", max_degree)
        object.__setattr__(self, "rec_a", (2 * k + d - 2) / (k + d - 2))
        object.__setattr__(self, "rec_b", k / (k + d - 2))
        self.rec_a.setflags(write=False)
        self.rec_b.setflags(write=False)

    def design_matrix(self, u) -> np.ndarray:
        """q_k(u) for k = 0..max_degree; shape (max_degree+1,) + u.shape.

        The input dtype is preserved, so extended-precision evaluation is a
        matter of passing longdouble arguments.
        """
        u = np.asarray(u)
        if u.dtype not in (np.float64, np.longdouble):
            u = u.astype(np.float64)
        d = self.d
        out = np.empty((self.max_degree + 1,) + u.shape, dtype=u.dtype)
        out[0] = 1.0
        if self.max_degree >= 1:
            out[1] = u
        for k in range(1, self.max_degree):
            # integer coefficients: a single rounding per step in u's dtype
            out[k + 1] = ((2 * k + d - 2) * u * out[k] - k * out[k - 1]) / (k + d - 2)
        return out

    def eval(self, k: int, t):
        """Q_k^{(d)}(t) for t in [-d, d] (argument on the natural scale)."""
        if k < 0 or k > self.max_degree:
            raise BasisError(
                f"degree {k} outside basis range 0..{self.max_degree}"
            )
        t = np.asarray(t, dtype=np.float64)
        if np.any(np.abs(t) > self.d * (1 + 1e-12)):
            raise BasisError(f"argument outside [-d, d] for d={self.d}")
        return self.design_matrix(t / self.d)[k]


def gegenbauer_eval(basis: GegenbauerBasis, k: int, t):
    """Functional alias for :meth:`GegenbauerBasis.eval`."""
    return basis.eval(k, t)


def _marginal_log_normalizer(d: int) -> float:
    # density of x = <e_1, X>, X ~ Unif(S^{d-1}(sqrt d)):
    #   tau^1_d(dx) = c_d (1 - x^2/d)^{(d-3)/2} dx on [-sqrt d, sqrt d]
    # with log c_d below (Beta-function normalization).
    return (
        math.lgamma(d / 2.0)
        - 0.5 * math.log(math.pi * d)
        - math.lgamma((d - 1) / 2.0)
    )


def marginal_density(d: int, x) -> np.ndarray:
    """Density of the one-coordinate marginal tau^1_d at x."""
    x = np.asarray(x, dtype=np.float64)
    t = 1.0 - x * x / d
    out = np.zeros_like(x)
    inside = t > 0
    out[inside] = np.exp(
        _marginal_log_normalizer(d) + 0.5 * (d - 3) * np.log(t[inside])
    )
    return out


@dataclass(frozen=True)
class MarginalQuadrature:
    """Gauss rule integrating against tau^1_d on [-sqrt(d), sqrt(d)].

    Exact for polynomials up to ``exactness_degree``; weights are positive
    and sum to 1. ``nodes_hp``/``weights_hp`` carry the same rule at
    extended (long double) precision for cancellation-sensitive integrals
    such as the orthonormality Gram.
    """

    d: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    nodes_hp: np.ndarray
    weights_hp: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _orthonormal_rec(d: int, num_nodes: int) -> np.ndarray:
    # sqrt(b_k), k = 1..num_nodes, for the orthonormal three-term recurrence
    # u p_k = sqrt(b_{k+1}) p_{k+1} + sqrt(b_k) p_{k-1} of the weight
    # (1 - u^2)^{(d-3)/2} on [-1, 1], normalized as a probability measure:
    #     b_k = k (k + d - 3) / ((2k + d - 2)(2k + d - 4)).
    k = np.arange(1, num_nodes + 1, dtype=np.longdouble)
    b = k * (k + d - 3.0) / ((2 * k + d - 2.0) * (2 * k + d - 4.0))
    return np.sqrt(b)


def marginal_quadrature(d: int, num_nodes: int) -> MarginalQuadrature:
    """Golub-Welsch rule for the sphere marginal.

    Float64 eigenvalues of the symmetric tridiagonal Jacobi matrix seed the
    nodes, which are then Newton-polished in long double arithmetic on the
    orthonormal-polynomial recurrence; weights come from the standard
    reciprocal Christoffel sum w_i = 1 / sum_k p_k(u_i)^2. The extra
    precision costs microseconds and keeps the rule's cancellation noise far
    below the 1/B(d, k) scale of the Gegenbauer normalization.
    """
    if d < 3:
        raise BasisError(f"unsupported dimension d={d}; need d >= 3")
    if num_nodes < 2:
        raise BasisError(f"need at least 2 nodes, got {num_nodes}")
    n = num_nodes
    k64 = np.arange(1, n, dtype=np.float64)
    b64 = k64 * (k64 + d - 3.0) / ((2 * k64 + d - 2.0) * (2 * k64 + d - 4.0))
    seeds, _ = eigh_tridiagonal(np.zeros(n), np.sqrt(b64))
    rb = _orthonormal_rec(d, n)
    u = seeds.astype(np.longdouble)

    def value_and_derivative(u):
        p_prev = np.ones_like(u)
        p_cur = u / rb[0]
        dp_prev = np.zeros_like(u)
        dp_cur = np.ones_like(u) / rb[0]
        for k in range(1, n):
            p_next = (u * p_cur - rb[k - 1] * p_prev) / rb[k]
            dp_next = (p_cur + u * dp_cur - rb[k - 1] * dp_prev) / rb[k]
            p_prev, p_cur = p_cur, p_next
            dp_prev, dp_cur = dp_cur, dp_next
        return p_cur, dp_cur

    for _ in range(3):
        pn, dpn = value_and_derivative(u)
        u = u - pn / dpn
    p_prev = np.ones_like(u)
    p_cur = u / rb[0]
    christoffel = p_prev**2 + p_cur**2
    for k in range(1, n - 1):
        p_next = (u * p_cur - rb[k - 1] * p_prev) / rb[k]
        christoffel += p_next**2
        p_prev, p_cur = p_cur, p_next
    w = 1.0 / christoffel
    w /= w.sum()
    root_d = np.sqrt(np.longdouble(d))
    nodes_hp = root_d * u
    nodes = nodes_hp.astype(np.float64)
    weights = w.astype(np.float64)
    weights /= weights.sum()
    for arr in (nodes, weights, nodes_hp, w):
        arr.setflags(write=False)
    return MarginalQuadrature(
        d=d,
        nodes=nodes,
        weights=weights,
        exactness_degree=2 * num_nodes - 1,
        nodes_hp=nodes_hp,
        weights_hp=w,
    )


def orthonormality_gram(basis: GegenbauerBasis, quad: MarginalQuadrature) -> np.ndarray:
    """Gram matrix <Q_j(sqrt(d) .), Q_k(sqrt(d) .)> under tau^1_d by quadrature.

    Evaluated in long double; the exact value is diag(1/B(d, k)), and the
    off-diagonal cancellation is resolved well below 1e-10 relative to that
    scale.
    """
    if basis.d != quad.d:
        raise BasisError("basis/quadrature dimension mismatch")
    root_d = np.sqrt(np.longdouble(basis.d))
    design = basis.design_matrix(quad.nodes_hp / root_d)
    gram = (design * quad.weights_hp) @ design.T
    return gram.astype(np.float64)


def gegenbauer_coefficients(
    basis: GegenbauerBasis,
    sigma: Callable[[np.ndarray], np.ndarray],
    quad: MarginalQuadrature,
) -> np.ndarray:
    """Coefficients xi_{d,k} = int sigma(x) Q_k(sqrt(d) x) tau^1_d(dx), k <= K.

    The quadrature must be exact to degree 2K plus a smoothness margin, so
    that the rule resolves products of sigma's polynomial part with Q_K.
    """
    if basis.d != quad.d:
        raise BasisError(
            f"basis dimension {basis.d} != quadrature dimension {quad.d}"
        )
    margin = 10
    if quad.exactness_degree < 2 * basis.max_degree + margin:
        raise BasisError(
            f"quadrature exactness {quad.exactness_degree} insufficient for "
            f"max_degree {basis.max_degree} (need >= {2 * basis.max_degree + margin})"
        )
    vals = np.asarray(sigma(quad.nodes), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise BasisError(
            f"activation returned non-finite value at node x={quad.nodes[bad]!r}"
        )
    # Q_k(sqrt(d) x) = q_k(x / sqrt(d))
    design = basis.design_matrix(quad.nodes / math.sqrt(basis.d))
    return design @ (quad.weights * vals)


def piecewise_coefficients(
    basis: GegenbauerBasis,
    sigma: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float] = (0.0,),
    panel_nodes: int = 48,
) -> np.ndarray:
    """Gegenbauer coefficients of a piecewise-smooth profile, to machine precision.

    A single Gauss rule converges only algebraically across the kink of
    activations like ReLU. Splitting [-sqrt(d), sqrt(d)] at the breakpoints
    and integrating each smooth piece with composite Gauss-Legendre panels
    against the explicit marginal density restores spectral accuracy.
    """
    d = basis.d
    radius = math.sqrt(d)
    edges = sorted({-radius, radius, *(b for b in breakpoints if -radius < b < radius)})
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        # unit-length chunks: the density varies on O(1) scale in x
        m = max(1, int(math.ceil(b - a)))
        cuts = np.linspace(a, b, m + 1)
        panels.extend(zip(cuts[:-1], cuts[1:]))
    xg, wg = leggauss(panel_nodes)
    acc = np.zeros(basis.max_degree + 1)
    for a, b in panels:
        x = 0.5 * (b - a) * xg + 0.5 * (a + b)
        w = 0.5 * (b - a) * wg
        vals = np.asarray(sigma(x), dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise BasisError(
                f"activation returned non-finite value at node x={x[bad]!r}"
            )
        acc += basis.design_matrix(x / radius) @ (vals * marginal_density(d, x) * w)
    return acc


@dataclass(frozen=True)
class HermiteSeries:
    """Coefficients mu_k = E[g(G) He_k(G)] in the classical normalization.

    g is recovered (in L^2 of the standard Gaussian) as
    g(x) = sum_k mu_k He_k(x) / k!.
    """

    coefficients: np.ndarray

    @property
    def max_degree(self) -> int:
        return len(self.coefficients) - 1

    def reconstruct(self, x, kmax: int | None = None) -> np.ndarray:
        """Evaluate the truncated series sum_{k<=kmax} mu_k He_k(x)/k!."""
        mu = self.coefficients if kmax is None else self.coefficients[: kmax + 1]
        scaled = mu / np.array([math.factorial(k) for k in range(len(mu))])
        return herme.hermeval(np.asarray(x, dtype=np.float64), scaled)


def hermite_value(k: int, x) -> np.ndarray:
    """Probabilists' Hermite polynomial He_k(x)."""
    c = np.zeros(k + 1)
    c[k] = 1.0
    return herme.hermeval(np.asarray(x, dtype=np.float64), c)


def hermite_coefficients(
    sigma: Callable[[np.ndarray], np.ndarray],
    kmax: int,
    num_nodes: int = 200,
    breakpoints: Sequence[float] | None = None,
) -> HermiteSeries:
    """mu_0..mu_kmax of sigma via Gauss-Hermite quadrature.

    ``breakpoints`` opts into the piecewise-panel path (same reasoning as
    :func:`piecewise_coefficients`) for profiles with kinks.
    """
    if kmax < 0:
        raise BasisError("kmax must be >= 0")
    if breakpoints is None:
        x, w = herme.hermegauss(num_nodes)
        w = w / w.sum()
    else:
        lim = 12.0  # Gaussian mass beyond |x|=12 is ~1e-32
        edges = sorted({-lim, lim, *(b for b in breakpoints if -lim < b < lim)})
        xs, ws = [], []
        xg, wg = leggauss(48)
        for a, b in zip(edges[:-1], edges[1:]):
            m = max(1, int(math.ceil(b - a)))
            cuts = np.linspace(a, b, m + 1)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                xs.append(0.5 * (hi - lo) * xg + 0.5 * (lo + hi))
                ws.append(0.5 * (hi - lo) * wg)
        x = np.concatenate(xs)
        w = np.concatenate(ws) * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    vals = np.asarray(sigma(x), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise BasisError("non-finite activation value inside Gaussian quadrature")
    sq = float(np.dot(w, vals * vals))
    if not math.isfinite(sq):
        raise BasisError("activation is not square-integrable against the Gaussian")
    mu = np.empty(kmax + 1)
    for k in range(kmax + 1):
        mu[k] = np.dot(w, vals * hermite_value(k, x))
    mu.setflags(write=False)
    return HermiteSeries(coefficients=mu)


def check_mu_xi_limit(
    sigma: Callable[[np.ndarray], np.ndarray],
    k: int,
    d_list: Sequence[int],
    num_nodes: int = 200,
    breakpoints: Sequence[float] | None = None,
) -> np.ndarray:
    """xi_{d,k}(sigma) * (B(d,k) k!)^{1/2} for each d; converges to mu_k."""
    if k > 6:
        raise BasisError("limit check supported for k <= 6")
    out = np.empty(len(d_list))
    scale = math.factorial(k)
    for i, d in enumerate(d_list):
        basis = GegenbauerBasis(d, max(k, 1))
        if breakpoints is None:
            xi = gegenbauer_coefficients(
                basis, sigma, marginal_quadrature(d, num_nodes)
            )
        else:
            xi = piecewise_coefficients(basis, sigma, breakpoints)
        out[i] = xi[k] * math.sqrt(dim_spherical_harmonics(d, k) * scale)
    return out

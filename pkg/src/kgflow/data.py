"""Synthetic data on the sphere: covariates, targets, noise, augmentation.

Targets come with exact per-degree L^2 norms, which drive the closed-form
oracle curve and the plateau predictions. Three kinds are supported:

* ``ridge_hermite(a)`` — f(x) = a_0 He_0(x_1) + ... + a_k He_k(x_1);
* ``cyclic_cubic`` — the shift-invariant cubic
  f(x) = (sum_i x_i + sum_i x_i x_{i+1} + sum_i x_i x_{i+1} x_{i+2}) / sqrt(3d)
  with indices mod d;
* ``custom_ridge(profile)`` — f(x) = profile(x_1) for any square-integrable
  scalar profile.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.polynomial.hermite_e as herme

from .basis import (
    GegenbauerBasis,
    dim_spherical_harmonics,
    gegenbauer_coefficients,
    harmonic_dims,
    marginal_quadrature,
    piecewise_coefficients,
)
from .kernels import Activation


class DataError(ValueError):
    """Invalid data construction request."""


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic per-stream generator derived from (seed, stream indices).

    Distinct streams are statistically independent and order-independent, so
    trials may run concurrently.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=stream))


def sample_sphere(n: int, d: int, rng: np.random.Generator | int) -> np.ndarray:
    """n i.i.d. points uniform on S^{d-1}(sqrt d): normalized Gaussians."""
    if n < 1 or d < 3:
        raise DataError(f"need n >= 1 and d >= 3, got n={n}, d={d}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    X = rng.standard_normal((n, d))
    X *= math.sqrt(d) / np.linalg.norm(X, axis=1, keepdims=True)
    return X


@dataclass(frozen=True)
class TargetFunction:
    """Regression target with an exact degree decomposition."""

    kind: str  # ridge_hermite | cyclic_cubic | custom_ridge
    d: int
    hermite_a: tuple[float, ...] = ()
    profile: Activation | None = None

    def describe(self) -> str:
        if self.kind == "ridge_hermite":
            return "ridge_hermite:" + ",".join(repr(a) for a in self.hermite_a)
        if self.kind == "cyclic_cubic":
            return "cyclic_cubic"
        return f"custom_ridge:{self.profile.name}"


def ridge_hermite_target(d: int, a: Sequence[float]) -> TargetFunction:
    if len(a) == 0:
        raise DataError("ridge_hermite target needs at least one coefficient")
    return TargetFunction(kind="ridge_hermite", d=d, hermite_a=tuple(float(v) for v in a))


def cyclic_cubic_target(d: int) -> TargetFunction:
    if d < 5:
        raise DataError(
            "cyclic_cubic needs d >= 5 (below that the shifted monomials collide)"
        )
    return TargetFunction(kind="cyclic_cubic", d=d)


def custom_ridge_target(d: int, profile: Activation) -> TargetFunction:
    return TargetFunction(kind="custom_ridge", d=d, profile=profile)


def parse_target(descriptor: str, d: int) -> TargetFunction:
    """Parse CLI descriptors: cyclic_cubic | ridge_hermite:a0,a1,..."""
    key = descriptor.strip()
    if key == "cyclic_cubic":
        return cyclic_cubic_target(d)
    if key.startswith("ridge_hermite:"):
        a = [float(v) for v in key.split(":", 1)[1].split(",")]
        return ridge_hermite_target(d, a)
    raise DataError(f"unknown target descriptor {descriptor!r}")


def eval_target(target: TargetFunction, X: np.ndarray) -> np.ndarray:
    """Exact pointwise target values on rows of X."""
    X = np.asarray(X, dtype=np.float64)
    if target.kind == "ridge_hermite":
        return herme.hermeval(X[:, 0], np.asarray(target.hermite_a))
    if target.kind == "custom_ridge":
        return np.asarray(target.profile(X[:, 0]), dtype=np.float64)
    if target.kind == "cyclic_cubic":
        d = target.d
        x1 = X
        x2 = np.roll(X, -1, axis=1)
        x3 = np.roll(X, -2, axis=1)
        # summing each term multiset in sorted order makes the value exactly
        # invariant under cyclic shifts (identical multiset -> identical sum)
        lin = np.sort(x1, axis=1).sum(axis=1)
        quad = np.sort(x1 * x2, axis=1).sum(axis=1)
        cub = np.sort(x1 * x2 * x3, axis=1).sum(axis=1)
        return (lin + quad + cub) / math.sqrt(3.0 * d)
    raise DataError(f"unknown target kind {target.kind!r}")


def _ridge_degree_norms(target: TargetFunction, kmax: int) -> np.ndarray:
    """|P_k f|^2 = xi_k^2 B(d,k) from the profile's Gegenbauer coefficients."""
    d = target.d
    basis = GegenbauerBasis(d, kmax)
    if target.kind == "ridge_hermite":
        profile = lambda x: herme.hermeval(x, np.asarray(target.hermite_a))
        xi = gegenbauer_coefficients(
            basis, profile, marginal_quadrature(d, max(80, 2 * kmax + 20))
        )
    elif target.profile is not None and target.profile.breakpoints:
        xi = piecewise_coefficients(basis, target.profile.fn, target.profile.breakpoints)
    else:
        xi = gegenbauer_coefficients(
            basis, target.profile.fn, marginal_quadrature(d, max(200, 2 * kmax + 20))
        )
    return xi**2 * harmonic_dims(d, kmax)


def degree_norms(target: TargetFunction, kmax: int | None = None) -> np.ndarray:
    """Exact energies |P_k f|^2 for k = 0..kmax.

    For ridge targets these are squared Gegenbauer coefficients times the
    harmonic dimension. The cyclic cubic splits into three pure-degree
    harmonic components whose norms follow from exact sphere moments:
    E[x1^2 x2^2] = d/(d+2) and E[x1^2 x2^2 x3^2] = d^2/((d+2)(d+4)).
    """
    if target.kind == "cyclic_cubic":
        d = target.d
        if kmax is None:
            kmax = 3
        norms = np.zeros(kmax + 1)
        if len(norms) > 1:
            norms[1] = 1.0 / 3.0
        if len(norms) > 2:
            norms[2] = d / (3.0 * (d + 2.0))
        if len(norms) > 3:
            norms[3] = d * d / (3.0 * (d + 2.0) * (d + 4.0))
        return norms
    if kmax is None:
        kmax = max(3, len(target.hermite_a) - 1) if target.kind == "ridge_hermite" else 30
    return _ridge_degree_norms(target, kmax)


def target_l2_norm2(target: TargetFunction, kmax: int | None = None) -> float:
    """Exact squared L^2 norm of the target.

    Polynomial targets carry all their mass below kmax, so the degree sum is
    exact; for non-polynomial ridge profiles it is E[profile(x_1)^2].
    """
    if target.kind == "cyclic_cubic":
        return float(degree_norms(target).sum())
    if target.kind == "ridge_hermite":
        return float(degree_norms(target, max(3, len(target.hermite_a) - 1)).sum())
    d = target.d
    quad = marginal_quadrature(d, 400)
    return float(quad.integrate(np.asarray(target.profile(quad.nodes)) ** 2))


@dataclass(frozen=True)
class Dataset:
    """Covariates on S^{d-1}(sqrt d) with noisy responses and RNG provenance."""

    X: np.ndarray
    y: np.ndarray
    noise_variance: float
    seed: int
    target: TargetFunction

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def make_dataset(
    target: TargetFunction,
    n: int,
    noise_variance: float = 0.0,
    seed: int = 0,
    stream: tuple[int, ...] = (),
) -> Dataset:
    """Sample covariates and responses y_i = f(x_i) + eps_i, reproducibly."""
    if noise_variance < 0:
        raise DataError("noise variance must be >= 0")
    rng = rng_for(seed, *stream)
    X = sample_sphere(n, target.d, rng)
    y = eval_target(target, X)
    if noise_variance > 0:
        y = y + math.sqrt(noise_variance) * rng.standard_normal(n)
    return Dataset(X=X, y=y, noise_variance=noise_variance, seed=seed, target=target)


def augment_cyclic(ds: Dataset, max_rows: int = 2_000_000) -> Dataset:
    """All d cyclic shifts of every row, responses repeated.

    Ordering is shift-major: the identity-shift block comes first, then the
    shift-by-one block, etc., matching the block structure used in the
    augmented-flow equivalence check.
    """
    n, d = ds.X.shape
    if n * d > max_rows:
        raise DataError(
            f"augmented dataset would have {n * d} rows, exceeding the cap "
            f"of {max_rows}; raise max_rows explicitly to proceed"
        )
    blocks = [np.roll(ds.X, -i, axis=1) for i in range(d)]
    return Dataset(
        X=np.concatenate(blocks, axis=0),
        y=np.tile(ds.y, d),
        noise_variance=ds.noise_variance,
        seed=ds.seed,
        target=ds.target,
    )


def save_dataset(ds: Dataset, path: str) -> None:
    """Columnar text export: metadata header, then one row of x..y per sample."""
    with open(path, "w") as fh:
        fh.write(
            f"# d={ds.d} n={ds.n} sigma_eps2={ds.noise_variance:.12g} "
            f"seed={ds.seed} target={ds.target.describe()}\n"
        )
        for xi, yi in zip(ds.X, ds.y):
            fh.write(" ".join(f"{v:.17g}" for v in xi) + f" {yi:.17g}\n")


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# "):
            raise DataError(f"{path}: missing dataset header line")
        meta = dict(item.split("=", 1) for item in header[2:].split())
        body = np.loadtxt(io.StringIO(fh.read()), ndmin=2)
    d = int(meta["d"])
    target = parse_target(meta["target"], d)
    return Dataset(
        X=body[:, :d],
        y=body[:, d],
        noise_variance=float(meta["sigma_eps2"]),
        seed=int(meta["seed"]),
        target=target,
    )

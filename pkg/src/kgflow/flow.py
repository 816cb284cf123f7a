"""Exact finite-sample gradient-flow trajectory via one eigendecomposition.

The fitted values on the training set solve u(t) = (I - exp(-t H/n)) y, so a
single symmetric eigendecomposition H = V diag(lam) V^T serves the entire
time grid:

* train error  (1/n) sum_i exp(-2 t lam_i / n) (V^T y)_i^2,
* representer coefficients a(t) = V diag(phi(lam)) V^T y with
  phi(lam) = (1 - exp(-t lam / n)) / lam and phi(0) := t/n, which never
  divides by a vanishing eigenvalue,
* predictions h(x)^T a(t) through a kernel cross-matrix.

Neither H^{-1} nor exp(-t H / n) is ever formed explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import harmonic_dims
from .data import Dataset, TargetFunction, eval_target
from .kernels import (
    CyclicKernel,
    KernelSpectrum,
    cross_kernel_matrix,
    cyclic_cross_matrix,
    tail_traces,
)


class FlowError(ValueError):
    """Invalid flow computation input or failed internal consistency check."""


@dataclass(frozen=True)
class FlowSolution:
    """Eigendecomposition of the kernel matrix plus the rotated response."""

    eigenvalues: np.ndarray
    eigenbasis: np.ndarray
    rotated_response: np.ndarray
    n: int
    kernel: KernelSpectrum | CyclicKernel | None = None
    dataset: Dataset | None = None


def solve_flow(
    H: np.ndarray,
    y: np.ndarray,
    kernel: KernelSpectrum | CyclicKernel | None = None,
    dataset: Dataset | None = None,
) -> FlowSolution:
    """Eigendecompose H and rotate y into the eigenbasis."""
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = H.shape[0]
    if H.shape != (n, n) or y.shape != (n,):
        raise FlowError(f"shape mismatch: H {H.shape}, y {y.shape}")
    scale = max(1.0, float(np.abs(H).max()))
    if np.abs(H - H.T).max() > 1e-10 * scale:
        raise FlowError("kernel matrix is not symmetric within 1e-10")
    if not np.all(np.isfinite(y)):
        raise FlowError("response vector contains non-finite entries")
    try:
        lam, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise FlowError(f"eigendecomposition failed: {exc}") from exc
    trace = float(np.trace(H))
    floor = -1e-10 * max(trace, 1.0)
    if lam.min() < floor:
        raise FlowError(
            f"kernel matrix has genuinely negative eigenvalue {lam.min()!r} "
            f"(tolerance {floor!r})"
        )
    lam = np.maximum(lam, 0.0)
    return FlowSolution(
        eigenvalues=lam,
        eigenbasis=V,
        rotated_response=V.T @ y,
        n=n,
        kernel=kernel,
        dataset=dataset,
    )


def train_error(sol: FlowSolution, t) -> np.ndarray | float:
    """(1/n) |u(t) - y|^2 = (1/n) y^T exp(-2 t H / n) y."""
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(tt < 0):
        raise FlowError("time must be nonnegative")
    decay = np.exp(-2.0 * np.outer(tt, sol.eigenvalues) / sol.n)
    vals = decay @ (sol.rotated_response**2) / sol.n
    return float(vals[0]) if np.isscalar(t) else vals


def _phi(lam: np.ndarray, t: float, n: int) -> np.ndarray:
    # (1 - exp(-t lam / n)) / lam with the removable singularity phi(0) = t/n
    out = np.full_like(lam, t / n)
    pos = lam > 0
    out[pos] = -np.expm1(-t * lam[pos] / n) / lam[pos]
    return out


def flow_coefficients(sol: FlowSolution, t) -> np.ndarray:
    """Representer coefficients a(t) = H^+ u(t), shape (n,) or (n, len(t))."""
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(tt < 0):
        raise FlowError("time must be nonnegative")
    phi = np.stack([_phi(sol.eigenvalues, ti, sol.n) for ti in tt], axis=1)
    coef = sol.eigenbasis @ (phi * sol.rotated_response[:, None])
    return coef[:, 0] if np.isscalar(t) else coef


def _cross(sol: FlowSolution, X_test: np.ndarray) -> np.ndarray:
    if sol.kernel is None or sol.dataset is None:
        raise FlowError("prediction requires kernel and dataset references")
    if isinstance(sol.kernel, CyclicKernel):
        return cyclic_cross_matrix(sol.kernel, X_test, sol.dataset.X)
    return cross_kernel_matrix(sol.kernel, X_test, sol.dataset.X)


def predict(sol: FlowSolution, X_test: np.ndarray, t) -> np.ndarray:
    """Fitted function h(x)^T a(t) at the test points.

    Returns shape (n_test,) for scalar t, else (n_test, len(t)).
    """
    K = _cross(sol, np.asarray(X_test, dtype=np.float64))
    coef = flow_coefficients(sol, t)
    return K @ coef


def test_error_mc(
    sol: FlowSolution,
    target: TargetFunction,
    sigma_eps2: float,
    X_test: np.ndarray,
    t,
) -> tuple[np.ndarray | float, np.ndarray | float]:
    """Monte Carlo test error and its standard error over the test points."""
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.size == 0:
        raise FlowError("empty test set")
    fvals = eval_target(target, X_test)
    preds = predict(sol, X_test, np.atleast_1d(np.asarray(t, dtype=np.float64)))
    sq = (fvals[:, None] - preds) ** 2
    m = sq.mean(axis=0) + sigma_eps2
    se = sq.std(axis=0, ddof=1) / math.sqrt(X_test.shape[0])
    if np.isscalar(t):
        return float(m[0]), float(se[0])
    return m, se


def build_E_vector(
    spec: KernelSpectrum, target: TargetFunction, X: np.ndarray
) -> np.ndarray:
    """E_i = E_x[f(x) H(x, x_i)] for ridge targets.

    With f = profile(<e_1, x>), both f and the kernel slice expand in the
    same Gegenbauer family, and the degree-k cross term reduces to
    xi^f_k xi^H_k B(d,k) Q_k(sqrt(d) <e_1, x_i>) where xi^H_k is the
    operator eigenvalue.
    """
    if target.kind not in ("ridge_hermite", "custom_ridge"):
        raise FlowError(
            "analytic E vector requires a ridge target; use test_error_mc "
            "for general targets"
        )
    xi_f = _ridge_profile_coefficients(target, spec.K)
    X = np.asarray(X, dtype=np.float64)
    design = spec.basis.design_matrix(X[:, 0] / math.sqrt(spec.d))
    weights = spec.xi * xi_f * harmonic_dims(spec.d, spec.K)
    return design.T @ weights


def _ridge_profile_coefficients(target: TargetFunction, kmax: int) -> np.ndarray:
    from . import basis as _b
    import numpy.polynomial.hermite_e as herme

    d = target.d
    gb = _b.GegenbauerBasis(d, kmax)
    if target.kind == "ridge_hermite":
        prof = lambda x: herme.hermeval(x, np.asarray(target.hermite_a))
        return _b.gegenbauer_coefficients(
            gb, prof, _b.marginal_quadrature(d, max(80, 2 * kmax + 20))
        )
    if target.profile.breakpoints:
        return _b.piecewise_coefficients(gb, target.profile.fn, target.profile.breakpoints)
    return _b.gegenbauer_coefficients(
        gb, target.profile.fn, _b.marginal_quadrature(d, max(200, 2 * kmax + 20))
    )


def build_M_matrix(
    spec: KernelSpectrum, X: np.ndarray, m_star: int | None = None
) -> np.ndarray:
    """M_ij = E_x[H(x, x_i) H(x, x_j)] = sum_k xi_k^2 B(d,k) Q_k(<x_i, x_j>).

    With m_star < K the series is truncated at m_star and the neglected tail
    trace is folded into the diagonal (same policy as the kernel matrix);
    m_star = K keeps the full truncated series and adds nothing.
    """
    from ._kernelcore import series_eval

    if m_star is None:
        m_star = spec.K
    if m_star > spec.K:
        raise FlowError(f"m_star {m_star} exceeds spectrum truncation {spec.K}")
    X = np.asarray(X, dtype=np.float64)
    weights = (spec.xi**2 * harmonic_dims(spec.d, spec.K))[: m_star + 1]
    S = np.clip((X @ X.T) / spec.d, -1.0, 1.0)
    M = series_eval(S, weights, spec.d)
    M = 0.5 * (M + M.T)
    kappa_m = tail_traces(spec, m_star).kappa_m
    if kappa_m:
        M[np.diag_indices_from(M)] += kappa_m
    return M


def test_error_analytic(
    sol: FlowSolution,
    E: np.ndarray,
    M: np.ndarray,
    target_norm2: float,
    sigma_eps2: float,
    t,
) -> np.ndarray | float:
    """|f|^2 - 2 a(t)^T E + a(t)^T M a(t) + sigma_eps^2 with a(t) = H^+ u(t)."""
    E = np.asarray(E, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    n = sol.n
    if E.shape != (n,) or M.shape != (n, n):
        raise FlowError(f"dimension mismatch: E {E.shape}, M {M.shape}, n {n}")
    coef = flow_coefficients(sol, np.atleast_1d(np.asarray(t, dtype=np.float64)))
    lin = -2.0 * (E @ coef)
    quadr = np.einsum("it,it->t", coef, M @ coef)
    vals = target_norm2 + lin + quadr + sigma_eps2
    return float(vals[0]) if np.isscalar(t) else vals


@dataclass(frozen=True)
class PlateauPrediction:
    """Theoretical plateau levels for a (t, n) pair in the staircase windows."""

    j: int
    s: int
    alpha: int
    predicted_test: float
    predicted_train: float
    train_zero: bool
    degenerate_window: bool
    window_margin: float


def theoretical_plateaus(
    spec: KernelSpectrum,
    norms: np.ndarray,
    sigma_eps2: float,
    t: float,
    n: int,
    alpha: int = 0,
    delta: float = 0.1,
) -> PlateauPrediction:
    """Predicted test/train plateau for time t and sample size n.

    j = floor(log_d t) and s = floor(log_d n + alpha) locate the staircase
    windows; the test plateau is the target mass above degree min(j, s) plus
    the noise floor. The train value matches the test plateau at level j
    while t kappa_H / (n d^alpha) is small and is flagged as zero once the
    flow has interpolated. Exponents within delta of an integer are flagged
    degenerate (the corresponding stage collapses there).
    """
    if t <= 1 or n <= 1:
        raise FlowError("plateau prediction needs t > 1 and n > 1")
    norms = np.asarray(norms, dtype=np.float64)
    logd = math.log(spec.d)
    et = math.log(t) / logd
    en = math.log(n) / logd + alpha
    j = int(math.floor(et))
    s = int(math.floor(en))
    margin = min(
        abs(et - round(et)),
        abs(en - round(en)),
    )
    degenerate = margin < delta

    def mass_above(level: int) -> float:
        return float(norms[level + 1 :].sum()) if level + 1 < len(norms) else 0.0

    predicted_test = mass_above(min(j, s)) + sigma_eps2
    kappa_h = tail_traces(spec, min(s, spec.K)).kappa_h
    ratio = t * kappa_h / (n * spec.d**alpha)
    train_zero = ratio >= 1.0
    predicted_train = 0.0 if train_zero else mass_above(j) + sigma_eps2
    return PlateauPrediction(
        j=j,
        s=s,
        alpha=alpha,
        predicted_test=predicted_test,
        predicted_train=predicted_train,
        train_zero=train_zero,
        degenerate_window=degenerate,
        window_margin=margin,
    )


@dataclass(frozen=True)
class ErrorCurves:
    """Per-trial train/test curves with aggregates and the oracle overlay."""

    times: np.ndarray
    train: np.ndarray  # (trials, nt)
    test: np.ndarray  # (trials, nt)
    oracle: np.ndarray  # (nt,)
    plateau: np.ndarray  # (nt,)
    metadata: dict = field(default_factory=dict)

    @property
    def trials(self) -> int:
        return self.train.shape[0]

    @property
    def train_mean(self) -> np.ndarray:
        return self.train.mean(axis=0)

    @property
    def train_std(self) -> np.ndarray | None:
        return self.train.std(axis=0, ddof=1) if self.trials >= 2 else None

    @property
    def test_mean(self) -> np.ndarray:
        return self.test.mean(axis=0)

    @property
    def test_std(self) -> np.ndarray | None:
        return self.test.std(axis=0, ddof=1) if self.trials >= 2 else None

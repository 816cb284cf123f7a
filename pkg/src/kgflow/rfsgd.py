"""Minibatch SGD for two-layer random-feature models, in both worlds.

The model is f(x; a) = (1/sqrt(N)) sum_i a_i phi_i(x) with frozen random
first-layer directions w_i uniform on the unit sphere and
phi_i(x) = sigma(<w_i, x>), or its average over all cyclic shifts of x for
the invariant variant. Only the second layer a is trained, from a = 0.

Gradients follow the same convention as the kernel flow (no factor 2, batch
sums normalized by the reference sample size n), so one SGD iteration
advances the flow clock by eta * b / n and trajectories overlay directly
onto gradient-flow curves via t_eff = iteration * eta * b / n.

The empirical world does multi-pass SGD over a fixed dataset (shuffled
epochs, without replacement); the oracle world draws a fresh batch from the
population at every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, TargetFunction, eval_target, rng_for, sample_sphere
from .kernels import Activation


class SGDError(ValueError):
    """Invalid SGD configuration or input."""


class SGDDivergence(RuntimeError):
    """Training error blew up; the step size is too large for the spectrum."""


@dataclass(frozen=True)
class RFModel:
    """Random first-layer directions plus a trainable second layer."""

    W: np.ndarray  # (N, d), rows on the unit sphere
    a: np.ndarray  # (N,), mutated in place during training
    activation: Activation
    cyclic: bool = False

    @property
    def num_features(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]


def init_rf_model(
    num_features: int,
    d: int,
    activation: Activation,
    cyclic: bool = False,
    rng: np.random.Generator | int = 0,
) -> RFModel:
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    W = rng.standard_normal((num_features, d))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    return RFModel(W=W, a=np.zeros(num_features), activation=activation, cyclic=cyclic)


def features(model: RFModel, X: np.ndarray) -> np.ndarray:
    """Feature matrix phi(X), shape (n, N); the 1/sqrt(N) lives in predict."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not model.cyclic:
        return np.asarray(model.activation(X @ model.W.T), dtype=np.float64)
    d = model.d
    acc = np.zeros((X.shape[0], model.num_features))
    for i in range(d):
        acc += model.activation(np.roll(X, -i, axis=1) @ model.W.T)
    acc /= d
    return acc


def predict_from_features(model: RFModel, Phi: np.ndarray) -> np.ndarray:
    return (Phi @ model.a) / math.sqrt(model.num_features)


@dataclass(frozen=True)
class SGDConfig:
    learning_rate: float
    batch_size: int
    momentum: float = 0.9
    steps: int = 1000
    eval_grid: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise SGDError("learning rate must be >= 0")
        if not (0 <= self.momentum < 1):
            raise SGDError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise SGDError("batch size must be >= 1")


@dataclass(frozen=True)
class SGDTrajectory:
    """Errors recorded along an SGD run."""

    iterations: np.ndarray
    t_eff: np.ndarray
    train: np.ndarray  # NaN for oracle-world runs
    test: np.ndarray
    metadata: dict = field(default_factory=dict)


def _eval_iterations(cfg: SGDConfig) -> np.ndarray:
    grid = np.array(sorted(set(int(i) for i in cfg.eval_grid if 0 <= i <= cfg.steps)),
                    dtype=np.int64)
    if grid.size == 0:
        grid = np.unique(np.round(np.linspace(0, cfg.steps, 21)).astype(np.int64))
    return grid


def sgd_empirical(
    model: RFModel,
    dataset: Dataset,
    cfg: SGDConfig,
    X_test: np.ndarray,
    time_scale_n: int | None = None,
) -> SGDTrajectory:
    """Multi-pass minibatch SGD on a fixed training set.

    Heavy-ball momentum: v <- beta v + g, a <- a - eta v, with batch gradient
    g = (1 / (n sqrt(N))) Phi_b^T (Phi_b a / sqrt(N) - y_b). Batches are
    contiguous slices of a per-epoch shuffle. Deterministic given cfg.seed.
    """
    n = dataset.n
    if n == 0:
        raise SGDError("empty dataset")
    scale_n = n if time_scale_n is None else time_scale_n
    rng = rng_for(cfg.seed, 0)
    Phi = features(model, dataset.X)
    Phi_test = features(model, X_test)
    f_test = eval_target(dataset.target, X_test)
    sqn = math.sqrt(model.num_features)
    a = model.a
    a[:] = 0.0
    v = np.zeros_like(a)
    evals = _eval_iterations(cfg)
    train_out, test_out = [], []

    def record():
        resid = Phi @ a / sqn - dataset.y
        tr = float(resid @ resid) / n
        pe = f_test - Phi_test @ a / sqn
        te = float(pe @ pe) / len(f_test) + dataset.noise_variance
        train_out.append(tr)
        test_out.append(te)
        return tr

    initial = None
    order = rng.permutation(n)
    pos = 0
    next_eval = 0
    for it in range(cfg.steps + 1):
        if next_eval < len(evals) and it == evals[next_eval]:
            tr = record()
            if initial is None:
                initial = max(tr, 1e-300)
            elif not math.isfinite(tr) or tr > 1e3 * initial:
                raise SGDDivergence(
                    f"train error {tr:.3e} exceeds 1000x initial {initial:.3e} "
                    f"at iteration {it}; reduce the step size below "
                    f"2/lambda_max of the feature Gram"
                )
            next_eval += 1
        if it == cfg.steps:
            break
        if pos + cfg.batch_size > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos : pos + cfg.batch_size]
        pos += cfg.batch_size
        Pb = Phi[idx]
        resid = Pb @ a / sqn - dataset.y[idx]
        g = (Pb.T @ resid) / (scale_n * sqn)
        if cfg.momentum:
            v *= cfg.momentum
            v += g
        else:
            v = g
        a -= cfg.learning_rate * v
    t_eff = evals * cfg.learning_rate * cfg.batch_size / scale_n
    return SGDTrajectory(
        iterations=evals,
        t_eff=t_eff,
        train=np.array(train_out),
        test=np.array(test_out),
        metadata={"world": "empirical", "n": n, "time_scale_n": scale_n},
    )


def sgd_oracle(
    model: RFModel,
    target: TargetFunction,
    sigma_eps2: float,
    cfg: SGDConfig,
    X_test: np.ndarray,
    time_scale_n: int,
    pool_chunk: int = 4000,
) -> SGDTrajectory:
    """One-pass SGD with a fresh batch from the population at every step.

    Same update rule and time scale as :func:`sgd_empirical` so the two
    worlds share a clock; only test error is recorded. Fresh covariates are
    generated (and featurized) in chunks of ``pool_chunk`` points to bound
    memory while keeping the feature computation inside large BLAS calls.
    """
    rng = rng_for(cfg.seed, 1)
    Phi_test = features(model, X_test)
    f_test = eval_target(target, X_test)
    sqn = math.sqrt(model.num_features)
    a = model.a
    a[:] = 0.0
    v = np.zeros_like(a)
    evals = _eval_iterations(cfg)
    test_out = []

    def record():
        pe = f_test - Phi_test @ a / sqn
        test_out.append(float(pe @ pe) / len(f_test) + sigma_eps2)

    iters_per_chunk = max(1, pool_chunk // cfg.batch_size)
    next_eval = 0
    it = 0
    while True:
        if next_eval < len(evals) and it == evals[next_eval]:
            record()
            next_eval += 1
        if it == cfg.steps:
            break
        chunk = min(iters_per_chunk, cfg.steps - it)
        Xc = sample_sphere(chunk * cfg.batch_size, model.d, rng)
        yc = eval_target(target, Xc)
        if sigma_eps2 > 0:
            yc = yc + math.sqrt(sigma_eps2) * rng.standard_normal(len(yc))
        Pc = features(model, Xc)
        for k in range(chunk):
            if next_eval < len(evals) and it == evals[next_eval]:
                record()
                next_eval += 1
            sl = slice(k * cfg.batch_size, (k + 1) * cfg.batch_size)
            Pb = Pc[sl]
            resid = Pb @ a / sqn - yc[sl]
            g = (Pb.T @ resid) / (time_scale_n * sqn)
            if cfg.momentum:
                v *= cfg.momentum
                v += g
            else:
                v = g
            a -= cfg.learning_rate * v
            it += 1
    t_eff = evals * cfg.learning_rate * cfg.batch_size / time_scale_n
    return SGDTrajectory(
        iterations=evals,
        t_eff=t_eff,
        train=np.full(len(evals), np.nan),
        test=np.array(test_out),
        metadata={"world": "oracle", "time_scale_n": time_scale_n},
    )


def default_step_size(
    normalized_matrix: np.ndarray,
    c: float = 0.5,
    iters: int = 100,
    rel_tol: float = 1e-3,
) -> tuple[float, float]:
    """eta = c / lambda_max of a normalized PSD matrix, via power iteration.

    Returns (eta, lambda_max). Raises if 100 power steps have not driven the
    eigen-residual below rel_tol * lambda_max.
    """
    M = np.asarray(normalized_matrix, dtype=np.float64)
    n = M.shape[0]
    if M.shape != (n, n):
        raise SGDError("matrix must be square")
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = M @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            raise SGDError("power iteration hit the zero vector (nilpotent input?)")
        v = w / norm
        lam = float(v @ (M @ v))
    residual = float(np.linalg.norm(M @ v - lam * v))
    if residual > rel_tol * max(abs(lam), 1e-300):
        raise SGDError(
            f"power iteration did not converge: residual {residual:.3e} "
            f"after {iters} steps (lambda estimate {lam:.6e})"
        )
    return c / lam, lam

"""Experiment orchestration: trials, aggregation, CSV/SVG emission, checks.

The flow experiment reproduces the three-stage learning curves: per trial it
samples a dataset, assembles the kernel matrix, eigendecomposes once, and
evaluates train/test error over a log time grid; the oracle curve is
analytic. The rf-sgd experiment runs minibatch SGD for random-feature models
in both worlds on the same clock. Two standalone verification commands check
the invariant-kernel/data-augmentation equivalence and the step-size rule.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig, from_metadata, to_metadata
from .data import (
    Dataset,
    augment_cyclic,
    degree_norms,
    make_dataset,
    parse_target,
    rng_for,
    sample_sphere,
    target_l2_norm2,
)
from .flow import (
    ErrorCurves,
    FlowSolution,
    flow_coefficients,
    predict,
    solve_flow,
    test_error_mc,
    theoretical_plateaus,
    train_error,
)
from .kernels import (
    CyclicKernel,
    KernelSpectrum,
    build_dot_kernel,
    cross_kernel_matrix,
    cyclic_cross_matrix,
    cyclic_kernel_matrix,
    kernel_matrix,
    resolve_activation,
)
from .oracle import oracle_risk
from .rfsgd import SGDConfig, default_step_size, features, init_rf_model, sgd_empirical, sgd_oracle
from .svgplot import Series, write_line_plot


def build_kernel(cfg: ExperimentConfig) -> KernelSpectrum | CyclicKernel:
    spec = build_dot_kernel(resolve_activation(cfg.activation), cfg.d, cfg.K)
    return CyclicKernel(spec) if cfg.cyclic else spec


def base_spectrum(kernel: KernelSpectrum | CyclicKernel) -> KernelSpectrum:
    return kernel.base if isinstance(kernel, CyclicKernel) else kernel


def _trial_curves(
    cfg: ExperimentConfig,
    kernel: KernelSpectrum | CyclicKernel,
    times: np.ndarray,
    trial: int,
) -> tuple[np.ndarray, np.ndarray]:
    target = parse_target(cfg.target, cfg.d)
    ds = make_dataset(target, cfg.n, cfg.sigma_eps2, cfg.seed, stream=(trial,))
    if isinstance(kernel, CyclicKernel):
        H = cyclic_kernel_matrix(kernel, ds.X)
    else:
        H = kernel_matrix(kernel, ds.X)
    sol = solve_flow(H, ds.y, kernel=kernel, dataset=ds)
    tr = train_error(sol, times)
    X_test = sample_sphere(cfg.test_set_size, cfg.d, rng_for(cfg.seed, trial, 1))
    te, _ = test_error_mc(sol, target, cfg.sigma_eps2, X_test, times)
    return tr, te


def run_flow_trials(cfg: ExperimentConfig, times: np.ndarray | None = None) -> ErrorCurves:
    """All trials of the gradient-flow experiment; returns aggregated curves."""
    cfg.validate()
    kernel = build_kernel(cfg)
    spec = base_spectrum(kernel)
    target = parse_target(cfg.target, cfg.d)
    if times is None:
        times = cfg.time_grid()
    norms = degree_norms(target)
    alpha = 1 if cfg.cyclic else 0
    workers = min(cfg.trials, os.cpu_count() or 1)

    def one(trial: int):
        try:
            return _trial_curves(cfg, kernel, times, trial)
        except Exception as exc:
            raise RuntimeError(
                f"trial {trial} failed ({type(exc).__name__}: {exc}); "
                f"config: {to_metadata(cfg, 'flow', 'n/a')}"
            ) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(cfg.trials)))
    else:
        results = [one(t) for t in range(cfg.trials)]
    train = np.stack([r[0] for r in results])
    test = np.stack([r[1] for r in results])
    orc = np.asarray(oracle_risk(spec, norms, cfg.sigma_eps2, times))
    plateau = np.array(
        [
            theoretical_plateaus(spec, norms, cfg.sigma_eps2, t, cfg.n, alpha).predicted_test
            if t > 1
            else np.nan
            for t in times
        ]
    )
    return ErrorCurves(
        times=times,
        train=train,
        test=test,
        oracle=orc,
        plateau=plateau,
        metadata={"kind": "flow", "n": cfg.n, "alpha": alpha},
    )


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{v:.12g}"


def write_curves_csv(path: str, cfg: ExperimentConfig, curves: ErrorCurves) -> None:
    ts = time.strftime("%Y-%m-%dT%H:%M:%S")
    tr_std = curves.train_std
    te_std = curves.test_std
    try:
        with open(path, "w") as fh:
            fh.write(to_metadata(cfg, curves.metadata.get("kind", "flow"), ts) + "\n")
            fh.write("t,train_mean,train_std,test_mean,test_std,oracle,plateau_pred\n")
            for i, t in enumerate(curves.times):
                row = [
                    _fmt_cell(float(t)),
                    _fmt_cell(float(curves.train_mean[i])),
                    _fmt_cell(float(tr_std[i]) if tr_std is not None else None),
                    _fmt_cell(float(curves.test_mean[i])),
                    _fmt_cell(float(te_std[i]) if te_std is not None else None),
                    _fmt_cell(float(curves.oracle[i])),
                    _fmt_cell(float(curves.plateau[i])),
                ]
                fh.write(",".join(row) + "\n")
    except BaseException:
        if os.path.exists(path):
            os.unlink(path)
        raise


def _flow_plot(path: str, curves: ErrorCurves, title: str, xscale: str,
               t_cap: float | None = None) -> None:
    times = curves.times
    mask = np.ones(len(times), dtype=bool)
    if t_cap is not None:
        mask = times <= t_cap
        if not mask.any():
            mask = np.ones(len(times), dtype=bool)
    series = [
        Series("train", times[mask], curves.train_mean[mask], color="#1f77b4"),
        Series("test", times[mask], curves.test_mean[mask], color="#d62728"),
        Series("oracle", times[mask], curves.oracle[mask], color="#2ca02c"),
        Series("plateau", times[mask], curves.plateau[mask], color="#888888",
               dash="6,3"),
    ]
    write_line_plot(path, series, title=title, xlabel="t", ylabel="squared error",
                    xscale=xscale)


def run_flow_experiment(cfg: ExperimentConfig) -> ErrorCurves:
    """Run, then write <output>.csv, <output>.svg (log-x) and a linear zoom."""
    curves = run_flow_trials(cfg)
    out = cfg.output
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_curves_csv(out + ".csv", cfg, curves)
    title = (
        f"d={cfg.d} n={cfg.n} {cfg.activation}"
        f"{' cyclic' if cfg.cyclic else ''} {cfg.target.split(':')[0]}"
    )
    _flow_plot(out + ".svg", curves, title, "log")
    zoom_cap = cfg.n * cfg.d**0.4
    _flow_plot(out + "_zoom.svg", curves, title + " (zoom)", "linear", t_cap=zoom_cap)
    return curves


@dataclass(frozen=True)
class RFRunResult:
    iterations: np.ndarray
    t_eff: np.ndarray
    train: np.ndarray  # (trials, npts) empirical-world train error
    test: np.ndarray  # (trials, npts) empirical-world test error
    oracle_sgd: np.ndarray  # (trials, npts) oracle-world test error
    flow_oracle: np.ndarray  # analytic oracle risk at t_eff
    plateau: np.ndarray


def run_rf_trials(cfg: ExperimentConfig) -> RFRunResult:
    cfg.validate()
    target = parse_target(cfg.target, cfg.d)
    activation = resolve_activation(cfg.activation)
    spec = build_dot_kernel(activation, cfg.d, cfg.K)
    norms = degree_norms(target)
    steps = cfg.rf_steps
    eval_grid = tuple(
        np.unique(np.round(np.geomspace(1, steps, cfg.rf_eval_points)).astype(int))
    )
    eval_grid = (0,) + eval_grid
    alpha = 1 if cfg.cyclic else 0

    trains, tests, oracles = [], [], []
    t_eff = None
    iters = None
    for trial in range(cfg.trials):
        sgd_cfg = SGDConfig(
            learning_rate=cfg.rf_learning_rate,
            batch_size=cfg.rf_batch_size,
            momentum=cfg.rf_momentum,
            steps=steps,
            eval_grid=eval_grid,
            seed=cfg.seed * 100003 + trial,
        )
        rng = rng_for(cfg.seed, trial, 2)
        model = init_rf_model(cfg.rf_features, cfg.d, activation, cfg.cyclic, rng)
        ds = make_dataset(target, cfg.n, cfg.sigma_eps2, cfg.seed, stream=(trial,))
        X_test = sample_sphere(cfg.test_set_size, cfg.d, rng_for(cfg.seed, trial, 1))
        emp = sgd_empirical(model, ds, sgd_cfg, X_test)
        orc = sgd_oracle(model, target, cfg.sigma_eps2, sgd_cfg, X_test,
                         time_scale_n=cfg.n)
        trains.append(emp.train)
        tests.append(emp.test)
        oracles.append(orc.test)
        t_eff = emp.t_eff
        iters = emp.iterations
    flow_orc = np.array(
        [oracle_risk(spec, norms, cfg.sigma_eps2, max(t, 1e-12)) for t in t_eff]
    )
    plateau = np.array(
        [
            theoretical_plateaus(spec, norms, cfg.sigma_eps2, t, cfg.n, alpha).predicted_test
            if t > 1
            else np.nan
            for t in t_eff
        ]
    )
    return RFRunResult(
        iterations=iters,
        t_eff=t_eff,
        train=np.stack(trains),
        test=np.stack(tests),
        oracle_sgd=np.stack(oracles),
        flow_oracle=flow_orc,
        plateau=plateau,
    )


def write_rf_csv(path: str, cfg: ExperimentConfig, res: RFRunResult) -> None:
    ts = time.strftime("%Y-%m-%dT%H:%M:%S")
    multi = res.train.shape[0] >= 2

    def std(arr, i):
        return float(arr[:, i].std(ddof=1)) if multi else None

    try:
        with open(path, "w") as fh:
            fh.write(to_metadata(cfg, "rf-sgd", ts) + "\n")
            fh.write(
                "t,train_mean,train_std,test_mean,test_std,oracle,plateau_pred,"
                "iteration,oracle_sgd_mean,oracle_sgd_std\n"
            )
            for i in range(len(res.t_eff)):
                row = [
                    _fmt_cell(float(res.t_eff[i])),
                    _fmt_cell(float(res.train[:, i].mean())),
                    _fmt_cell(std(res.train, i)),
                    _fmt_cell(float(res.test[:, i].mean())),
                    _fmt_cell(std(res.test, i)),
                    _fmt_cell(float(res.flow_oracle[i])),
                    _fmt_cell(float(res.plateau[i])),
                    str(int(res.iterations[i])),
                    _fmt_cell(float(res.oracle_sgd[:, i].mean())),
                    _fmt_cell(std(res.oracle_sgd, i)),
                ]
                fh.write(",".join(row) + "\n")
    except BaseException:
        if os.path.exists(path):
            os.unlink(path)
        raise


def run_rf_experiment(cfg: ExperimentConfig) -> RFRunResult:
    res = run_rf_trials(cfg)
    out = cfg.output
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_rf_csv(out + ".csv", cfg, res)
    pos = res.t_eff > 0
    series = [
        Series("sgd train", res.t_eff[pos], res.train.mean(axis=0)[pos], color="#1f77b4"),
        Series("sgd test", res.t_eff[pos], res.test.mean(axis=0)[pos], color="#d62728"),
        Series("sgd oracle", res.t_eff[pos], res.oracle_sgd.mean(axis=0)[pos],
               color="#2ca02c"),
        Series("flow oracle", res.t_eff[pos], res.flow_oracle[pos], color="#2ca02c",
               dash="6,3"),
    ]
    write_line_plot(
        cfg.output + ".svg",
        series,
        title=f"RF-SGD d={cfg.d} N={cfg.rf_features} n={cfg.n}"
        f"{' cyclic' if cfg.cyclic else ''}",
        xlabel="t_eff",
        ylabel="squared error",
        xscale="log",
    )
    return res


@dataclass(frozen=True)
class AugmentReport:
    """Invariant-kernel flow vs dot-kernel flow on the augmented dataset."""

    d: int
    n: int
    times: np.ndarray
    discrepancy: np.ndarray  # max abs difference at the probe points, per time
    max_discrepancy: float


def augment_check(
    d: int,
    n: int,
    activation: str = "relu",
    time_grid: np.ndarray | None = None,
    seed: int = 0,
    K: int = 30,
    num_probes: int = 20,
    max_augmented: int = 2000,
) -> AugmentReport:
    """Check that the m-rescaled invariant flow equals the augmented flow.

    Builds (i) the cyclic-kernel flow on (X, y) run at rescaled time m*t with
    m = d, and (ii) the dot-kernel flow on all d shifted copies of the data,
    then compares the two fitted functions at fresh probe points.
    """
    if n * d > max_augmented:
        raise ConfigError(
            f"augmented matrix would be {n * d} x {n * d}; cap is "
            f"{max_augmented} rows (got n*d = {n * d})"
        )
    if time_grid is None:
        time_grid = np.logspace(-1, 3, 10)
    times = np.asarray(time_grid, dtype=np.float64)
    spec = build_dot_kernel(resolve_activation(activation), d, K)
    ck = CyclicKernel(spec)
    target = parse_target(f"ridge_hermite:0.5,1.0,0.5", d)
    ds = make_dataset(target, n, 0.0, seed)
    aug = augment_cyclic(ds)
    H_inv = cyclic_kernel_matrix(ck, ds.X)
    H_aug = kernel_matrix(spec, aug.X)
    sol_inv = solve_flow(H_inv, ds.y)
    sol_aug = solve_flow(H_aug, aug.y)
    probes = sample_sphere(num_probes, d, rng_for(seed, 999))
    cross_inv = cyclic_cross_matrix(ck, probes, ds.X)
    cross_aug = cross_kernel_matrix(spec, probes, aug.X)
    disc = np.empty(len(times))
    for i, t in enumerate(times):
        # invariant flow runs at m-times speed; augmented flow keeps 1/n scale
        a_inv = flow_coefficients(sol_inv, t * d)
        a_aug = _aug_coefficients(sol_aug, t, n)
        disc[i] = float(np.abs(cross_inv @ a_inv - cross_aug @ a_aug).max())
    return AugmentReport(
        d=d, n=n, times=times, discrepancy=disc, max_discrepancy=float(disc.max())
    )


def _aug_coefficients(sol: FlowSolution, t: float, n: int) -> np.ndarray:
    # same phi-map as flow_coefficients but with the original n in the clock:
    # u_aug(t) = (I - exp(-t H_aug / n)) y_G per the augmented-flow definition
    lam = sol.eigenvalues
    phi = np.full_like(lam, t / n)
    pos = lam > 0
    phi[pos] = -np.expm1(-t * lam[pos] / n) / lam[pos]
    return sol.eigenbasis @ (phi * sol.rotated_response)


@dataclass(frozen=True)
class StepsizeReport:
    d: int
    n: int
    lambda_max_dot: float
    lambda_max_cyclic: float
    lambda_max_augmented: float | None
    eta_dot: float
    eta_cyclic: float
    aug_ratio: float | None  # lambda_max_aug / lambda_max_dot, expected ~ d


def stepsize_report(
    activation: str,
    d: int,
    n: int,
    seed: int = 0,
    K: int = 30,
    c: float = 0.5,
    max_augmented: int = 2000,
) -> StepsizeReport:
    """lambda_max of the normalized kernel matrices and recommended steps."""
    if n > 5000:
        raise ConfigError(f"stepsize report capped at n <= 5000, got {n}")
    spec = build_dot_kernel(resolve_activation(activation), d, K)
    ck = CyclicKernel(spec)
    target = parse_target("ridge_hermite:1.0", d)
    ds = make_dataset(target, n, 0.0, seed)
    H = kernel_matrix(spec, ds.X)
    H_cyc = cyclic_kernel_matrix(ck, ds.X)
    eta_dot, lam_dot = default_step_size(H / n, c=c, iters=500)
    eta_cyc, lam_cyc = default_step_size(H_cyc / n, c=c, iters=500)
    lam_aug = ratio = None
    if n * d <= max_augmented:
        aug = augment_cyclic(ds)
        H_aug = kernel_matrix(spec, aug.X)
        _, lam_aug_n = default_step_size(H_aug / n, c=c, iters=500)
        lam_aug = lam_aug_n  # normalized by the original n, matching the flow
        ratio = lam_aug / lam_dot
    return StepsizeReport(
        d=d,
        n=n,
        lambda_max_dot=lam_dot,
        lambda_max_cyclic=lam_cyc,
        lambda_max_augmented=lam_aug,
        eta_dot=eta_dot,
        eta_cyclic=eta_cyc,
        aug_ratio=ratio,
    )


def read_metadata_line(path: str) -> tuple[ExperimentConfig, str]:
    with open(path) as fh:
        return from_metadata(fh.readline().rstrip("\n"))


def replay(path: str) -> str:
    """Re-run the experiment recorded in a CSV's metadata line."""
    cfg, kind = read_metadata_line(path)
    if kind == "flow":
        run_flow_experiment(cfg)
    elif kind == "rf-sgd":
        run_rf_experiment(cfg)
    else:
        raise ConfigError(f"cannot replay kind {kind!r}")
    return cfg.output + ".csv"

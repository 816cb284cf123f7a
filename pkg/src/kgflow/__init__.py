"""kgflow: kernel gradient-flow learning curves on the high-dimensional sphere.

Computes oracle-world and empirical-world training dynamics of kernel
least-squares gradient flow — analytically where closed forms exist, and
through a single eigendecomposition per dataset otherwise — for dot-product
and cyclic-invariant kernels, plus minibatch SGD for the matching
random-feature models.
"""
from ._kernelcore import BACKEND
from .basis import (
    GegenbauerBasis,
    HermiteSeries,
    MarginalQuadrature,
    check_mu_xi_limit,
    dim_spherical_harmonics,
    gegenbauer_coefficients,
    gegenbauer_eval,
    hermite_coefficients,
    marginal_quadrature,
)
from .data import (
    Dataset,
    TargetFunction,
    augment_cyclic,
    cyclic_cubic_target,
    degree_norms,
    eval_target,
    make_dataset,
    ridge_hermite_target,
    sample_sphere,
)
from .flow import (
    ErrorCurves,
    FlowSolution,
    build_E_vector,
    build_M_matrix,
    predict,
    solve_flow,
    test_error_analytic,
    test_error_mc,
    theoretical_plateaus,
    train_error,
)
from .kernels import (
    Activation,
    CyclicKernel,
    KernelSpectrum,
    TailTraces,
    build_dot_kernel,
    cyclic_kernel_matrix,
    cyclic_kernel_value,
    kernel_matrix,
    kernel_value,
    relu,
    relu_plus_he3,
    tail_traces,
)
from .oracle import OracleCurve, oracle_curve, oracle_l2_distance, oracle_risk
from .rfsgd import RFModel, SGDConfig, default_step_size, features, init_rf_model, sgd_empirical, sgd_oracle

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "GegenbauerBasis",
    "HermiteSeries",
    "MarginalQuadrature",
    "check_mu_xi_limit",
    "dim_spherical_harmonics",
    "gegenbauer_coefficients",
    "gegenbauer_eval",
    "hermite_coefficients",
    "marginal_quadrature",
    "Dataset",
    "TargetFunction",
    "augment_cyclic",
    "cyclic_cubic_target",
    "degree_norms",
    "eval_target",
    "make_dataset",
    "ridge_hermite_target",
    "sample_sphere",
    "ErrorCurves",
    "FlowSolution",
    "build_E_vector",
    "build_M_matrix",
    "predict",
    "solve_flow",
    "test_error_analytic",
    "test_error_mc",
    "theoretical_plateaus",
    "train_error",
    "Activation",
    "CyclicKernel",
    "KernelSpectrum",
    "TailTraces",
    "build_dot_kernel",
    "cyclic_kernel_matrix",
    "cyclic_kernel_value",
    "kernel_matrix",
    "kernel_value",
    "relu",
    "relu_plus_he3",
    "tail_traces",
    "OracleCurve",
    "oracle_curve",
    "oracle_l2_distance",
    "oracle_risk",
    "RFModel",
    "SGDConfig",
    "default_step_size",
    "features",
    "init_rf_model",
    "sgd_empirical",
    "sgd_oracle",
]

"""Smoothing-based goodness-of-fit and independence tests for directional data.

Kernel density and local polynomial regression estimators on the sphere
``S^q``, six integrated-squared-error test statistics with their asymptotic
normal calibration, resampling calibration, and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .estimators import (
    Bandwidths,
    DirDirSample,
    DirLinSample,
    DirSample,
    RankDeficiencyError,
    kde_dir,
    kde_dirdir,
    kde_dirlin,
    kde_linear,
    locpoly_regress,
    locpoly_weights,
)
from .gof import (
    Asymptotics,
    DegenerateScaleError,
    DirDirDensityTest,
    DirDirIndependenceTest,
    DirectionalDensityTest,
    DirLinDensityTest,
    DirLinIndependenceTest,
    RegressionTest,
    TestOutcome,
)
from .kernels import (
    EPANECHNIKOV_DIR,
    GAUSSIAN,
    UNIFORM,
    VON_MISES,
    DirectionalKernel,
    LinearKernel,
    R_K,
    c_hq,
    lambda_hq,
    lambda_q,
    nu_d_sq,
    nu_l_sq,
    smoothing_constants,
)
from .models import (
    ConstantRegression,
    Gaussian,
    LinearRegression,
    ProductDensity,
    UniformSphere,
    VonMisesFisher,
    vmf_fit,
    vmf_sample,
)
from .resampling import (
    CalibrationPlan,
    CalibratedOutcome,
    calibrate,
    parametric_bootstrap,
    permutation,
    wild_bootstrap,
)
from .sphere import RngStream, as_directions, line_quadrature, sphere_quadrature

__all__ = [
    "__version__",
    "Bandwidths", "DirDirSample", "DirLinSample", "DirSample", "RankDeficiencyError",
    "kde_dir", "kde_dirdir", "kde_dirlin", "kde_linear", "locpoly_regress", "locpoly_weights",
    "Asymptotics", "DegenerateScaleError", "DirDirDensityTest", "DirDirIndependenceTest",
    "DirectionalDensityTest", "DirLinDensityTest", "DirLinIndependenceTest", "RegressionTest",
    "TestOutcome",
    "EPANECHNIKOV_DIR", "GAUSSIAN", "UNIFORM", "VON_MISES", "DirectionalKernel", "LinearKernel",
    "R_K", "c_hq", "lambda_hq", "lambda_q", "nu_d_sq", "nu_l_sq", "smoothing_constants",
    "ConstantRegression", "Gaussian", "LinearRegression", "ProductDensity", "UniformSphere",
    "VonMisesFisher", "vmf_fit", "vmf_sample",
    "CalibrationPlan", "CalibratedOutcome", "calibrate", "parametric_bootstrap", "permutation", "wild_bootstrap",
    "RngStream", "as_directions", "line_quadrature", "sphere_quadrature",
]

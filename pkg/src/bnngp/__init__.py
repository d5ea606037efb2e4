"""Bottleneck neural-network Gaussian processes.

Kernel recursions for wide networks, exact prior samplers for bottleneck
architectures, Monte-Carlo marginal likelihood with reparameterized
gradients, and the closed-form quadratic-correlation / phase-transition
analytics of single-bottleneck ReLU networks.
"""

from .correlations import (
    BottleneckGeometry,
    CorrelationReport,
    bottleneck_angle_from_input_angle,
    correlation_report,
    depth_scale,
    depth_series,
    quad_corr_between,
    quad_corr_between_inf,
    quad_corr_matrix,
    quad_corr_matrix_inf,
    quad_corr_single_inf,
    quad_cov_between,
    r_depth,
    r_infinity,
    recover_gram_between,
    recover_gram_single,
)
from .data import Dataset, generate_rings, load_csv, save_csv, standardize
from .errors import (
    ArchitectureError,
    BnngpError,
    CsvParseError,
    DegenerateKernelError,
    DomainError,
    InvalidInputError,
    NotInImageError,
    NotInvertibleError,
    NumericalError,
    OptimizationDivergedError,
    PhaseBoundaryError,
    UndefinedCorrelationError,
    UsageError,
)
from .kernels import (
    cholesky_with_jitter,
    generic_kernel_step,
    j1,
    j1_inverse,
    j2,
    j2_inverse,
    kernel_step,
    linear_kernel,
    nngp_kernel,
    relu_kernel_backstep,
    relu_kernel_step,
    sinusoidal_deep_fixed_point,
    sinusoidal_kernel_step,
)
from .likelihood import (
    MllEstimate,
    gaussian_logpdf,
    logmeanexp,
    mll_gradient,
    mll_no_bottleneck,
    mll_no_bottleneck_gradient,
    mll_single_bottleneck,
)
from .optimize import OptimizeResult, OptState, SweepCell, mll_sweep, optimize_hyperparams
from .params import (
    NORMALIZED_RELU,
    SINUSOIDAL,
    WIDE,
    Architecture,
    Hyperparams,
    Nonlinearity,
    custom_nonlinearity,
)
from .rng import child_rng, derive_seed
from .sampling import (
    QuadCorrRuns,
    SampleBatch,
    empirical_quad_corr,
    multi_bottleneck_experiment,
    quad_corr_runs,
    sample_bnn_prior,
    sample_bottleneck_prior,
    wide_correspondence_check,
)

__version__ = "0.1.0"

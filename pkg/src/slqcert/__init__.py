"""Matrix-free estimation of tr(f(A)) by stochastic Lanczos quadrature with
computable a-posteriori error certificates."""

__version__ = "0.1.0"

from .errors import (
    CalibrationFailedError,
    ContractViolationError,
    NumericalFailureError,
    PivotBreakdownError,
    PoleEvaluationError,
    QuadratureDomainError,
    UnreachableAccuracyError,
    UnsupportedParameterError,
)
from .operators import (
    DenseOperator,
    Laplacian2D,
    LinearOperator,
    MaternOperator,
    apply_laplacian,
    apply_matern,
    build_matern_operator,
    matern_kernel,
    sample_sites,
)
from .lanczos import (
    LanczosState,
    SymTridiagonal,
    TridiagEigen,
    bilinear_estimate,
    lanczos_init,
    lanczos_run,
    lanczos_step,
    quadrature_value,
    tridiag_eigen,
)
from .rational import (
    KINDS,
    RationalApproximant,
    build,
    build_exp,
    build_log,
    build_sqrt,
    build_tanh_sqrt,
    choose_K,
    evaluate,
    kind_function,
    uniform_error,
)
from .error_estimator import (
    ErrorMonitor,
    PoleState,
    cumulative_error,
    incremental_error,
    lookback_check,
    update_pivots,
)
from .trace_estimator import (
    SampleRecord,
    TraceEstimate,
    calibrate_delta,
    confidence_half_width,
    estimate_spectrum_interval,
    estimate_trace,
    estimate_trace_with,
    p_alpha,
    rademacher_vector,
    sample_bilinear,
)
from . import oracles

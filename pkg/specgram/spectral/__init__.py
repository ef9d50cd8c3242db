"""Spectral fluctuations of sparse Gram matrices with a variance profile."""
from .errors import (
    SpecgramError,
    ConfigError,
    ModelValidationError,
    ProfileValidationError,
    NumericalError,
    DomainError,
    FixedPointError,
    SingularKernelError,
    ContourError,
    SamplingError,
    StabilityError,
    DegenerateVarianceError,
)
from .models import (
    VarianceProfile,
    ProfileDiagnostics,
    SparsityConfig,
    EntryModel,
    MomentEstimate,
    DetEquivalent,
    ScalarMiEquivalent,
    USystems,
    FluctKernelCache,
    ContourEstimate,
    GramSample,
    OracleResult,
    McSummary,
    EqualityTestResult,
    MiCltParams,
)
from .profile import (
    make_separable_profile,
    make_constant_profile,
    make_uniform_separable_profile,
    validate_profile,
    estimate_fourth_moment,
    standardized_fourth_moment,
)
from .detequiv import (
    solve_canonical_system,
    stieltjes_m0,
    spectral_support_bound,
    spectral_support_lower_bound,
    lsd_density,
    solve_scalar_mi_system,
)
from .contour import Contour, TestFunction, default_contour, dilate_contour, parse_test_function
from .fluct import (
    a_matrix,
    solve_u_systems,
    mean_kernel,
    cov_kernel_G,
    lsd_integral,
    clt_mean,
    clt_cov,
    corrected_centering,
)
from .simulate import (
    BatteryConfig,
    sample_gram,
    eigenvalues,
    centered_lss,
    quadratic_form_oracle,
    mc_battery,
)
from .mimo import (
    EqualityReplayConfig,
    sample_channel,
    equality_test,
    predicted_power,
    replicate_equality_test,
    mutual_information,
    mi_clt_params,
    outage_probability,
)

__all__ = [
    "SpecgramError",
    "ConfigError",
    "ModelValidationError",
    "ProfileValidationError",
    "NumericalError",
    "DomainError",
    "FixedPointError",
    "SingularKernelError",
    "ContourError",
    "SamplingError",
    "StabilityError",
    "DegenerateVarianceError",
    "VarianceProfile",
    "ProfileDiagnostics",
    "SparsityConfig",
    "EntryModel",
    "MomentEstimate",
    "DetEquivalent",
    "ScalarMiEquivalent",
    "USystems",
    "FluctKernelCache",
    "ContourEstimate",
    "GramSample",
    "OracleResult",
    "McSummary",
    "EqualityTestResult",
    "MiCltParams",
    "make_separable_profile",
    "make_constant_profile",
    "make_uniform_separable_profile",
    "validate_profile",
    "estimate_fourth_moment",
    "standardized_fourth_moment",
    "solve_canonical_system",
    "stieltjes_m0",
    "spectral_support_bound",
    "spectral_support_lower_bound",
    "lsd_density",
    "solve_scalar_mi_system",
    "Contour",
    "TestFunction",
    "default_contour",
    "dilate_contour",
    "parse_test_function",
    "a_matrix",
    "solve_u_systems",
    "mean_kernel",
    "cov_kernel_G",
    "lsd_integral",
    "clt_mean",
    "clt_cov",
    "corrected_centering",
    "BatteryConfig",
    "sample_gram",
    "eigenvalues",
    "centered_lss",
    "quadratic_form_oracle",
    "mc_battery",
    "EqualityReplayConfig",
    "sample_channel",
    "equality_test",
    "predicted_power",
    "replicate_equality_test",
    "mutual_information",
    "mi_clt_params",
    "outage_probability",
]

"""Maximum-entropy spectral analysis with generalized von Mises spectra."""

from .errors import (
    GvmError,
    InfeasibleError,
    NoConvergenceError,
    QuadratureError,
    SupportError,
)
from .special import (
    GvMShape,
    QuadratureSpec,
    ab_ratios,
    bessel_i,
    default_abs_tol,
    g_const,
    h_const,
    quad_periodic,
)
from .spectrum import (
    Acvf,
    GvMParams,
    TabulatedDensity,
    exponential_tilt,
    gvm_acvf,
    gvm_cdf,
    gvm_density,
    gvm_entropy,
    gvm_tabulated,
    kl_bound,
    kl_information,
    spectral_entropy,
    spectral_increment_variance,
)

__version__ = "0.1.0"

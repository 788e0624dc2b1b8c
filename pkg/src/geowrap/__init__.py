"""Wrapped probability distributions on constant-curvature manifolds.

Geometry (hyperboloid, sphere, plane), three wrapping constructions with
exact densities, samplers, estimators (MLE, conjugate Bayesian, EM), a
latent-space network model with Metropolis-Hastings inference, and an
independent numerical verification suite.
"""

from .charts import (
    EXP_TRANSPORT,
    ISOMETRY_EXP,
    ISOMETRY_LAMBERT,
    WRAP_KINDS,
    Wrapping,
    lambert_forward,
    lambert_inverse,
)
from .distributions import (
    Mixture,
    TruncationInfeasibleError,
    VonMises,
    WrappedNormal,
    disk_truncation_constant,
    log_bessel_i0,
)
from .inference import (
    DegenerateMixtureError,
    EMResult,
    IWParams,
    SigmaEstimate,
    em_fit,
    estimate_location,
    iw_posterior,
    mle_sigma,
)
from .manifolds import (
    EUCLIDEAN,
    HYPERBOLOID,
    SPHERE,
    AntipodalError,
    GeometryError,
    InvalidPointError,
    Manifold,
    OutOfDomainError,
    WrongSheetError,
    minkowski_inner,
)
from .network import (
    Graph,
    MCConfig,
    NetworkState,
    Trace,
    geweke_z,
    mds_init,
    mh_run,
    network_log_likelihood,
    network_log_posterior,
    pairwise_distances,
    position_prior,
    synthetic_graph,
)
from .oracles import (
    GridSpec,
    GridTooLargeError,
    fd_jacobian_det,
    form_defect,
    grid_normalization,
    histogram_probs,
    integrate_geodesic,
    integrate_transport,
    point_appended_basis,
    pushforward_tv_distance,
    sup_norm_gap,
    tv_distance,
)
from .verification import run_verification

__version__ = "0.1.0"

__all__ = [
    "EXP_TRANSPORT",
    "ISOMETRY_EXP",
    "ISOMETRY_LAMBERT",
    "WRAP_KINDS",
    "EUCLIDEAN",
    "HYPERBOLOID",
    "SPHERE",
    "Manifold",
    "Wrapping",
    "WrappedNormal",
    "Mixture",
    "VonMises",
    "GeometryError",
    "InvalidPointError",
    "WrongSheetError",
    "AntipodalError",
    "OutOfDomainError",
    "TruncationInfeasibleError",
    "DegenerateMixtureError",
    "GridTooLargeError",
    "minkowski_inner",
    "lambert_forward",
    "lambert_inverse",
    "disk_truncation_constant",
    "log_bessel_i0",
    "SigmaEstimate",
    "IWParams",
    "EMResult",
    "mle_sigma",
    "iw_posterior",
    "estimate_location",
    "em_fit",
    "Graph",
    "MCConfig",
    "NetworkState",
    "Trace",
    "pairwise_distances",
    "network_log_likelihood",
    "network_log_posterior",
    "position_prior",
    "mds_init",
    "mh_run",
    "synthetic_graph",
    "geweke_z",
    "GridSpec",
    "fd_jacobian_det",
    "grid_normalization",
    "histogram_probs",
    "tv_distance",
    "pushforward_tv_distance",
    "sup_norm_gap",
    "integrate_geodesic",
    "integrate_transport",
    "point_appended_basis",
    "form_defect",
    "run_verification",
    "__version__",
]

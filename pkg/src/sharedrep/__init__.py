"""Estimate a low-dimensional linear representation shared by many clients.

Each client holds a few samples from ``y = x^T theta_i + noise`` with
``Gamma_i theta_i`` in the span of an unknown orthonormal ``d x k`` basis.
The package provides data generators, spectral estimators of the basis,
subspace metrics, new-client fitting, and an experiment harness.
"""

from . import errors
from .diversity import DiversitySpectrum, WellRepresented, diversity_matrix, spectrum, well_represented_check
from .errors import (
    ConfigurationError,
    CovarianceError,
    DimensionError,
    InsufficientDataError,
    NumericError,
    OrthonormalityError,
    SharedRepError,
    UnsupportedError,
)
from .estimators import (
    GroupAverages,
    SplitPlan,
    estimator_mom,
    estimator_multigroup,
    estimator_pairwise,
    estimator_replica,
    expected_Z,
    expected_Z_single_average,
    group_averages,
    lambda_operator,
    local_replica_averages,
    mean_estimation_pca,
    mom_matrix,
    multigroup_matrix,
    pairwise_matrix,
    replica_matrix,
    single_average_matrix,
)
from .model import (
    FederatedDataset,
    GammaProfile,
    GroundTruth,
    LinkSpec,
    PartitionScheme,
    effective_alphas,
    generate_ground_truth,
    random_orthonormal,
    sample_dataset,
    sample_nonlinear_dataset,
    sample_partitions,
)
from .subspace import (
    SubspaceEstimate,
    WedinCheck,
    check_orthonormal,
    principal_angle_distance,
    top_k_eigen_subspace,
    top_k_singular_subspace,
    wedin_ratio,
)
from .transfer import (
    PrivacyParams,
    TransferEstimate,
    fit_new_client,
    gaussian_noise_scale,
    independent_baseline,
    private_fit_new_client,
)

__version__ = "0.1.0"

"""Spectral estimators of the shared basis and their algebraic companions.

The replica and multigroup estimators only ever see per-group averages of
``y * x``: raw rows are reduced inside :func:`group_averages`, and the
matrix assembly works from the returned :class:`GroupAverages` alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ._rng import make_rng
from .errors import (
    ConfigurationError,
    CovarianceError,
    DimensionError,
    InsufficientDataError,
    NumericError,
    UnsupportedError,
)
from .model import FederatedDataset, GroundTruth
from .subspace import SubspaceEstimate, check_orthonormal, top_k_eigen_subspace, top_k_singular_subspace

__all__ = [
    "SplitPlan",
    "GroupAverages",
    "group_averages",
    "local_replica_averages",
    "replica_matrix",
    "multigroup_matrix",
    "mom_matrix",
    "pairwise_matrix",
    "single_average_matrix",
    "estimator_replica",
    "estimator_multigroup",
    "estimator_mom",
    "estimator_pairwise",
    "mean_estimation_pca",
    "lambda_operator",
    "expected_Z",
    "expected_Z_single_average",
]

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class SplitPlan:
    """Partition of each client's rows into ``g_i`` disjoint contiguous groups.

    Group ``r`` of client ``i`` holds local rows ``[r*m_i, (r+1)*m_i)`` with
    ``m_i = n_i // g_i``; the ``n_i mod g_i`` trailing rows are unused.
    """

    partitions: np.ndarray
    groups_per_client: np.ndarray

    @classmethod
    def build(cls, partitions, g: Union[int, str, Sequence[int]] = 2) -> "SplitPlan":
        """``g`` may be an int, a length-M sequence, or ``"n"`` for one sample per group."""
        partitions = np.asarray(partitions, dtype=np.int64)
        if isinstance(g, str):
            if g != "n":
                raise ConfigurationError(f"group spec must be an integer, a vector or 'n', got {g!r}")
            groups = partitions.copy()
        else:
            groups = np.asarray(g, dtype=np.int64)
            if groups.ndim == 0:
                groups = np.full(partitions.shape, int(groups), dtype=np.int64)
        if groups.shape != partitions.shape:
            raise DimensionError("group vector must have one entry per client")
        if np.any(groups < 2):
            i = int(np.flatnonzero(groups < 2)[0])
            raise ConfigurationError(f"client {i}: need at least 2 groups, got {groups[i]}")
        if np.any(groups > partitions):
            i = int(np.flatnonzero(groups > partitions)[0])
            raise ConfigurationError(f"client {i}: {groups[i]} groups requested but only {partitions[i]} samples")
        return cls(partitions, groups)

    @property
    def group_sizes(self) -> np.ndarray:
        return self.partitions // self.groups_per_client

    @property
    def used(self) -> np.ndarray:
        return self.group_sizes * self.groups_per_client

    @property
    def assignment(self) -> list:
        """Per client, the list of local row-index arrays of each group."""
        return [
            [np.arange(r * m, (r + 1) * m) for r in range(g)]
            for m, g in zip(self.group_sizes, self.groups_per_client)
        ]


@dataclass(frozen=True)
class GroupAverages:
    """Group sums of ``y * x`` and their sizes; nothing row-level survives."""

    sums: np.ndarray
    client_of_group: np.ndarray
    plan: SplitPlan

    @property
    def group_sizes(self) -> np.ndarray:
        return self.plan.group_sizes[self.client_of_group]

    def first_group_start(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.plan.groups_per_client)[:-1]])


def _check_finite(dataset: FederatedDataset):
    if not (np.all(np.isfinite(dataset.X)) and np.all(np.isfinite(dataset.y))):
        raise NumericError("dataset contains non-finite values")


def _require_min_samples(dataset: FederatedDataset, minimum: int, what: str):
    small = np.flatnonzero(dataset.partitions < minimum)
    if small.size:
        i = int(small[0])
        raise InsufficientDataError(
            f"client {i} has {dataset.partitions[i]} sample(s); {what} needs at least {minimum}"
        )


def group_averages(dataset: FederatedDataset, plan: SplitPlan, shuffle_seed: Optional[int] = None) -> GroupAverages:
    """Reduce each group of each client to the sum of its ``y_ij x_ij``.

    With ``shuffle_seed`` the rows of every client are permuted (seeded)
    before the positional split.
    """
    _check_finite(dataset)
    if plan.partitions.shape != dataset.partitions.shape or np.any(plan.partitions != dataset.partitions):
        raise DimensionError("split plan does not match dataset partitions")
    used = plan.used
    if shuffle_seed is None:
        local = np.concatenate([np.arange(u) for u in used])
    else:
        rng = make_rng(shuffle_seed)
        local = np.concatenate([rng.permutation(n)[:u] for n, u in zip(dataset.partitions, used)])
    rows = np.repeat(dataset.offsets[:-1], used) + local
    W = dataset.X[rows] * dataset.y[rows, None]
    sizes = np.repeat(plan.group_sizes, plan.groups_per_client)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    sums = np.add.reduceat(W, starts, axis=0)
    owner = np.repeat(np.arange(dataset.M), plan.groups_per_client)
    return GroupAverages(sums, owner, plan)


def local_replica_averages(dataset: FederatedDataset, shuffle_seed: Optional[int] = None):
    """Two independent half-sample averages of ``y x`` per client.

    Returns
    -------
    z_bar, z_tilde : ndarray, shape (M, d)
        Averages over the first and second half of each client's rows.
    n_eff : ndarray, shape (M,)
        Even sample counts actually used; an odd client drops its last row.
    """
    _require_min_samples(dataset, 2, "the replica split")
    plan = SplitPlan.build(dataset.partitions, 2)
    avg = group_averages(dataset, plan, shuffle_seed)
    half = plan.group_sizes[:, None].astype(float)
    return avg.sums[0::2] / half, avg.sums[1::2] / half, plan.used


def _replica_from_averages(z_bar, z_tilde, n_eff):
    return (z_bar * n_eff[:, None]).T @ z_tilde


def replica_matrix(dataset: FederatedDataset, shuffle_seed: Optional[int] = None) -> np.ndarray:
    """``Z = sum_i n_i z_bar_i z_tilde_i^T`` with ``n_i`` the even count used."""
    return _replica_from_averages(*local_replica_averages(dataset, shuffle_seed))


def estimator_replica(
    dataset: FederatedDataset, k: int, *, side: str = "left", shuffle_seed: Optional[int] = None
) -> SubspaceEstimate:
    """Top-k singular subspace of the two-replica matrix ``Z``."""
    Z = replica_matrix(dataset, shuffle_seed)
    return top_k_singular_subspace(Z, k, side, source="replica")


def _multigroup_from_averages(avg: GroupAverages) -> np.ndarray:
    g = avg.plan.groups_per_client.astype(float)
    z = avg.sums / np.sqrt(avg.group_sizes)[:, None]
    totals = np.add.reduceat(z, avg.first_group_start(), axis=0)
    c = 1.0 / np.sqrt(g * (g - 1.0))
    Zg = (totals * c[:, None]).T @ totals - (z * c[avg.client_of_group][:, None]).T @ z
    return 0.5 * (Zg + Zg.T)


def multigroup_matrix(dataset: FederatedDataset, g=2, shuffle_seed: Optional[int] = None) -> np.ndarray:
    """``Z_g = sum_i (g_i (g_i - 1))^{-1/2} sum_{r != s} z_ir z_is^T``.

    Group averages are ``z_ir = sum_{j in G_ir} x_ij y_ij / sqrt(m_i)``. The
    off-diagonal double sum is evaluated as ``(sum_r z_r)(sum_r z_r)^T -
    sum_r z_r z_r^T``.
    """
    plan = SplitPlan.build(dataset.partitions, g)
    return _multigroup_from_averages(group_averages(dataset, plan, shuffle_seed))


def estimator_multigroup(dataset: FederatedDataset, k: int, g=2, *, shuffle_seed: Optional[int] = None) -> SubspaceEstimate:
    """Eigenvectors of the ``k`` largest eigenvalues of the symmetric ``Z_g``."""
    Zg = multigroup_matrix(dataset, g, shuffle_seed)
    tag = f"multigroup:{g}" if np.ndim(g) == 0 else "multigroup:custom"
    return top_k_eigen_subspace(Zg, k, source=tag)


def mom_matrix(dataset: FederatedDataset) -> np.ndarray:
    """``Z_T = sum_ij y_ij^2 x_ij x_ij^T``."""
    _check_finite(dataset)
    A = dataset.X * dataset.y[:, None]
    return A.T @ A


def estimator_mom(dataset: FederatedDataset, k: int) -> SubspaceEstimate:
    return top_k_eigen_subspace(mom_matrix(dataset), k, source="mom")


def _pairwise_weights(weights, M):
    if weights is None or (isinstance(weights, str) and weights == "uniform"):
        return np.full(M, 1.0 / M)
    w = np.asarray(weights, dtype=float)
    if w.shape != (M,):
        raise DimensionError(f"weights must have length M={M}")
    if np.any(w <= 0):
        raise ConfigurationError("pairwise weights must be positive")
    if abs(w.sum() - 1.0) > 1e-8:
        raise ConfigurationError(f"pairwise weights must sum to 1, got {w.sum():.12g}")
    return w


def pairwise_matrix(dataset: FederatedDataset, weights=None) -> np.ndarray:
    """``Z_D = sum_i w_i / (n_i (n_i - 1)) sum_{j1 != j2} y_j1 y_j2 x_j1 x_j2^T``."""
    _check_finite(dataset)
    _require_min_samples(dataset, 2, "the pairwise estimator")
    w = _pairwise_weights(weights, dataset.M)
    n = dataset.partitions.astype(float)
    c = w / (n * (n - 1.0))
    A = dataset.X * dataset.y[:, None]
    S = np.add.reduceat(A, dataset.offsets[:-1], axis=0)
    c_rows = np.repeat(c, dataset.partitions)
    Z = (S * c[:, None]).T @ S - (A * c_rows[:, None]).T @ A
    return 0.5 * (Z + Z.T)


def estimator_pairwise(dataset: FederatedDataset, k: int, weights=None) -> SubspaceEstimate:
    """Top-k left singular subspace of ``Z_D``; ``weights`` default to ``1/M`` each."""
    return top_k_singular_subspace(pairwise_matrix(dataset, weights), k, "left", source="pairwise")


def single_average_matrix(dataset: FederatedDataset) -> np.ndarray:
    """``sum_i n_i z_hat_i z_hat_i^T`` with ``z_hat_i`` the full local average of ``y x``."""
    _check_finite(dataset)
    A = dataset.X * dataset.y[:, None]
    S = np.add.reduceat(A, dataset.offsets[:-1], axis=0)
    return (S / dataset.partitions[:, None]).T @ S


def mean_estimation_pca(samples: Sequence, k: int) -> SubspaceEstimate:
    """Least-squares basis for the shared-mean problem.

    Each element of ``samples`` is an ``(n_i, d)`` array of one client's
    vectors. Returns the top-k eigenvectors of ``sum_i n_i u_i u_i^T`` where
    ``u_i`` is the client mean.
    """
    if len(samples) == 0:
        raise InsufficientDataError("no clients given")
    means, counts = [], []
    for i, S in enumerate(samples):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        if S.shape[0] == 0 or S.size == 0:
            raise InsufficientDataError(f"client {i} has no samples")
        means.append(S.mean(axis=0))
        counts.append(S.shape[0])
    U = np.asarray(means)
    if len({u.shape for u in means}) != 1:
        raise DimensionError("all clients must share the dimension d")
    C = (U * np.asarray(counts, dtype=float)[:, None]).T @ U
    return top_k_eigen_subspace(C, k, source="mean_pca")


def lambda_operator(B, Gamma, Gamma_hat) -> np.ndarray:
    """``Gamma^{-1} B (B^T Gamma^{-1} Gamma_hat Gamma^{-1} B)^+ B^T Gamma^{-1}``.

    The pseudoinverse discards singular values below ``1e-10`` times the
    largest one.
    """
    B = check_orthonormal(B)
    Gamma = np.asarray(Gamma, dtype=float)
    Gamma_hat = np.asarray(Gamma_hat, dtype=float)
    d = B.shape[0]
    if Gamma.shape != (d, d) or Gamma_hat.shape != (d, d):
        raise DimensionError("Gamma and Gamma_hat must be d x d")
    try:
        L = np.linalg.cholesky(0.5 * (Gamma + Gamma.T))
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("Gamma is not symmetric positive definite") from exc
    GinvB = np.linalg.solve(L.T, np.linalg.solve(L, B))
    P = GinvB.T @ Gamma_hat @ GinvB
    P_pinv = np.linalg.pinv(0.5 * (P + P.T), rcond=PINV_RCOND, hermitian=True)
    return GinvB @ P_pinv @ GinvB.T


def _partitions_for(gt: GroundTruth, partitions) -> np.ndarray:
    partitions = np.asarray(partitions, dtype=np.int64)
    if partitions.shape != (gt.M,):
        raise DimensionError(f"partitions must have length M={gt.M}")
    return partitions


def expected_Z(gt: GroundTruth, partitions, alphas=None) -> np.ndarray:
    """Mean of the replica matrix, ``B (sum_i n_i alpha_i alpha_i^T) B^T``.

    ``n_i`` is the even count the replica split actually uses. Pass
    ``alphas`` to substitute the effective coefficients of a nonlinear link.
    """
    partitions = _partitions_for(gt, partitions)
    A = gt.alphas if alphas is None else np.asarray(alphas, dtype=float)
    n_eff = 2 * (partitions // 2)
    core = (A * n_eff) @ A.T
    return gt.B_star @ core @ gt.B_star.T


def expected_Z_single_average(gt: GroundTruth, partitions, covariates: str = "gaussian") -> np.ndarray:
    """Mean of ``sum_i n_i z_hat_i z_hat_i^T`` for Gaussian covariates.

    Uses ``E[(x^T t)^2 x x^T] = 2 Gamma t t^T Gamma + (t^T Gamma t) Gamma``,
    which gives ``B (sum_i (n_i + 1) a_i a_i^T) B^T + sum_i (t_i^T Gamma_i t_i
    + sigma^2) Gamma_i``.
    """
    if covariates != "gaussian":
        raise UnsupportedError("closed-form fourth moments are only available for Gaussian covariates")
    partitions = _partitions_for(gt, partitions)
    B, A = gt.B_star, gt.alphas
    out = B @ ((A * (partitions + 1.0)) @ A.T) @ B.T
    thetas = gt.thetas()
    signal = (B @ A).T
    # t^T Gamma t = t^T B alpha since Gamma t = B alpha.
    scale = np.einsum("ij,ij->i", thetas, signal) + gt.noise_sigma**2
    if gt.gamma_kind == "identity":
        return out + scale.sum() * np.eye(gt.d)
    if gt.gamma_kind == "diagonal":
        return out + np.diag(scale @ gt.gamma_params)
    return out + np.einsum("i,ijk->jk", scale, gt.gamma_params)

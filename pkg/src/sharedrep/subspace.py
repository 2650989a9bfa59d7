"""Orthonormal bases, principal angle distance and singular subspaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, NumericError, OrthonormalityError

__all__ = [
    "SubspaceEstimate",
    "WedinCheck",
    "check_orthonormal",
    "principal_angle_distance",
    "top_k_singular_subspace",
    "top_k_eigen_subspace",
    "wedin_ratio",
]

INPUT_TOL = 1e-6
OUTPUT_TOL = 1e-8
GAP_TOL = 1e-12


def check_orthonormal(B, tol: float = INPUT_TOL, name: str = "B") -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[1] > B.shape[0]:
        raise DimensionError(f"{name} must be a tall d x k matrix, got shape {B.shape}")
    err = np.max(np.abs(B.T @ B - np.eye(B.shape[1])))
    if not err <= tol:
        raise OrthonormalityError(f"{name} is not orthonormal (max Gram deviation {err:.2e} > {tol:.0e})")
    return B


@dataclass(eq=False)
class SubspaceEstimate:
    """Orthonormal ``d x k`` basis returned by an estimator.

    ``degenerate`` is set when the k-th and (k+1)-th spectral values tie, in
    which case the subspace is not uniquely determined by the input matrix.
    """

    basis: np.ndarray
    source: str = ""
    degenerate: bool = False
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.basis = check_orthonormal(self.basis, OUTPUT_TOL, "basis")

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def _as_basis(B):
    return B.basis if isinstance(B, SubspaceEstimate) else B


def principal_angle_distance(B, B_prime) -> float:
    """Spectral norm of ``B B^T - B' B'^T``.

    Both arguments must be orthonormal ``d x k`` matrices (or estimates).
    The value lies in [0, 1] and is the sine of the largest principal angle.
    """
    B = check_orthonormal(_as_basis(B), name="B")
    Bp = check_orthonormal(_as_basis(B_prime), name="B_prime")
    if B.shape != Bp.shape:
        raise DimensionError(f"shapes differ: {B.shape} vs {Bp.shape}")
    diff = B @ B.T - Bp @ Bp.T
    # Symmetric, so the spectral norm is the largest |eigenvalue|.
    val = float(np.max(np.abs(np.linalg.eigvalsh(diff))))
    return min(max(val, 0.0), 1.0)


def _check_square_finite(Z, k):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise DimensionError(f"Z must be a matrix, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise NumericError("Z contains non-finite entries")
    if not 1 <= k <= min(Z.shape):
        raise DimensionError(f"k={k} out of range for Z of shape {Z.shape}")
    return Z


def _tied(values, k):
    if k >= values.size:
        return False
    return bool(values[k - 1] - values[k] <= GAP_TOL * max(1.0, abs(values[0])))


def top_k_singular_subspace(Z, k: int, side: str = "left", source: str = "") -> SubspaceEstimate:
    """Top-``k`` left or right singular vectors of ``Z``.

    Ties at the cut are broken by the ordering of the LAPACK SVD and flagged
    through ``degenerate``.
    """
    Z = _check_square_finite(Z, k)
    if side not in ("left", "right"):
        raise DimensionError(f"side must be 'left' or 'right', got {side!r}")
    U, s, Vt = np.linalg.svd(Z)
    basis = U[:, :k] if side == "left" else Vt[:k].T
    return SubspaceEstimate(np.ascontiguousarray(basis), source, _tied(s, k), s)


def top_k_eigen_subspace(S, k: int, source: str = "") -> SubspaceEstimate:
    """Eigenvectors of the ``k`` algebraically largest eigenvalues of symmetric ``S``."""
    S = _check_square_finite(S, k)
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    w, V = w[::-1], V[:, ::-1]
    return SubspaceEstimate(np.ascontiguousarray(V[:, :k]), source, _tied(w, k), w)


@dataclass(frozen=True)
class WedinCheck:
    bound: float
    distance: float
    satisfied: bool
    vacuous: bool


def wedin_ratio(B_hat, B_star, perturbation_norm: float, sigma_k_star: float) -> WedinCheck:
    """Compare a subspace error with the sin-theta bound ``2 ||E|| / sigma_k``.

    ``sigma_k_star`` is the k-th singular value of the rank-k unperturbed
    matrix. When the bound is at least one it carries no information and the
    check is reported as vacuously satisfied.
    """
    if not sigma_k_star > 0:
        raise DimensionError("sigma_k_star must be positive")
    bound = 2.0 * float(perturbation_norm) / float(sigma_k_star)
    dist = principal_angle_distance(B_hat, B_star)
    if bound >= 1.0:
        return WedinCheck(bound, dist, True, True)
    return WedinCheck(bound, dist, bool(dist <= bound + 1e-12), False)

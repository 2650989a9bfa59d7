"""Client diversity matrix and its spectrum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = ["DiversitySpectrum", "WellRepresented", "diversity_matrix", "spectrum", "well_represented_check"]

EPS_RANK = 1e-12


@dataclass(frozen=True)
class DiversitySpectrum:
    """Eigen-summary of a diversity matrix.

    ``condition`` is ``inf`` when the k-th eigenvalue is below the rank
    tolerance, i.e. some direction of the shared basis is never observed.
    """

    eigenvalues: np.ndarray
    lambda1: float
    lambdak: float
    condition: float
    trace: float

    @property
    def rank_deficient(self) -> bool:
        return not np.isfinite(self.condition)


@dataclass(frozen=True)
class WellRepresented:
    satisfied: bool
    ratio: float
    threshold: float


def diversity_matrix(alphas, partitions) -> np.ndarray:
    """``D = (1/N) sum_i n_i alpha_i alpha_i^T`` for ``alphas`` of shape (k, M)."""
    alphas = np.asarray(alphas, dtype=float)
    partitions = np.asarray(partitions, dtype=float)
    if alphas.ndim != 2 or partitions.ndim != 1 or alphas.shape[1] != partitions.shape[0]:
        raise DimensionError(
            f"alphas must be (k, M) and partitions (M,), got {alphas.shape} and {partitions.shape}"
        )
    if partitions.size == 0 or np.any(partitions < 1):
        raise DimensionError("partition entries must be >= 1")
    D = (alphas * partitions) @ alphas.T / partitions.sum()
    return 0.5 * (D + D.T)


def spectrum(D, eps_rank: float = EPS_RANK, sym_tol: float = 1e-10) -> DiversitySpectrum:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionError(f"D must be square, got shape {D.shape}")
    scale = max(1.0, np.max(np.abs(D)))
    if np.max(np.abs(D - D.T)) > sym_tol * scale:
        raise DimensionError("D is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (D + D.T))[::-1]
    lam1, lamk = float(eig[0]), float(eig[-1])
    if lamk <= eps_rank:
        lamk = max(lamk, 0.0)
        cond = float("inf")
    else:
        cond = lam1 / lamk
    return DiversitySpectrum(eig, lam1, lamk, cond, float(np.trace(D)))


def well_represented_check(partitions, k: int, c: float = 1.0) -> WellRepresented:
    """Balance condition ``max_i n_i / mean(n) <= c * sqrt(M / k)``."""
    if not c > 0:
        raise ConfigurationError("c must be positive")
    partitions = np.asarray(partitions, dtype=float)
    if partitions.ndim != 1 or partitions.size == 0:
        raise DimensionError("partitions must be a non-empty vector")
    M = partitions.size
    ratio = float(partitions.max() / partitions.mean())
    threshold = float(c * np.sqrt(M / k))
    return WellRepresented(ratio <= threshold, ratio, threshold)

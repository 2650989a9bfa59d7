"""Fitting a new client on top of a learned basis.

The new client projects its covariates onto the basis and solves a
k-dimensional least-squares problem for its head. A differentially private
variant perturbs the head with the Gaussian mechanism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import make_rng
from .errors import ConfigurationError, DimensionError
from .subspace import SubspaceEstimate, check_orthonormal

__all__ = [
    "PrivacyParams",
    "TransferEstimate",
    "fit_new_client",
    "independent_baseline",
    "gaussian_noise_scale",
    "private_fit_new_client",
]


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float
    clip_bound: float
    noise_scale: float


@dataclass(eq=False)
class TransferEstimate:
    alpha_hat: np.ndarray
    theta_hat: np.ndarray
    method: str
    privacy: Optional[PrivacyParams] = None
    underdetermined: bool = False


def _basis(B_hat) -> np.ndarray:
    B = B_hat.basis if isinstance(B_hat, SubspaceEstimate) else B_hat
    return check_orthonormal(B, name="B_hat")


def _check_xy(X, y, d=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] < 1:
        raise DimensionError("need at least one sample")
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if d is not None and X.shape[1] != d:
        raise DimensionError(f"X has {X.shape[1]} columns, basis expects d={d}")
    return X, y


def fit_new_client(B_hat, X_new, y_new) -> TransferEstimate:
    """Least-squares head on the projected design ``X_new @ B_hat``.

    Rank-deficient designs get the minimum-norm solution, and fewer samples
    than basis columns set ``underdetermined``.
    """
    B = _basis(B_hat)
    X, y = _check_xy(X_new, y_new, B.shape[0])
    P = X @ B
    alpha, *_ = np.linalg.lstsq(P, y, rcond=None)
    return TransferEstimate(alpha, B @ alpha, "transfer", None, X.shape[0] < B.shape[1])


def independent_baseline(X_new, y_new) -> np.ndarray:
    """Minimum-norm least squares over the full ``d`` dimensions."""
    X, y = _check_xy(X_new, y_new)
    theta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return theta


def gaussian_noise_scale(sensitivity: float, epsilon: float, delta: float) -> float:
    """Classic Gaussian-mechanism standard deviation ``sensitivity * sqrt(2 ln(1.25/delta)) / epsilon``."""
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)")
    if not sensitivity > 0:
        raise ConfigurationError("sensitivity must be positive")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def private_fit_new_client(
    B_hat, X_new, y_new, epsilon: float, delta: float, clip_bound: float, seed: int = 0
) -> TransferEstimate:
    """Head estimate released through output perturbation.

    Steps: project ``p_j = B_hat^T x_j``; clip each per-sample contribution
    ``p_j y_j`` to l2 norm ``clip_bound``; solve
    ``(P^T P / n) alpha = mean_j clip(p_j y_j)``; add
    ``N(0, s^2 I_k)`` with ``s = clip_bound * sqrt(2 ln(1.25/delta)) / (n epsilon)``.

    When no contribution is clipped the pre-noise head equals the
    least-squares head of :func:`fit_new_client`.
    """
    if not clip_bound > 0:
        raise ConfigurationError("clip_bound must be positive")
    B = _basis(B_hat)
    X, y = _check_xy(X_new, y_new, B.shape[0])
    n = X.shape[0]
    scale = gaussian_noise_scale(clip_bound / n, epsilon, delta)
    P = X @ B
    G = P * y[:, None]
    norms = np.linalg.norm(G, axis=1)
    G = G * np.minimum(1.0, clip_bound / np.maximum(norms, np.finfo(float).tiny))[:, None]
    alpha, *_ = np.linalg.lstsq(P.T @ P / n, G.mean(axis=0), rcond=None)
    alpha = alpha + make_rng(seed).standard_normal(B.shape[1]) * scale
    privacy = PrivacyParams(float(epsilon), float(delta), float(clip_bound), scale)
    return TransferEstimate(alpha, B @ alpha, "private_transfer", privacy, n < B.shape[1])

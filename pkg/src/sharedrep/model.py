"""Ground-truth parameters and synthetic federated datasets.

Each client ``i`` draws covariates ``x ~ N(0, Gamma_i)`` and responses
``y = x @ theta_i + noise`` with ``Gamma_i @ theta_i = B_star @ alpha_i``,
so the cross-correlation ``E[y x]`` of every client lies in the column space
of the shared basis ``B_star``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from ._rng import check_seed, make_rng
from .errors import (
    ConfigurationError,
    CovarianceError,
    DimensionError,
    UnsupportedError,
)

__all__ = [
    "GammaProfile",
    "PartitionScheme",
    "GroundTruth",
    "FederatedDataset",
    "LinkSpec",
    "random_orthonormal",
    "generate_ground_truth",
    "sample_partitions",
    "sample_dataset",
    "sample_nonlinear_dataset",
    "effective_alphas",
]

GAMMA_KINDS = ("identity", "diagonal", "dense")
ALPHA_SCHEMES = ("gaussian", "basis")
LINK_KINDS = ("linear", "logistic", "relu_network", "custom_lipschitz")


@dataclass(frozen=True)
class GammaProfile:
    """How per-client covariance matrices are drawn.

    ``diagonal`` and ``dense`` draw eigenvalues log-uniformly in
    ``[cond**-0.5, cond**0.5]`` so every matrix has condition number at most
    ``cond``; ``dense`` additionally rotates by a random orthogonal matrix.
    """

    kind: str = "identity"
    cond: float = 10.0

    def __post_init__(self):
        if self.kind not in GAMMA_KINDS:
            raise ConfigurationError(f"unknown gamma profile {self.kind!r}; expected one of {GAMMA_KINDS}")
        if not np.isfinite(self.cond) or self.cond < 1.0:
            raise ConfigurationError(f"gamma condition number must be >= 1, got {self.cond}")

    @classmethod
    def parse(cls, spec: Union[str, "GammaProfile"]) -> "GammaProfile":
        """Accept ``"identity"``, ``"diagonal"`` or ``"dense:5"`` style strings."""
        if isinstance(spec, GammaProfile):
            return spec
        name, _, arg = str(spec).strip().partition(":")
        return cls(name.strip(), float(arg)) if arg else cls(name.strip())

    def __str__(self) -> str:
        return self.kind if self.kind == "identity" else f"{self.kind}:{self.cond:g}"


@dataclass(frozen=True)
class PartitionScheme:
    """Rule for the per-client sample counts ``n_i``."""

    kind: str
    n: int = 0
    lo: int = 0
    hi: int = 0
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "equal":
            if self.n < 1:
                raise ConfigurationError(f"equal partition size must be >= 1, got {self.n}")
        elif self.kind == "uniform":
            if self.lo < 1 or self.hi < self.lo:
                raise ConfigurationError(f"uniform partition needs 1 <= lo <= hi, got [{self.lo}, {self.hi}]")
        elif self.kind == "explicit":
            if any(int(v) < 1 for v in self.values):
                raise ConfigurationError("explicit partition sizes must all be >= 1")
        else:
            raise ConfigurationError(f"unknown partition scheme {self.kind!r}")

    @classmethod
    def equal(cls, n: int) -> "PartitionScheme":
        return cls("equal", n=int(n))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "PartitionScheme":
        return cls("uniform", lo=int(lo), hi=int(hi))

    @classmethod
    def explicit(cls, values: Sequence[int]) -> "PartitionScheme":
        return cls("explicit", values=tuple(int(v) for v in values))

    @classmethod
    def parse(cls, spec: Union[str, "PartitionScheme"]) -> "PartitionScheme":
        """Parse ``equal:20``, ``uniform:2:118`` or ``explicit:3,5,7``."""
        if isinstance(spec, PartitionScheme):
            return spec
        name, _, rest = str(spec).strip().partition(":")
        try:
            if name == "equal":
                return cls.equal(int(rest))
            if name == "uniform":
                lo, hi = rest.split(":")
                return cls.uniform(int(lo), int(hi))
            if name == "explicit":
                return cls.explicit([int(v) for v in rest.replace(" ", "").split(",") if v])
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse partition scheme {spec!r}") from exc
        raise ConfigurationError(f"unknown partition scheme {spec!r}")

    def __str__(self) -> str:
        if self.kind == "equal":
            return f"equal:{self.n}"
        if self.kind == "uniform":
            return f"uniform:{self.lo}:{self.hi}"
        return "explicit:" + ",".join(str(v) for v in self.values)


@dataclass(eq=False)
class GroundTruth:
    """Generative parameters of one problem instance.

    Attributes
    ----------
    B_star : ndarray, shape (d, k)
        Orthonormal shared basis.
    alphas : ndarray, shape (k, M)
        Client-specific coefficients, one column per client.
    gamma_kind : {"identity", "diagonal", "dense"}
        Storage format of the covariances.
    gamma_params : ndarray or None
        ``None`` for identity, the ``(M, d)`` diagonals, or the ``(M, d, d)``
        dense matrices.
    noise_sigma : float
        Standard deviation of the additive Gaussian response noise.
    """

    B_star: np.ndarray
    alphas: np.ndarray
    gamma_kind: str = "identity"
    gamma_params: Optional[np.ndarray] = None
    noise_sigma: float = 1.0
    alpha_bound: float = 4.0
    gamma_cond_bound: float = 10.0

    def __post_init__(self):
        self.B_star = np.asarray(self.B_star, dtype=float)
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.B_star.ndim != 2 or self.alphas.ndim != 2:
            raise DimensionError("B_star must be (d, k) and alphas (k, M)")
        d, k = self.B_star.shape
        if not 1 <= k <= d:
            raise DimensionError(f"need 1 <= k <= d, got d={d}, k={k}")
        if self.alphas.shape[0] != k:
            raise DimensionError(f"alphas must have {k} rows, got {self.alphas.shape[0]}")
        if self.gamma_kind not in GAMMA_KINDS:
            raise ConfigurationError(f"unknown gamma kind {self.gamma_kind!r}")
        M = self.alphas.shape[1]
        if self.gamma_kind == "identity":
            self.gamma_params = None
        else:
            self.gamma_params = np.asarray(self.gamma_params, dtype=float)
            want = (M, d) if self.gamma_kind == "diagonal" else (M, d, d)
            if self.gamma_params.shape != want:
                raise DimensionError(f"{self.gamma_kind} gammas must have shape {want}, got {self.gamma_params.shape}")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")
        self._factors = None

    @property
    def d(self) -> int:
        return self.B_star.shape[0]

    @property
    def k(self) -> int:
        return self.B_star.shape[1]

    @property
    def M(self) -> int:
        return self.alphas.shape[1]

    def gamma(self, i: int) -> np.ndarray:
        """Dense ``d x d`` covariance of client ``i``."""
        if self.gamma_kind == "identity":
            return np.eye(self.d)
        if self.gamma_kind == "diagonal":
            return np.diag(self.gamma_params[i])
        return self.gamma_params[i].copy()

    def gammas(self) -> np.ndarray:
        return np.stack([self.gamma(i) for i in range(self.M)])

    def thetas(self) -> np.ndarray:
        """Regression vectors ``theta_i = Gamma_i^{-1} B_star alpha_i``, shape (M, d)."""
        signal = (self.B_star @ self.alphas).T
        if self.gamma_kind == "identity":
            return signal
        if self.gamma_kind == "diagonal":
            return signal / self.gamma_params
        out = np.empty_like(signal)
        for i in range(self.M):
            try:
                out[i] = np.linalg.solve(self.gamma_params[i], signal[i])
            except np.linalg.LinAlgError as exc:
                raise CovarianceError(f"covariance of client {i} is singular") from exc
        return out

    def covariance_factors(self) -> Optional[np.ndarray]:
        """Matrices ``L_i`` with ``L_i L_i^T = Gamma_i`` (sqrt of the diagonal for diagonal kind)."""
        if self._factors is None and self.gamma_kind != "identity":
            if self.gamma_kind == "diagonal":
                if np.any(self.gamma_params <= 0):
                    raise CovarianceError("diagonal covariance entries must be positive")
                self._factors = np.sqrt(self.gamma_params)
            else:
                try:
                    self._factors = np.linalg.cholesky(self.gamma_params)
                except np.linalg.LinAlgError as exc:
                    raise CovarianceError("dense covariance is not positive definite") from exc
        return self._factors

    def check_invariants(self, tol: float = 1e-10) -> None:
        """Raise if orthonormality, the alpha bound or the covariance bound is violated."""
        gram = self.B_star.T @ self.B_star
        if np.max(np.abs(gram - np.eye(self.k))) > tol:
            raise ConfigurationError("B_star columns are not orthonormal")
        norms = np.linalg.norm(self.alphas, axis=0)
        if np.any(norms > self.alpha_bound):
            raise ConfigurationError(f"alpha norm {norms.max():.3g} exceeds bound {self.alpha_bound}")
        if self.gamma_kind == "identity":
            return
        if self.gamma_kind == "diagonal":
            lo, hi = self.gamma_params.min(axis=1), self.gamma_params.max(axis=1)
        else:
            if np.max(np.abs(self.gamma_params - np.swapaxes(self.gamma_params, 1, 2))) > 1e-10:
                raise CovarianceError("dense covariances must be symmetric")
            eig = np.linalg.eigvalsh(self.gamma_params)
            lo, hi = eig[:, 0], eig[:, -1]
        if np.any(lo <= 0):
            raise CovarianceError("covariances must be positive definite")
        if np.any(hi / lo > self.gamma_cond_bound * (1 + 1e-12)):
            raise ConfigurationError(f"covariance condition number exceeds {self.gamma_cond_bound}")


@dataclass(eq=False)
class FederatedDataset:
    """Stacked client data.

    Rows of ``X`` and ``y`` are grouped client by client in the order given
    by ``partitions``; :attr:`clients` exposes per-client views.
    """

    X: np.ndarray
    y: np.ndarray
    partitions: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.partitions = np.asarray(self.partitions, dtype=np.int64)
        if self.X.ndim != 2 or self.y.ndim != 1 or self.partitions.ndim != 1:
            raise DimensionError("X must be (N, d), y (N,), partitions (M,)")
        if self.partitions.size == 0 or np.any(self.partitions < 1):
            raise DimensionError("every client needs at least one sample")
        N = int(self.partitions.sum())
        if self.X.shape[0] != N or self.y.shape[0] != N:
            raise DimensionError(f"partitions sum to {N} but X has {self.X.shape[0]} rows and y {self.y.shape[0]}")
        self.offsets = np.concatenate([[0], np.cumsum(self.partitions)])

    @classmethod
    def from_clients(cls, clients: Sequence[tuple]) -> "FederatedDataset":
        if not clients:
            raise DimensionError("need at least one client")
        Xs = [np.atleast_2d(np.asarray(X, dtype=float)) for X, _ in clients]
        ys = [np.asarray(y, dtype=float).reshape(-1) for _, y in clients]
        d = Xs[0].shape[1]
        for i, (X, y) in enumerate(zip(Xs, ys)):
            if X.shape[1] != d or X.shape[0] != y.shape[0]:
                raise DimensionError(f"client {i}: X is {X.shape}, y has {y.shape[0]} entries, expected d={d}")
        return cls(np.vstack(Xs), np.concatenate(ys), np.array([X.shape[0] for X in Xs]))

    @property
    def N(self) -> int:
        return int(self.offsets[-1])

    @property
    def M(self) -> int:
        return self.partitions.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def client(self, i: int) -> tuple:
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.X[a:b], self.y[a:b]

    @property
    def clients(self) -> list:
        return [self.client(i) for i in range(self.M)]

    def client_index(self) -> np.ndarray:
        """Client id of every row."""
        return np.repeat(np.arange(self.M), self.partitions)


@dataclass(frozen=True)
class LinkSpec:
    """Response model on top of the projected covariates ``u = B_star^T x``.

    For ``custom_lipschitz`` the callable receives ``u`` with shape (n, k) and
    the client's head vector, and returns the conditional mean of ``y``.
    """

    kind: str = "linear"
    head_weights: Optional[tuple] = None
    lipschitz_bound: Optional[float] = None
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ConfigurationError(f"unknown link {self.kind!r}; expected one of {LINK_KINDS}")
        if self.kind == "custom_lipschitz":
            if self.func is None:
                raise ConfigurationError("custom_lipschitz link needs a func")
            if self.lipschitz_bound is None or not self.lipschitz_bound > 0:
                raise ConfigurationError("custom_lipschitz link needs a positive lipschitz_bound")


def random_orthonormal(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    """Orthonormalise a ``d x k`` standard Gaussian matrix (Haar distributed)."""
    G = rng.standard_normal((d, k))
    Q, R = np.linalg.qr(G)
    # Sign fix makes the map from G to Q unique.
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _draw_alphas(rng, k, M, scheme, alpha_bound):
    if isinstance(scheme, np.ndarray) or (not isinstance(scheme, str) and scheme is not None):
        alphas = np.asarray(scheme, dtype=float)
        if alphas.shape != (k, M):
            raise DimensionError(f"explicit alphas must have shape {(k, M)}, got {alphas.shape}")
        return alphas.copy()
    if scheme == "basis":
        alphas = np.zeros((k, M))
        alphas[np.arange(M) % k, np.arange(M)] = 1.0
        return alphas
    if scheme != "gaussian":
        raise ConfigurationError(f"unknown alpha scheme {scheme!r}; expected one of {ALPHA_SCHEMES} or an array")
    alphas = rng.standard_normal((k, M)) / np.sqrt(k)
    for _ in range(1000):
        bad = np.flatnonzero(np.linalg.norm(alphas, axis=0) > alpha_bound)
        if bad.size == 0:
            return alphas
        alphas[:, bad] = rng.standard_normal((k, bad.size)) / np.sqrt(k)
    raise ConfigurationError(f"could not draw alphas within norm bound {alpha_bound}")


def _draw_gammas(rng, d, M, profile: GammaProfile):
    if profile.kind == "identity":
        return None
    half = 0.5 * np.log(profile.cond)
    eig = np.exp(rng.uniform(-half, half, size=(M, d)))
    if profile.kind == "diagonal":
        return eig
    out = np.empty((M, d, d))
    for i in range(M):
        Q = random_orthonormal(rng, d, d)
        G = (Q * eig[i]) @ Q.T
        out[i] = 0.5 * (G + G.T)
    return out


def generate_ground_truth(
    d: int,
    k: int,
    M: int,
    gamma_profile: Union[str, GammaProfile] = "identity",
    alpha_scheme="gaussian",
    seed: int = 0,
    *,
    noise_sigma: float = 1.0,
    alpha_bound: float = 4.0,
    gamma_cond_bound: float = 10.0,
) -> GroundTruth:
    """Draw a problem instance.

    Parameters
    ----------
    d, k, M : int
        Ambient dimension, subspace dimension and client count
        (``1 <= k <= d``, ``M >= k``).
    gamma_profile : str or GammaProfile
        ``identity``, ``diagonal`` or ``dense`` (optionally ``kind:cond``).
    alpha_scheme : {"gaussian", "basis"} or ndarray
        ``gaussian`` draws ``alpha_i ~ N(0, I_k / k)`` and redraws any column
        whose norm exceeds ``alpha_bound``; ``basis`` cycles through the
        standard basis vectors; an array of shape (k, M) is used verbatim.
    seed : int
        Unsigned 64-bit seed; equal inputs give bit-identical outputs.

    Returns
    -------
    GroundTruth
    """
    for name, v in (("d", d), ("k", k), ("M", M)):
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise DimensionError(f"{name} must be a positive integer, got {v!r}")
    if k > d:
        raise DimensionError(f"k={k} exceeds d={d}")
    if M < k:
        raise DimensionError(f"need M >= k, got M={M}, k={k}")
    profile = GammaProfile.parse(gamma_profile)
    if profile.cond > gamma_cond_bound:
        raise ConfigurationError(
            f"gamma profile condition number {profile.cond} exceeds the bound {gamma_cond_bound}"
        )
    rng = make_rng(check_seed(seed))
    B = random_orthonormal(rng, d, k)
    alphas = _draw_alphas(rng, k, M, alpha_scheme, alpha_bound)
    gammas = _draw_gammas(rng, d, M, profile)
    gt = GroundTruth(
        B_star=B,
        alphas=alphas,
        gamma_kind=profile.kind,
        gamma_params=gammas,
        noise_sigma=float(noise_sigma),
        alpha_bound=float(alpha_bound),
        gamma_cond_bound=float(gamma_cond_bound),
    )
    gt.check_invariants()
    return gt


def sample_partitions(scheme, M: int, seed: int = 0) -> np.ndarray:
    """Per-client sample counts.

    ``uniform:lo:hi`` draws each ``n_i`` independently and uniformly from the
    closed integer range ``[lo, hi]``.
    """
    scheme = PartitionScheme.parse(scheme)
    if M < 1:
        raise DimensionError("M must be positive")
    if scheme.kind == "equal":
        return np.full(M, scheme.n, dtype=np.int64)
    if scheme.kind == "uniform":
        return make_rng(seed).integers(scheme.lo, scheme.hi + 1, size=M, dtype=np.int64)
    if len(scheme.values) != M:
        raise DimensionError(f"explicit partition has {len(scheme.values)} entries, expected M={M}")
    return np.array(scheme.values, dtype=np.int64)


def _draw_covariates(rng, gt: GroundTruth, partitions: np.ndarray, covariates: str) -> np.ndarray:
    N = int(partitions.sum())
    if covariates == "gaussian":
        Z = rng.standard_normal((N, gt.d))
    elif covariates == "rademacher":
        Z = rng.choice(np.array([-1.0, 1.0]), size=(N, gt.d))
    else:
        raise ConfigurationError(f"unknown covariate family {covariates!r}")
    factors = gt.covariance_factors()
    if factors is None:
        return Z
    if gt.gamma_kind == "diagonal":
        return Z * np.repeat(factors, partitions, axis=0)
    offsets = np.concatenate([[0], np.cumsum(partitions)])
    for i in range(gt.M):
        a, b = offsets[i], offsets[i + 1]
        Z[a:b] = Z[a:b] @ factors[i].T
    return Z


def _check_partitions(gt: GroundTruth, partitions) -> np.ndarray:
    partitions = np.asarray(partitions, dtype=np.int64)
    if partitions.shape != (gt.M,):
        raise DimensionError(f"partitions must have length M={gt.M}, got shape {partitions.shape}")
    if np.any(partitions < 1):
        raise DimensionError("every client needs at least one sample")
    return partitions


def sample_dataset(gt: GroundTruth, partitions, seed: int = 0, *, covariates: str = "gaussian") -> FederatedDataset:
    """Sample the linear model ``y = x^T theta_i + noise`` for every client.

    ``covariates="rademacher"`` replaces the Gaussian draw by ``L_i r`` with
    ``r`` uniform on ``{-1, 1}^d``; the covariance is still ``Gamma_i``.
    """
    partitions = _check_partitions(gt, partitions)
    rng = make_rng(seed)
    X = _draw_covariates(rng, gt, partitions, covariates)
    noise = rng.standard_normal(X.shape[0]) * gt.noise_sigma
    theta_rows = np.repeat(gt.thetas(), partitions, axis=0)
    y = np.einsum("ij,ij->i", X, theta_rows) + noise
    return FederatedDataset(X, y, partitions)


def _heads(gt: GroundTruth, link: LinkSpec) -> np.ndarray:
    if link.head_weights is None:
        return gt.alphas
    head = np.asarray(link.head_weights, dtype=float).reshape(-1)
    if head.shape != (gt.k,):
        raise DimensionError(f"head_weights must have length k={gt.k}")
    return np.repeat(head[:, None], gt.M, axis=1)


def sample_nonlinear_dataset(gt: GroundTruth, link: LinkSpec, partitions, seed: int = 0) -> FederatedDataset:
    """Sample responses with conditional mean ``h_i(B_star^T x)``.

    Supported links: ``linear`` (same as :func:`sample_dataset`), ``logistic``
    (Bernoulli responses with success probability
    ``sigmoid(x^T B_star alpha_i)``), ``relu_network``
    (``relu(B_star^T x)^T alpha_i + noise``) and ``custom_lipschitz``.
    Covariates must be standard Gaussian.
    """
    if gt.gamma_kind != "identity":
        raise ConfigurationError("nonlinear links require identity covariances")
    if link.kind == "linear" and link.head_weights is None:
        return sample_dataset(gt, partitions, seed)
    partitions = _check_partitions(gt, partitions)
    rng = make_rng(seed)
    X = rng.standard_normal((int(partitions.sum()), gt.d))
    U = X @ gt.B_star
    heads = np.repeat(_heads(gt, link).T, partitions, axis=0)
    if link.kind == "logistic":
        prob = expit(np.einsum("ij,ij->i", U, heads))
        y = (rng.random(prob.shape[0]) < prob).astype(float)
        return FederatedDataset(X, y, partitions)
    noise = rng.standard_normal(X.shape[0]) * gt.noise_sigma
    if link.kind == "linear":
        mean = np.einsum("ij,ij->i", U, heads)
    elif link.kind == "relu_network":
        mean = np.einsum("ij,ij->i", np.maximum(U, 0.0), heads)
    else:
        mean = np.empty(X.shape[0])
        offsets = np.concatenate([[0], np.cumsum(partitions)])
        for i in range(gt.M):
            a, b = offsets[i], offsets[i + 1]
            mean[a:b] = np.asarray(link.func(U[a:b], heads[a]), dtype=float).reshape(-1)
    return FederatedDataset(X, mean + noise, partitions)


def effective_alphas(gt: GroundTruth, link: LinkSpec, *, mc_samples: int = 200_000, seed: int = 0) -> np.ndarray:
    """The vectors ``E_{U ~ N(0, I_k)}[h_i(U) U]`` that play the role of ``alpha_i``.

    Closed form for linear (``alpha``) and ReLU (``alpha / 2``); Gauss-Hermite
    quadrature along ``alpha`` for logistic (Stein's identity reduces it to a
    one-dimensional integral); Monte Carlo for custom links.
    """
    heads = _heads(gt, link)
    if link.kind == "linear":
        return heads.copy()
    if link.kind == "relu_network":
        return heads / 2.0
    if link.kind == "logistic":
        nodes, weights = np.polynomial.hermite_e.hermegauss(80)
        weights = weights / weights.sum()
        norms = np.linalg.norm(heads, axis=0)
        s = expit(np.outer(norms, nodes))
        slope = (s * (1.0 - s)) @ weights
        return heads * slope
    if link.func is None:
        raise UnsupportedError("custom link without func")
    U = make_rng(seed).standard_normal((mc_samples, gt.k))
    out = np.empty_like(heads)
    for i in range(gt.M):
        h = np.asarray(link.func(U, heads[:, i]), dtype=float).reshape(-1)
        out[:, i] = U.T @ h / mc_samples
    return out

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg as sla
from scipy.special import expit

from sharedrep import (
    ConfigurationError,
    DimensionError,
    FederatedDataset,
    GammaProfile,
    GroundTruth,
    LinkSpec,
    PartitionScheme,
    effective_alphas,
    generate_ground_truth,
    sample_dataset,
    sample_nonlinear_dataset,
    sample_partitions,
)


# ---------------------------------------------------------------- ground truth

def test_full_rank_basis_when_k_equals_d():
    gt = generate_ground_truth(2, 2, 2, "identity", np.eye(2), seed=3)
    B = gt.B_star
    assert np.allclose(B.T @ B, np.eye(2), atol=1e-12)
    assert np.allclose(B @ B.T, np.eye(2), atol=1e-12)
    assert np.allclose(gt.thetas(), B.T, atol=1e-15)  # theta_i = B e_i


def test_orthonormality_against_independent_gram():
    gt = generate_ground_truth(8, 2, 50, "identity", "gaussian", seed=7)
    # Gram via BLAS-free elementwise products instead of matmul
    B = gt.B_star
    gram = np.array([[np.sum(B[:, a] * B[:, b]) for b in range(2)] for a in range(2)])
    assert np.max(np.abs(gram - np.eye(2))) <= 1e-10
    # and via scipy's orthogonality-preserving polar factor: U should equal B
    U, _ = sla.polar(B)
    assert np.allclose(U, B, atol=1e-10)


def test_full_scale_ground_truth_shapes():
    gt = generate_ground_truth(120, 10, 1000, seed=1)
    assert gt.B_star.shape == (120, 10)
    assert gt.alphas.shape == (10, 1000)
    assert np.all(np.linalg.norm(gt.alphas, axis=0) <= 4.0)
    gt.check_invariants()


def test_ground_truth_is_bit_deterministic():
    a = generate_ground_truth(10, 3, 20, "dense", seed=99)
    b = generate_ground_truth(10, 3, 20, "dense", seed=99)
    assert np.array_equal(a.B_star, b.B_star)
    assert np.array_equal(a.alphas, b.alphas)
    assert np.array_equal(a.gamma_params, b.gamma_params)
    c = generate_ground_truth(10, 3, 20, "dense", seed=100)
    assert not np.array_equal(a.B_star, c.B_star)


@pytest.mark.parametrize("kind", ["diagonal", "dense"])
def test_gamma_condition_bound(kind):
    gt = generate_ground_truth(12, 2, 30, kind, seed=5)
    eig = np.linalg.eigvalsh(gt.gammas())
    assert np.all(eig > 0)
    ratios = eig[:, -1] / eig[:, 0]
    assert np.all(ratios <= 10.0 * (1 + 1e-12))
    assert np.all(eig >= 10**-0.5 - 1e-12) and np.all(eig <= 10**0.5 + 1e-12)


def test_alpha_rejection_keeps_bound():
    # tight bound forces many redraws
    gt = generate_ground_truth(5, 4, 500, seed=2, alpha_bound=0.8)
    assert np.all(np.linalg.norm(gt.alphas, axis=0) <= 0.8)


def test_thetas_solve_low_rank_structure():
    gt = generate_ground_truth(9, 3, 15, "dense", seed=4)
    G = gt.gammas()
    lhs = np.einsum("mij,mj->mi", G, gt.thetas())
    assert np.allclose(lhs, (gt.B_star @ gt.alphas).T, atol=1e-12)


@pytest.mark.parametrize(
    "args, err",
    [
        ((3, 4, 10), DimensionError),  # k > d
        ((5, 3, 2), DimensionError),  # M < k
        ((0, 1, 1), DimensionError),
    ],
)
def test_bad_dimensions(args, err):
    with pytest.raises(err):
        generate_ground_truth(*args)


def test_gamma_profile_over_bound_rejected():
    with pytest.raises(ConfigurationError):
        generate_ground_truth(5, 2, 5, "diagonal:50", seed=0)
    with pytest.raises(ConfigurationError):
        GammaProfile.parse("spherical")


def test_ground_truth_invariant_violations():
    B = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 2)))[0]
    with pytest.raises(ConfigurationError):
        GroundTruth(B * 1.1, np.ones((2, 3))).check_invariants()
    with pytest.raises(ConfigurationError):
        GroundTruth(B, np.full((2, 3), 10.0)).check_invariants()
    with pytest.raises(DimensionError):
        GroundTruth(B, np.ones((3, 3)))


# ---------------------------------------------------------------- partitions

def test_partitions_equal_uniform_explicit():
    assert np.all(sample_partitions("equal:60", 1000) == 60)
    u = sample_partitions("uniform:2:118", 1000, seed=4)
    assert u.min() >= 2 and u.max() <= 118
    # both endpoints are reachable at this sample size
    assert u.min() == 2 and u.max() == 118
    assert list(sample_partitions("explicit:3,5,7", 3)) == [3, 5, 7]
    with pytest.raises(DimensionError):
        sample_partitions("explicit:3,5,7", 4)


def test_partition_scheme_roundtrip():
    for s in ("equal:20", "uniform:2:78", "explicit:1,2,3"):
        assert str(PartitionScheme.parse(s)) == s
    for bad in ("equal:0", "uniform:5:2", "zipf:3", "uniform:x"):
        with pytest.raises(ConfigurationError):
            PartitionScheme.parse(bad)


# ---------------------------------------------------------------- datasets

def test_noiseless_linear_consistency():
    gt = generate_ground_truth(10, 3, 8, seed=1, noise_sigma=0.0)
    ds = sample_dataset(gt, sample_partitions("uniform:1:9", 8, seed=2), seed=3)
    for i, (X, y) in enumerate(ds.clients):
        assert np.max(np.abs(y - X @ gt.B_star @ gt.alphas[:, i])) <= 1e-10


def test_dataset_respects_partitions_and_is_deterministic():
    gt = generate_ground_truth(6, 2, 5, "diagonal", seed=1)
    parts = np.array([1, 2, 3, 4, 5])
    a = sample_dataset(gt, parts, seed=8)
    b = sample_dataset(gt, parts, seed=8)
    assert a.N == 15 and [c[0].shape[0] for c in a.clients] == [1, 2, 3, 4, 5]
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    with pytest.raises(DimensionError):
        sample_dataset(gt, parts[:4], seed=8)


def test_moment_identity_monte_carlo():
    # E[y x] = Gamma theta = B alpha
    gt = generate_ground_truth(8, 2, 3, "diagonal", seed=11)
    ds = sample_dataset(gt, np.full(3, 100_000), seed=12)
    target = gt.B_star @ gt.alphas
    for i, (X, y) in enumerate(ds.clients):
        est = (X * y[:, None]).mean(axis=0)
        assert np.linalg.norm(est - target[:, i]) / np.linalg.norm(target[:, i]) <= 0.05


def test_moment_error_shrinks_like_inverse_sqrt_n():
    gt = generate_ground_truth(8, 1, 1, seed=21, alpha_scheme=np.array([[0.9]]))
    target = gt.B_star @ gt.alphas[:, 0]
    ns = [1_000, 16_000, 256_000]
    errs = []
    for n in ns:
        e = []
        for s in range(20):
            X, y = sample_dataset(gt, [n], seed=1000 * n + s).client(0)
            e.append(np.linalg.norm((X * y[:, None]).mean(axis=0) - target))
        errs.append(np.median(e))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_covariance_of_sampled_rows():
    gt = generate_ground_truth(4, 1, 1, "dense", seed=3)
    X, _ = sample_dataset(gt, [200_000], seed=4).client(0)
    emp = X.T @ X / X.shape[0]
    assert np.linalg.norm(emp - gt.gamma(0), 2) / np.linalg.norm(gt.gamma(0), 2) < 0.02


def test_rademacher_covariates_are_bounded_and_scaled():
    gt = generate_ground_truth(5, 2, 2, seed=0, noise_sigma=0.0)
    ds = sample_dataset(gt, [50, 50], seed=1, covariates="rademacher")
    assert set(np.unique(ds.X)) <= {-1.0, 1.0}


def test_from_clients_validates_shapes():
    ds = FederatedDataset.from_clients([(np.ones((2, 3)), np.ones(2)), (np.zeros((1, 3)), np.zeros(1))])
    assert list(ds.partitions) == [2, 1] and ds.N == 3 and ds.d == 3
    assert list(ds.client_index()) == [0, 0, 1]
    with pytest.raises(DimensionError):
        FederatedDataset.from_clients([(np.ones((2, 3)), np.ones(3))])
    with pytest.raises(DimensionError):
        FederatedDataset(np.ones((3, 2)), np.ones(3), np.array([1, 0, 2]))


# ---------------------------------------------------------------- nonlinear links

def test_logistic_zero_signal_is_fair_coin():
    gt = generate_ground_truth(6, 2, 2, seed=0, alpha_scheme=np.zeros((2, 2)))
    ds = sample_nonlinear_dataset(gt, LinkSpec("logistic"), [40_000, 40_000], seed=1)
    assert set(np.unique(ds.y)) <= {0.0, 1.0}
    assert abs(ds.y.mean() - 0.5) < 0.01
    assert expit(0.0) == 0.5


def test_relu_zero_head_is_pure_noise():
    gt = generate_ground_truth(6, 2, 2, seed=0, alpha_scheme=np.zeros((2, 2)))
    ds = sample_nonlinear_dataset(gt, LinkSpec("relu_network"), [500, 500], seed=1)
    noise = np.random.Generator(np.random.PCG64(np.random.SeedSequence(1)))
    noise.standard_normal((1000, 6))
    assert np.allclose(ds.y, noise.standard_normal(1000))


def test_nonlinear_requires_identity_gamma():
    gt = generate_ground_truth(6, 2, 2, "diagonal", seed=0)
    with pytest.raises(ConfigurationError):
        sample_nonlinear_dataset(gt, LinkSpec("logistic"), [4, 4])


@pytest.mark.parametrize("kind", ["logistic", "relu_network"])
def test_effective_alphas_match_monte_carlo(kind):
    gt = generate_ground_truth(5, 2, 3, seed=6, noise_sigma=0.0)
    link = LinkSpec(kind)
    eff = effective_alphas(gt, link)
    ds = sample_nonlinear_dataset(gt, link, np.full(3, 200_000), seed=7)
    for i, (X, y) in enumerate(ds.clients):
        mc = gt.B_star.T @ (X * y[:, None]).mean(axis=0)
        assert np.linalg.norm(mc - eff[:, i]) < 0.02


def test_custom_link_effective_alpha():
    gt = generate_ground_truth(4, 1, 1, seed=0, alpha_scheme=np.array([[1.0]]))
    link = LinkSpec("custom_lipschitz", lipschitz_bound=1.0, func=lambda U, a: np.tanh(U @ a))
    eff = effective_alphas(gt, link, mc_samples=400_000, seed=3)
    # E[tanh(U) U] = E[1 - tanh(U)^2] by Stein; reference via quadrature
    x, w = np.polynomial.hermite_e.hermegauss(100)
    ref = np.sum(w * (1 - np.tanh(x) ** 2)) / np.sum(w)
    assert abs(eff[0, 0] - ref) < 0.005


def test_link_spec_validation():
    with pytest.raises(ConfigurationError):
        LinkSpec("sigmoid")
    with pytest.raises(ConfigurationError):
        LinkSpec("custom_lipschitz", lipschitz_bound=1.0)


@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**32))
def test_generated_ground_truth_invariants(k, extra, seed):
    gt = generate_ground_truth(k + extra, k, k + 2, "diagonal", seed=seed)
    gt.check_invariants()
    assert gt.d == k + extra and gt.k == k and gt.M == k + 2

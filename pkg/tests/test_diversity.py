import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sharedrep import (
    ConfigurationError,
    DimensionError,
    diversity_matrix,
    generate_ground_truth,
    sample_partitions,
    spectrum,
    well_represented_check,
)


def test_orthonormal_heads_give_isotropic_diversity():
    k = 4
    D = diversity_matrix(np.eye(k), np.full(k, 7))
    assert np.allclose(D, np.eye(k) / k, atol=1e-15)
    s = spectrum(D)
    assert s.lambda1 == pytest.approx(1 / k, abs=1e-14)
    assert s.lambdak == pytest.approx(1 / k, abs=1e-14)
    assert s.condition == pytest.approx(1.0, abs=1e-12)


def test_identical_heads_are_rank_one():
    alphas = np.zeros((3, 5))
    alphas[0] = 1.0
    s = spectrum(diversity_matrix(alphas, np.arange(1, 6)))
    assert s.lambdak == 0.0
    assert math.isinf(s.condition) and s.rank_deficient
    assert s.lambda1 == pytest.approx(1.0, abs=1e-12)


def test_matches_double_loop(rng):
    k, M = 3, 20
    alphas = rng.standard_normal((k, M))
    parts = rng.integers(1, 30, size=M)
    ref = np.zeros((k, k))
    for i in range(M):
        for a in range(k):
            for b in range(k):
                ref[a, b] += parts[i] * alphas[a, i] * alphas[b, i]
    ref /= parts.sum()
    D = diversity_matrix(alphas, parts)
    assert np.max(np.abs(D - ref)) <= 1e-12
    assert np.array_equal(D, D.T)


def test_two_by_two_quadratic_formula(rng):
    for _ in range(20):
        A = rng.standard_normal((2, 2))
        D = A @ A.T
        a, b, c = D[0, 0], D[0, 1], D[1, 1]
        disc = math.sqrt((a - c) ** 2 + 4 * b * b)
        hi, lo = (a + c + disc) / 2, (a + c - disc) / 2
        s = spectrum(D)
        assert s.lambda1 == pytest.approx(hi, abs=1e-10)
        assert s.eigenvalues[1] == pytest.approx(lo, abs=1e-10)


def test_spectrum_rejects_asymmetric_and_non_square():
    with pytest.raises(DimensionError):
        spectrum(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        spectrum(np.ones((2, 3)))


def test_mismatched_shapes():
    with pytest.raises(DimensionError):
        diversity_matrix(np.ones((2, 3)), np.ones(4))
    with pytest.raises(DimensionError):
        diversity_matrix(np.ones((2, 3)), np.array([1, 0, 1]))


def test_well_represented_equal_and_extreme():
    eq = well_represented_check(np.full(100, 20), k=5, c=math.sqrt(5 / 100))
    assert eq.ratio == 1.0 and eq.satisfied
    M, N = 50, 5000
    parts = np.ones(M, dtype=int)
    parts[0] = N - (M - 1)
    bad = well_represented_check(parts, k=5, c=1.0)
    assert bad.ratio == pytest.approx(M * (N - M + 1) / N)
    assert not bad.satisfied
    with pytest.raises(DimensionError):
        well_represented_check([], k=2)
    with pytest.raises(ConfigurationError):
        well_represented_check([1, 2], k=1, c=0)


def test_uniform_partitions_are_well_represented():
    parts = sample_partitions("uniform:2:118", 1000, seed=0)
    res = well_represented_check(parts, k=10, c=1.0)
    assert res.ratio == pytest.approx(parts.max() / parts.mean())
    assert res.ratio <= 118 / parts.mean() + 1e-12
    assert res.threshold == pytest.approx(10.0)
    assert res.satisfied


def test_gaussian_heads_have_bounded_condition_number():
    k, M = 5, 100
    ok = 0
    for seed in range(100):
        gt = generate_ground_truth(k, k, M, seed=seed)
        if spectrum(diversity_matrix(gt.alphas, np.full(M, 20))).condition <= 3.0:
            ok += 1
    assert ok >= 95


small_alphas = arrays(np.float64, (3, 6), elements=st.floats(-3, 3))
small_parts = arrays(np.int64, 6, elements=st.integers(1, 50))


@given(small_alphas, small_parts, st.integers(1, 5))
def test_scale_invariance_and_trace(alphas, parts, m):
    D = diversity_matrix(alphas, parts)
    assert np.allclose(D, diversity_matrix(alphas, parts * m), atol=1e-12)
    s = spectrum(D)
    ref_trace = np.sum(parts * np.sum(alphas**2, axis=0)) / parts.sum()
    assert s.trace == pytest.approx(ref_trace, abs=1e-8)
    assert s.lambda1 >= s.lambdak >= 0
    if not s.rank_deficient:
        assert s.condition >= 1.0

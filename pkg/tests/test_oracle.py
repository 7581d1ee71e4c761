import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssdpp.errors import CapacityError
from cssdpp.linalg import (
    compute_svd,
    elementary_symmetric,
    frobenius_projection_residual,
    k_leverage_scores,
    rejected_columns,
)
from cssdpp.oracle import (
    all_subsets,
    conditional_law,
    enumerate_law,
    exact_avoiding_probability,
    exact_conditional_expected_error,
    exact_expected_error,
    subset_index,
    subset_residuals,
)
from cssdpp.rng import RngState
from cssdpp.samplers import projection_dpp_sample_batch, volume_sampling_sample_batch


def random_matrix(seed, n=10, d=7):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)) * rng.uniform(0.2, 3.0, d)


def test_subset_index_is_lexicographic_rank():
    for r, S in enumerate(combinations(range(7), 3)):
        assert subset_index(S, 7) == r
    assert all_subsets(5, 2).shape == (10, 2)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        all_subsets(60, 10)


def test_identity_volume_law_is_uniform():
    law = enumerate_law(np.eye(6), 2, "vs")
    np.testing.assert_allclose(law.weights, 1 / 15)


@pytest.mark.parametrize("seed", range(5))
def test_dpp_weights_sum_to_one_without_normalizing(seed):
    Vk = compute_svd(random_matrix(seed)).V[:, :3]
    raw = sum(np.linalg.det(Vk[list(S)]) ** 2 for S in combinations(range(7), 3))
    assert raw == pytest.approx(1.0, abs=1e-12)
    law = enumerate_law(random_matrix(seed), 3, "dpp")
    assert law.probability((0, 1, 2)) == pytest.approx(np.linalg.det(Vk[[0, 1, 2]]) ** 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_volume_normalizer_is_esp_of_squared_spectrum(seed, k):
    rng = np.random.default_rng(seed)
    d = rng.integers(k, 8) + 1
    X = rng.standard_normal((9, d))
    raw = sum(np.linalg.det(X[:, list(S)].T @ X[:, list(S)]) for S in combinations(range(d), k))
    sigma = np.linalg.svd(X, compute_uv=False)
    assert raw == pytest.approx(elementary_symmetric(sigma**2, k), rel=1e-8)


def test_subset_residuals_match_direct_projection():
    X = random_matrix(3)
    subsets = all_subsets(7, 3)
    res = subset_residuals(X, subsets)
    direct = [frobenius_projection_residual(X, S) ** 2 for S in subsets]
    np.testing.assert_allclose(res, direct, rtol=1e-10)
    res2 = subset_residuals(X, subsets, "spectral")
    direct2 = [frobenius_projection_residual(X, S, "spectral") ** 2 for S in subsets]
    np.testing.assert_allclose(res2, direct2, rtol=1e-10)


def test_rank_k_matrix_has_zero_expected_error():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 7))
    for kind in ("dpp", "vs"):
        assert exact_expected_error(X, 3, kind) == pytest.approx(0.0, abs=1e-18 + 1e-10 * np.sum(X**2))


@pytest.mark.parametrize("kind", ["dpp", "vs"])
def test_monte_carlo_mean_within_three_stderr(kind):
    X = random_matrix(5)
    exact = exact_expected_error(X, 3, kind)
    if kind == "dpp":
        draws = projection_dpp_sample_batch(compute_svd(X).V[:, :3], 10_000, RngState(1))
    else:
        draws = volume_sampling_sample_batch(X, 3, 10_000, RngState(1))
    law = enumerate_law(X, 3, kind)
    res = subset_residuals(X, law.subsets)
    vals = res[[subset_index(S, 7) for S in draws]]
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - exact) <= 3 * se


def test_reweighting_invariance_of_dpp_law():
    for seed in range(5):
        Vk = compute_svd(random_matrix(seed, d=8)).V[:, :3]
        law = enumerate_law(random_matrix(seed, d=8), 3, "dpp")
        w = np.random.default_rng(seed).uniform(0.1, 10.0, 3)
        K = Vk @ np.diag(w) @ Vk.T
        raw = np.array([np.linalg.det(K[np.ix_(S, S)]) for S in law.subsets])
        np.testing.assert_allclose(raw / raw.sum(), law.weights, atol=1e-10)


def test_avoiding_probability_examples_and_lower_bound():
    X = random_matrix(6, d=8)
    svd = compute_svd(X)
    prof = k_leverage_scores(svd, 3)
    Vk = svd.V[:, :3]
    assert exact_avoiding_probability(Vk, prof, 1 + 1e-9) == pytest.approx(1.0)
    thetas = np.linspace(1.05, 5.0, 30)
    probs = [exact_avoiding_probability(Vk, prof, t) for t in thetas]
    assert all(p >= 1 / t - 1e-12 for p, t in zip(probs, thetas))
    # smaller theta keeps more columns, so avoidance can only get likelier
    assert all(a >= b - 1e-12 for a, b in zip(probs, probs[1:]))


def test_conditional_law_is_restriction():
    X = random_matrix(7, d=8)
    svd = compute_svd(X)
    prof = k_leverage_scores(svd, 3)
    cond = conditional_law(X, 3, 2.0)
    assert cond.weights.sum() == pytest.approx(1.0, abs=1e-12)
    avoid = set(rejected_columns(prof, 2.0).tolist())
    base = enumerate_law(X, 3, "dpp")
    total = exact_avoiding_probability(svd.V[:, :3], prof, 2.0)
    for S, w, w0 in zip(cond.subsets, cond.weights, base.weights):
        if avoid & set(S.tolist()):
            assert w == 0
        else:
            assert w == pytest.approx(w0 / total, rel=1e-10, abs=1e-15)


def test_conditional_equals_unconditional_when_nothing_avoided():
    X = random_matrix(8)
    assert exact_conditional_expected_error(X, 3, 1 + 1e-9) == pytest.approx(
        exact_expected_error(X, 3, "dpp"), rel=1e-12
    )


def test_expectation_is_independent_of_chunking(monkeypatch):
    import cssdpp.oracle as oracle

    X = random_matrix(9, d=9)
    a = exact_expected_error(X, 3, "dpp")
    monkeypatch.setattr(oracle, "CHUNK", 7)
    b = exact_expected_error(X, 3, "dpp")
    assert a == pytest.approx(b, rel=1e-12)

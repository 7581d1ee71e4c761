import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssdpp.errors import InfeasibleError, InputError
from cssdpp.linalg import compute_svd, k_leverage_scores
from cssdpp.matrixgen import (
    EigenstepMatrix,
    LeverageTarget,
    check_majorization,
    compute_eigensteps,
    dirichlet_leverage_profile,
    givens_frame,
    haar_stiefel,
    majorization_report,
    matrix_generator,
    random_eigensteps,
    random_frame,
    reconstruct_frame,
    toy_matrix,
    toy_spectrum,
)
from cssdpp.rng import RngState, as_generator

EXAMPLE_F = np.array([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]])
EXAMPLE_STEPS = np.array([[1.0, 1.0, 2.0, 2.0], [0.0, 1.0, 1.0, 2.0]])


def random_target(gen, k_max=4, d_max=12):
    """Feasible (ell, sigma) with ell the diagonal of a random frame."""
    k = int(gen.integers(1, k_max + 1))
    d = int(gen.integers(k + 1, d_max + 1))
    sigma = np.sort(gen.uniform(0.5, 3.0, k))[::-1]
    Q = haar_stiefel(d, k, gen)
    ell = np.sum((Q * sigma) ** 2, axis=1)
    return ell, sigma


def check_frame(F, ell, sigma, tol=1e-8):
    np.testing.assert_allclose(np.sum(F**2, axis=0), ell, atol=tol)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(F @ F.T))[::-1], np.sort(sigma**2)[::-1], atol=tol)


# ---------------------------------------------------------------- feasibility


def test_majorization_examples():
    assert check_majorization([1, 1, 1], [3, 0, 0])
    assert check_majorization([0.4] * 5, [1, 1])
    assert not check_majorization([1.5, 0.5, 0], [1, 1])
    ok, reason = majorization_report([1, 1], [3])
    assert not ok and "sums" in reason


def test_schur_horn_grid_k2_d4():
    sigma = np.array([np.sqrt(1.5), np.sqrt(0.5)])
    steps = np.arange(0, 2.25, 0.25)
    n_feasible = n_infeasible = 0
    for ell in itertools.product(steps, repeat=4):
        ell = np.array(ell)
        if abs(ell.sum() - 2.0) > 1e-12:
            continue
        srt = np.sort(ell)[::-1]
        feasible = srt[0] <= 1.5 + 1e-12
        assert check_majorization(ell, sigma**2) == feasible
        if feasible:
            n_feasible += 1
            check_frame(givens_frame(ell, sigma), ell, sigma)
            check_frame(random_frame(ell, sigma**2, n_feasible), ell, sigma)
        else:
            n_infeasible += 1
            with pytest.raises(InfeasibleError):
                random_frame(ell, sigma**2, 0)
    assert n_feasible > 10 and n_infeasible > 5


def test_leverage_target_validation():
    assert LeverageTarget(np.array([1.0, 0.5, 0.5, 0.0])).sparsity == 3
    with pytest.raises(InputError):
        LeverageTarget(np.array([0.5, 1.0]))
    with pytest.raises(InputError):
        LeverageTarget(np.array([1.0, -0.1]), sorted_decreasing=False)


# ---------------------------------------------------------------- eigensteps


def test_worked_example_eigensteps_exact():
    steps = compute_eigensteps(EXAMPLE_F)
    np.testing.assert_array_equal(np.round(steps.values, 14), EXAMPLE_STEPS)
    assert steps.is_valid(ell=np.sum(EXAMPLE_F**2, axis=0), sigma_sq=[2, 2])


def test_worked_example_round_trip():
    ell = np.sum(EXAMPLE_F**2, axis=0)
    for seed in range(5):
        F = reconstruct_frame(EigenstepMatrix(EXAMPLE_STEPS), ell, RngState(seed))
        np.testing.assert_allclose(compute_eigensteps(F).values, EXAMPLE_STEPS, atol=1e-7)


def test_square_case_is_unique():
    sigma_sq = np.array([3.0, 2.0, 1.0])
    ell = np.array([1.0, 1.0, 1.0])
    # d == k with ell == sigma^2 sorted has no freedom
    steps = [random_eigensteps(sigma_sq, sigma_sq, RngState(s)).values for s in range(3)]
    for s in steps[1:]:
        np.testing.assert_allclose(s, steps[0], atol=1e-12)
    np.testing.assert_allclose(steps[0], [[3, 3, 3], [0, 2, 2], [0, 0, 1]], atol=1e-12)
    assert random_eigensteps(ell, [1.5, 1.5], 0).is_valid(ell, [1.5, 1.5])


def test_row_sums_telescope():
    ell = np.ones(4)
    steps = random_eigensteps(ell, [2.0, 2.0], RngState(1))
    np.testing.assert_allclose(steps.values.sum(axis=0), [1, 2, 3, 4], atol=1e-12)


def test_unsorted_or_infeasible_targets_raise():
    with pytest.raises(InputError):
        random_eigensteps([0.5, 1.0], [1.5], 0)
    with pytest.raises(InfeasibleError):
        random_eigensteps([1.9, 0.1], [1.0, 1.0], 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_random_eigensteps_valid_and_round_trip(seed):
    gen = as_generator(RngState(seed))
    ell, sigma = random_target(gen, d_max=10)
    ell = np.sort(ell)[::-1]
    steps = random_eigensteps(ell, sigma**2, gen)
    assert steps.is_valid(ell, sigma**2)
    F = reconstruct_frame(steps, ell, gen)
    np.testing.assert_allclose(compute_eigensteps(F).values, steps.values, atol=1e-7)
    check_frame(F, ell, sigma)


@pytest.mark.parametrize("seed", range(5))
def test_validator_catches_mutations(seed):
    gen = as_generator(RngState(seed))
    ell = np.sort(dirichlet_leverage_profile(3, 7, 9, gen).scores)[::-1]
    steps = random_eigensteps(ell, np.ones(3), gen)
    assert steps.is_valid(ell, np.ones(3))
    vals = steps.values
    mutations = []
    bumped = vals.copy()
    bumped[0, 4] += 0.3  # breaks the trace of step 5 and interlacing
    mutations.append(bumped)
    swapped = vals.copy()
    r = int(np.argmax(vals[0] - vals[1] > 0.05))
    swapped[[0, 1], r] = swapped[[1, 0], r]  # unsorted step
    mutations.append(swapped)
    negative = vals.copy()
    negative[2, 8] = -0.01
    mutations.append(negative)
    early = vals.copy()
    early[1, 0] = 0.2  # two nonzero eigenvalues after one column
    mutations.append(early)
    last = vals.copy()
    last[:, -1] = [1.2, 1.0, 0.8]
    mutations.append(last)
    for m in mutations:
        assert not EigenstepMatrix(m).is_valid(ell, np.ones(3))


def test_reconstruct_k1_is_signed_sqrt_row():
    ell = np.array([0.5, 0.3, 0.2])
    F = reconstruct_frame(random_eigensteps(ell, [1.0], 0), ell, 1)
    np.testing.assert_allclose(np.abs(F[0]), np.sqrt(ell), atol=1e-12)
    assert np.sum(F**2) == pytest.approx(1.0)


def test_reconstruction_is_randomized():
    ell = np.array([0.8, 0.6, 0.4, 0.2])
    A = random_frame(ell, [1.0, 1.0], 1)
    B = random_frame(ell, [1.0, 1.0], 2)
    assert not np.allclose(A, B)
    check_frame(A, ell, np.ones(2))
    check_frame(B, ell, np.ones(2))


def test_negative_eigenspace_weight_raises():
    # eigensteps that violate interlacing force a negative residue
    bad = EigenstepMatrix(np.array([[1.0, 1.0, 2.0], [0.0, 1.5, 0.0]]))
    with pytest.raises(InfeasibleError):
        reconstruct_frame(bad, [1.0, 1.5, -0.5], 0)


# ---------------------------------------------------------------- frames


def test_givens_feasible_start_unchanged():
    sigma = np.array([2.0, 1.0])
    ell = np.array([4.0, 1.0, 0.0, 0.0])
    F = givens_frame(ell, sigma)
    np.testing.assert_allclose(F, [[2, 0, 0, 0], [0, 1, 0, 0]], atol=1e-15)


def test_givens_uniform_circular_pattern():
    F = givens_frame(np.full(10, 0.2), np.ones(2))
    np.testing.assert_allclose(np.sum(F**2, axis=0), 0.2, atol=1e-12)
    np.testing.assert_allclose(F @ F.T, np.eye(2), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_givens_matches_targets(seed):
    ell, sigma = random_target(as_generator(RngState(seed)))
    check_frame(givens_frame(ell, sigma), ell, sigma)


def test_givens_infeasible_raises():
    with pytest.raises(InfeasibleError):
        givens_frame([1.9, 0.1, 0.0], [1.0, 1.0])


# ---------------------------------------------------------------- generator


@pytest.mark.parametrize("seed", range(10))
def test_matrix_generator_end_to_end(seed):
    gen = as_generator(RngState(seed))
    k = int(gen.integers(1, 5))
    d = int(gen.integers(k + 1, 13))
    p = int(gen.integers(k, d + 1))
    ell = dirichlet_leverage_profile(k, p, d, gen).scores
    ell = gen.permutation(ell)
    sigma = np.sort(gen.uniform(0.1, 5.0, d))[::-1]
    sigma[:k] += 1.0
    X, U, V = matrix_generator(ell, sigma, 30, gen, return_factors=True)
    np.testing.assert_allclose(V.T @ V, np.eye(d), atol=1e-10)
    np.testing.assert_allclose(U.T @ U, np.eye(d), atol=1e-10)
    svd = compute_svd(X)
    np.testing.assert_allclose(svd.sigma, sigma, rtol=1e-10)
    np.testing.assert_allclose(k_leverage_scores(svd, k).scores, ell, atol=1e-8)


def test_matrix_generator_checks():
    with pytest.raises(InputError):
        matrix_generator([0.5, 0.5], [1.0, 1.0], 1)
    with pytest.raises(InfeasibleError):
        matrix_generator([0.7, 0.7], [1.0, 1.0], 5)


def test_dirichlet_profile_properties():
    gen = as_generator(RngState(3))
    prof = dirichlet_leverage_profile(3, 3, 8, gen)
    np.testing.assert_array_equal(prof.scores, [1, 1, 1, 0, 0, 0, 0, 0])
    for method in ("reject", "redistribute"):
        for _ in range(500):
            p = int(gen.integers(3, 9))
            s = dirichlet_leverage_profile(3, p, 8, gen, method=method).scores
            assert s.sum() == pytest.approx(3.0)
            assert np.all(s <= 1.0 + 1e-12)
            assert np.count_nonzero(s) == p
            assert check_majorization(s, np.ones(3))
    with pytest.raises(InfeasibleError):
        dirichlet_leverage_profile(3, 2, 8)


def test_rejection_profiles_avoid_unit_scores():
    gen = as_generator(RngState(4))
    for _ in range(200):
        s = dirichlet_leverage_profile(3, 8, 20, gen).scores
        assert s.max() < 1.0


def test_toy_spectra_definitions():
    s, k = toy_spectrum("proj3")
    assert k == 3 and s.size == 20
    np.testing.assert_array_equal(s[:3], 100.0)
    np.testing.assert_array_equal(s[3:], 0.1)
    s, k = toy_spectrum("smooth5")
    np.testing.assert_array_equal(s[:5], [10000, 1000, 100, 10, 1])
    np.testing.assert_array_equal(s[5:], 0.1)
    with pytest.raises(InputError):
        toy_spectrum("nope")
    with pytest.raises(InputError):
        toy_matrix("identity", 5)


def test_toy_matrix_leverage():
    X, ell = toy_matrix("proj5", 9, RngState(0))
    assert X.shape == (100, 20)
    np.testing.assert_allclose(k_leverage_scores(compute_svd(X), 5).scores, ell, atol=1e-8)

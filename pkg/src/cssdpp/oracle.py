"""Exact ground truth by exhaustive enumeration of k-subsets.

All sums run over subsets in lexicographic order, processed in fixed-size
chunks and accumulated in chunk order, so results do not depend on how the
work might be split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from .errors import CapacityError, ConsistencyError, InputError, InvariantViolation, RankError
from .linalg import (
    FROBENIUS,
    RANK_RTOL,
    SPECTRAL,
    KLeverageProfile,
    SvdBundle,
    _check_norm,
    as_data_matrix,
    elementary_symmetric,
    k_leverage_scores,
    kept_columns,
    rejected_columns,
)

MAX_SUBSETS = 2_000_000
CHUNK = 4096


def _check_capacity(d: int, k: int):
    if not 1 <= k <= d:
        raise InputError(f"need 1 <= k <= d, got k={k}, d={d}")
    count = math.comb(d, k)
    if count > MAX_SUBSETS:
        raise CapacityError(f"C({d},{k}) = {count} subsets exceed the cap {MAX_SUBSETS}")
    return count


def iter_subset_chunks(d: int, k: int, chunk: int = CHUNK, columns=None):
    """Yield (m, k) arrays of k-subsets of ``columns`` (default range(d)) in lexicographic order."""
    pool = range(d) if columns is None else [int(c) for c in columns]
    it = combinations(pool, k)
    while True:
        block = list(islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def all_subsets(d: int, k: int) -> np.ndarray:
    _check_capacity(d, k)
    return np.array(list(combinations(range(d), k)), dtype=np.intp).reshape(-1, k)


def subset_index(S, d: int) -> int:
    """Lexicographic rank of a sorted k-subset of range(d)."""
    S = sorted(int(i) for i in S)
    k = len(S)
    rank, prev = 0, -1
    for j, s in enumerate(S):
        for t in range(prev + 1, s):
            rank += math.comb(d - 1 - t, k - 1 - j)
        prev = s
    return rank


@dataclass(frozen=True, eq=False)
class SubsetLaw:
    """A probability law on k-subsets of range(d), indexed lexicographically."""

    k: int
    d: int
    subsets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < -1e-15):
            raise InvariantViolation("negative probability")
        if abs(w.sum() - 1.0) > 1e-10:
            raise InvariantViolation(f"law sums to {w.sum()}")

    def probability(self, S) -> float:
        return float(self.weights[subset_index(S, self.d)])

    def as_dict(self) -> dict:
        return {tuple(int(i) for i in s): float(w) for s, w in zip(self.subsets, self.weights)}

    def restricted(self, mask) -> "SubsetLaw":
        """Condition on the subsets where ``mask`` is true."""
        w = np.where(mask, self.weights, 0.0)
        total = w.sum()
        if not total > 0:
            raise InvariantViolation("conditioning event has probability zero")
        return SubsetLaw(self.k, self.d, self.subsets, w / total)

    def avoiding(self, columns) -> np.ndarray:
        """Boolean mask of subsets that contain none of ``columns``."""
        bad = np.zeros(self.d, dtype=bool)
        bad[np.asarray(columns, dtype=np.intp)] = True
        return ~np.any(bad[self.subsets], axis=1)

    def empirical_tv(self, draws) -> float:
        """Total-variation distance between this law and sorted (n, k) draws."""
        draws = np.sort(np.asarray(draws, dtype=np.intp), axis=1)
        codes = np.zeros(draws.shape[0], dtype=np.int64)
        # lexicographic rank, vectorized over draws
        k, d = self.k, self.d
        prev = np.full(draws.shape[0], -1)
        comb = np.array([[math.comb(n, r) for r in range(k + 1)] for n in range(d + 1)])
        for j in range(k):
            s = draws[:, j]
            for t in range(d):
                between = (t > prev) & (t < s)
                if np.any(between):
                    codes[between] += comb[d - 1 - t, k - 1 - j]
            prev = s
        counts = np.bincount(codes, minlength=self.weights.size) / draws.shape[0]
        return 0.5 * float(np.abs(counts - self.weights).sum())


def _svd_of(X) -> SvdBundle:
    return X if isinstance(X, SvdBundle) else as_data_matrix(X).svd


def _dpp_weights(Vk: np.ndarray, chunks) -> np.ndarray:
    out = [np.linalg.det(Vk[S]) ** 2 for S in chunks]
    return np.concatenate(out) if out else np.zeros(0)


def enumerate_law(X, k: int, kind: str = "dpp") -> SubsetLaw:
    """Exact law of the projection DPP ("dpp") or of volume sampling ("vs")."""
    svd = _svd_of(X)
    d = svd.n_cols
    _check_capacity(d, k)
    if k > svd.rank:
        raise RankError(f"k={k} exceeds rank {svd.rank}")
    subsets = all_subsets(d, k)
    if kind == "dpp":
        w = _dpp_weights(svd.V[:, :k], np.array_split(subsets, max(1, len(subsets) // CHUNK)))
        total = w.sum()
        if abs(total - 1.0) > 1e-8:
            raise InvariantViolation(f"DPP weights sum to {total}")
    elif kind == "vs":
        # X_S^T X_S = Y_S^T Y_S with Y = diag(sigma) V^T; rescale for range safety
        Y = (svd.V * (svd.sigma / svd.sigma[0])).T
        parts = []
        for S in np.array_split(subsets, max(1, len(subsets) // CHUNK)):
            R = np.linalg.qr(Y[:, S].transpose(1, 0, 2), mode="r")
            parts.append(np.prod(np.diagonal(R, axis1=1, axis2=2) ** 2, axis=1))
        w = np.maximum(np.concatenate(parts), 0.0)
        total = w.sum()
        expected = elementary_symmetric((svd.sigma / svd.sigma[0]) ** 2, k)
        if abs(total - expected) > 1e-8 * expected:
            raise ConsistencyError(f"volume normalizer {total} differs from e_k = {expected}")
    else:
        raise InputError(f"unknown law kind {kind!r}")
    return SubsetLaw(k, d, subsets, w / total)


def subset_residuals(X, subsets: np.ndarray, norm: str = FROBENIUS) -> np.ndarray:
    """Squared residual norms ``||X - Pi_S X||^2`` for each row of ``subsets``.

    Works on the reduced matrix ``diag(sigma) V^T``, which has the same
    residual norms as X.
    """
    norm = _check_norm(norm)
    svd = _svd_of(X)
    Y = (svd.V * svd.sigma).T
    out = np.empty(len(subsets))
    for start in range(0, len(subsets), CHUNK):
        S = subsets[start : start + CHUNK]
        Ys = Y[:, S].transpose(1, 0, 2)
        U, s, _ = np.linalg.svd(Ys, full_matrices=False)
        keep = s > RANK_RTOL * s[:, :1]
        Q = U * keep[:, None, :]
        R = Y[None] - Q @ (np.swapaxes(Q, 1, 2) @ Y[None])
        if norm == FROBENIUS:
            out[start : start + len(S)] = np.einsum("mij,mij->m", R, R)
        else:
            out[start : start + len(S)] = np.linalg.norm(R, 2, axis=(1, 2)) ** 2
    return out


def _expectation(law: SubsetLaw, X, norm: str, mask=None) -> float:
    w = law.weights if mask is None else law.weights * mask
    live = w > 0
    res = subset_residuals(X, law.subsets[live], norm)
    total = 0.0
    for start in range(0, res.size, CHUNK):
        total += float(np.dot(w[live][start : start + CHUNK], res[start : start + CHUNK]))
    return total


def exact_expected_error(X, k: int, kind: str = "dpp", norm: str = FROBENIUS) -> float:
    """Exact expectation of the squared residual norm under the chosen law."""
    law = enumerate_law(X, k, kind)
    return _expectation(law, X, _check_norm(norm))


def exact_avoiding_probability(Vk, profile: KLeverageProfile, theta: float) -> float:
    """Probability that a projection-DPP sample avoids the low-score columns.

    Computed by summing squared minors over the avoiding subsets and,
    independently, as the product of eigenvalues of the kernel restricted to
    the kept columns (its e_k). Raises :class:`ConsistencyError` if they
    differ by more than 1e-8.
    """
    Vk = np.asarray(Vk, dtype=np.float64)
    d, k = Vk.shape
    kept = kept_columns(profile, theta)
    if kept.size < k:
        return 0.0
    _check_capacity(kept.size, k)
    by_minors = 0.0
    for S in iter_subset_chunks(d, k, columns=kept):
        by_minors += float(np.sum(np.linalg.det(Vk[S]) ** 2))
    sub = Vk[kept]
    eig = np.clip(np.linalg.eigvalsh(sub @ sub.T), 0.0, None)
    by_spectrum = elementary_symmetric(eig, k)
    if abs(by_minors - by_spectrum) > 1e-8:
        raise ConsistencyError(
            f"avoiding probability: minors give {by_minors}, spectrum gives {by_spectrum}"
        )
    return by_minors


def conditional_law(X, k: int, theta: float, profile: KLeverageProfile | None = None) -> SubsetLaw:
    """DPP law restricted to subsets that avoid the low-score columns, renormalized."""
    svd = _svd_of(X)
    profile = profile or k_leverage_scores(svd, k)
    law = enumerate_law(svd, k, "dpp")
    return law.restricted(law.avoiding(rejected_columns(profile, theta)))


def exact_conditional_expected_error(X, k: int, theta: float, norm: str = FROBENIUS) -> float:
    """Exact expected squared residual of the DPP conditioned on avoidance."""
    law = conditional_law(X, k, theta)
    return _expectation(law, X, _check_norm(norm))


__all__ = [
    "SubsetLaw",
    "all_subsets",
    "conditional_law",
    "enumerate_law",
    "exact_avoiding_probability",
    "exact_conditional_expected_error",
    "exact_expected_error",
    "iter_subset_chunks",
    "subset_index",
    "subset_residuals",
    "SPECTRAL",
]

"""Dense linear-algebra substrate for column subset selection.

Everything here is deterministic: SVD with a fixed sign convention,
k-leverage scores and the derived sparsity/flatness statistics, elementary
symmetric polynomials, spanned volumes, projection residuals and principal
angles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, InvariantViolation, RankError, SingularityError

# single rank policy: singular values below RANK_RTOL * sigma_1 are dropped
RANK_RTOL = 1e-12
# a k-leverage score below this counts as zero when computing the sparsity p
ZERO_SCORE_ATOL = 1e-12

FROBENIUS = "frobenius"
SPECTRAL = "spectral"
NORMS = (FROBENIUS, SPECTRAL)


def _check_norm(norm: str) -> str:
    norm = {"fro": FROBENIUS, "fr": FROBENIUS, "2": SPECTRAL}.get(norm, norm)
    if norm not in NORMS:
        raise InputError(f"unknown norm {norm!r}; expected one of {NORMS}")
    return norm


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """Immutable N x d data matrix with a lazily cached SVD."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @cached_property
    def svd(self) -> "SvdBundle":
        return compute_svd(self)


def as_data_matrix(X) -> DataMatrix:
    return X if isinstance(X, DataMatrix) else DataMatrix(X)


@dataclass(frozen=True, eq=False)
class SvdBundle:
    """Thin SVD ``X = U diag(sigma) V^T`` truncated to the numerical rank.

    ``U`` is N x r, ``V`` is d x r, ``sigma`` is decreasing and positive.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def n_cols(self) -> int:
        return self.V.shape[0]

    def full_sigma(self) -> np.ndarray:
        """Singular values padded with zeros to length d."""
        out = np.zeros(self.n_cols)
        out[: self.rank] = self.sigma
        return out


def compute_svd(X) -> SvdBundle:
    X = as_data_matrix(X)
    U, s, Vt = np.linalg.svd(X.values, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.sum(s > RANK_RTOL * s[0]))
    U, s, V = U[:, :r], s[:r], Vt[:r].T
    # sign convention: first non-negligible entry of each right singular vector >= 0
    if r:
        V = V.copy()
        U = U.copy()
        for j in range(r):
            col = V[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if nz.size and col[nz[0]] < 0:
                V[:, j] = -col
                U[:, j] = -U[:, j]
    for a in (U, s, V):
        a.setflags(write=False)
    return SvdBundle(U=U, sigma=s, V=V)


@dataclass(frozen=True, eq=False)
class SubsetSelection:
    """Selected column indices (0-based, sorted).

    Multinomial samplers may return the same column several times; they set
    ``allow_duplicates``.
    """

    indices: tuple
    allow_duplicates: bool = False
    n_cols: int | None = None

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if any(i < 0 for i in idx):
            raise InputError("negative column index")
        if self.n_cols is not None and idx and idx[-1] >= self.n_cols:
            raise InputError(f"column index {idx[-1]} out of range for d={self.n_cols}")
        if not self.allow_duplicates and len(set(idx)) != len(idx):
            raise InputError("duplicate indices in a selection that forbids them")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __eq__(self, other):
        if isinstance(other, SubsetSelection):
            return self.indices == other.indices
        return NotImplemented

    def __hash__(self):
        return hash(self.indices)

    def __repr__(self):
        return f"SubsetSelection({list(self.indices)})"

    @property
    def distinct(self) -> tuple:
        return tuple(sorted(set(self.indices)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def sampling_matrix(self, d: int) -> np.ndarray:
        """The d x |S| 0/1 matrix whose right action extracts the columns."""
        S = np.zeros((d, len(self.indices)))
        S[self.as_array(), np.arange(len(self.indices))] = 1.0
        return S


def as_selection(S, n_cols=None) -> SubsetSelection:
    if isinstance(S, SubsetSelection):
        return S
    return SubsetSelection(tuple(S), allow_duplicates=True, n_cols=n_cols)


@dataclass(frozen=True, eq=False)
class KLeverageProfile:
    """k-leverage scores of a matrix together with the statistics derived from them."""

    k: int
    scores: np.ndarray
    sparsity_p: int
    beta: float | None = None
    order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        # decreasing scores, ties broken by smallest index
        order = np.argsort(-scores, kind="stable")
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @property
    def n_cols(self) -> int:
        return self.scores.shape[0]

    @classmethod
    def from_scores(cls, scores, k: int, beta: float | None = None) -> "KLeverageProfile":
        scores = np.asarray(scores, dtype=np.float64)
        p = int(np.sum(scores >= ZERO_SCORE_ATOL))
        return cls(k=int(k), scores=scores, sparsity_p=p, beta=beta)


def k_leverage_scores(svd: SvdBundle, k: int) -> KLeverageProfile:
    """Squared row norms of the first k right singular vectors."""
    if k < 1:
        raise InputError("k must be >= 1")
    if k > svd.rank:
        raise RankError(f"k={k} exceeds rank {svd.rank}")
    Vk = svd.V[:, :k]
    scores = np.einsum("ij,ij->i", Vk, Vk)
    total = scores.sum()
    if abs(total - k) > 1e-8:
        raise InvariantViolation(f"k-leverage scores sum to {total}, expected {k}")
    d = svd.n_cols
    beta = flatness_beta(svd.full_sigma(), k, d) if k < d else None
    return KLeverageProfile.from_scores(scores, k, beta=beta)


def flatness_beta(sigma, k: int, d: int) -> float:
    """Ratio of sigma_{k+1}^2 to the mean of the squared tail sigma_{k+1..d}.

    Returns 1 when the tail is identically zero.
    """
    if not 0 <= k < d:
        raise InputError(f"need 0 <= k < d, got k={k}, d={d}")
    s = np.zeros(d)
    sig = np.asarray(sigma, dtype=np.float64)[:d]
    s[: sig.size] = sig
    tail = s[k:] ** 2
    total = tail.sum()
    if total <= 0.0:
        return 1.0
    return float(tail[0] / (total / (d - k)))


def effective_sparsity(profile: KLeverageProfile, theta: float) -> int:
    """Smallest q such that the q largest scores sum to at least k - 1 + 1/theta."""
    if not theta > 1:
        raise InputError(f"theta must exceed 1, got {theta}")
    threshold = profile.k - 1 + 1.0 / theta
    csum = np.cumsum(profile.scores[profile.order])
    if csum[-1] < threshold - 1e-10:
        raise InvariantViolation(
            f"scores sum to {csum[-1]} < k - 1 + 1/theta = {threshold}"
        )
    hits = np.flatnonzero(csum >= threshold - 1e-12)
    return int(hits[0]) + 1 if hits.size else profile.n_cols


def kept_columns(profile: KLeverageProfile, theta: float) -> np.ndarray:
    """Columns carrying the p_eff(theta) largest scores (sorted)."""
    q = effective_sparsity(profile, theta)
    return np.sort(profile.order[:q])


def rejected_columns(profile: KLeverageProfile, theta: float) -> np.ndarray:
    """Columns a conditioned DPP sample must avoid (sorted)."""
    q = effective_sparsity(profile, theta)
    return np.sort(profile.order[q:])


def elementary_symmetric_all(values, ell: int) -> np.ndarray:
    """Return ``[e_0, ..., e_ell]`` of ``values`` by the one-pass DP recurrence."""
    if ell < 0:
        raise InputError("ell must be >= 0")
    x = np.asarray(values, dtype=np.float64).ravel()
    e = np.zeros(ell + 1)
    e[0] = 1.0
    for i, xi in enumerate(x):
        top = min(i + 1, ell)
        # descending j so e[j-1] still holds the previous column
        e[1 : top + 1] = e[1 : top + 1] + xi * e[0:top]
    return e


def elementary_symmetric(values, ell: int) -> float:
    """The ell-th elementary symmetric polynomial; e_0 = 1, zero past the length."""
    x = np.asarray(values, dtype=np.float64).ravel()
    if ell > x.size:
        if ell < 0:
            raise InputError("ell must be >= 0")
        return 0.0
    return float(elementary_symmetric_all(x, ell)[ell])


def elementary_symmetric_table(values, ell: int) -> np.ndarray:
    """Table ``E[l, n] = e_l(values[:n])`` for l <= ell, n <= len(values)."""
    x = np.asarray(values, dtype=np.float64).ravel()
    E = np.zeros((ell + 1, x.size + 1))
    E[0, :] = 1.0
    for n in range(1, x.size + 1):
        E[1:, n] = E[1:, n - 1] + x[n - 1] * E[:-1, n - 1]
    return E


def spanned_volume(A, q: int) -> float:
    """sqrt(e_q) of the squared singular values of A."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(A, dtype=np.float64)), compute_uv=False)
    r = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    if not 1 <= q <= r:
        raise RankError(f"q={q} outside [1, rank={r}]")
    return float(np.sqrt(elementary_symmetric(s[:r] ** 2, q)))


def column_space_basis(C: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(C), same rank cutoff as the pseudoinverse."""
    if C.shape[1] == 0:
        return np.zeros((C.shape[0], 0))
    U, s, _ = np.linalg.svd(C, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((C.shape[0], 0))
    return U[:, s > RANK_RTOL * s[0]]


def projection_residual_matrix(X, S) -> np.ndarray:
    """``X - C C^+ X`` with ``C = X[:, S]``."""
    Xv = as_data_matrix(X).values
    idx = np.asarray(list(as_selection(S)), dtype=np.intp)
    if idx.size == 0:
        raise InputError("empty selection")
    Q = column_space_basis(Xv[:, idx])
    return Xv - Q @ (Q.T @ Xv)


def frobenius_projection_residual(X, S, norm: str = FROBENIUS) -> float:
    """Norm of the residual after projecting X onto the span of its columns S.

    Returns the norm itself, not its square.
    """
    norm = _check_norm(norm)
    R = projection_residual_matrix(X, S)
    if norm == FROBENIUS:
        return float(np.linalg.norm(R, "fro"))
    return float(np.linalg.norm(R, 2))


def best_rank_k_error(X, k: int, norm: str = FROBENIUS) -> float:
    """Error of the best rank-k approximation (sigma_{k+1}, or the tail's l2 norm)."""
    norm = _check_norm(norm)
    svd = X if isinstance(X, SvdBundle) else as_data_matrix(X).svd
    if k > svd.rank:
        raise RankError(f"k={k} exceeds rank {svd.rank}")
    tail = svd.sigma[k:]
    if norm == SPECTRAL:
        return float(tail[0]) if tail.size else 0.0
    return float(np.sqrt(np.sum(tail**2)))


def _check_orthonormal(M: np.ndarray, name: str, tol: float = 1e-8):
    G = M.T @ M
    if not np.allclose(G, np.eye(M.shape[1]), atol=tol, rtol=0):
        raise InputError(f"{name} does not have orthonormal columns")


def principal_angles(P, Q) -> np.ndarray:
    """Principal angles between range(P) and range(Q), increasing, in radians.

    Both inputs must have orthonormal columns, with Q having no more columns
    than P.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if P.shape[0] != Q.shape[0]:
        raise InputError("P and Q live in different ambient dimensions")
    if Q.shape[1] > P.shape[1]:
        raise InputError("Q must not have more columns than P")
    _check_orthonormal(P, "P")
    _check_orthonormal(Q, "Q")
    cos = np.linalg.svd(Q.T @ P, compute_uv=False)[: Q.shape[1]]
    return np.arccos(np.clip(cos, 0.0, 1.0))


def tangent_trace(V, S, k: int) -> float:
    """``Tr(Z Z^T)`` with ``Z = V_{d-k}^T S (V_k^T S)^{-1}``.

    This equals the sum of squared tangents of the principal angles between
    span(V_k) and the coordinate subspace indexed by S.
    """
    V = np.asarray(V, dtype=np.float64)
    idx = np.asarray(list(as_selection(S)), dtype=np.intp)
    if idx.size != k:
        raise InputError(f"selection has {idx.size} columns, expected k={k}")
    A = V[idx, :k].T
    if abs(np.linalg.det(A)) <= 1e-12:
        raise SingularityError("V_k^T S is singular")
    Z = np.linalg.solve(A.T, V[idx, k:]).T
    return float(np.sum(Z * Z))


def coordinate_basis(S: Iterable[int], d: int) -> np.ndarray:
    """Orthonormal basis (the sampling matrix) of span(e_i, i in S)."""
    return as_selection(tuple(S), n_cols=d).sampling_matrix(d)


def is_majorized(q: Sequence[float], p: Sequence[float], tol: float = 1e-8) -> bool:
    """True when p majorizes q (q is below p in Schur order)."""
    q = np.sort(np.asarray(q, dtype=np.float64))[::-1]
    p = np.sort(np.asarray(p, dtype=np.float64))[::-1]
    n = max(q.size, p.size)
    q = np.pad(q, (0, n - q.size))
    p = np.pad(p, (0, n - p.size))
    cq, cp = np.cumsum(q), np.cumsum(p)
    scale = max(1.0, abs(cp[-1]))
    if abs(cq[-1] - cp[-1]) > tol * scale:
        return False
    return bool(np.all(cq[:-1] <= cp[:-1] + tol * scale))

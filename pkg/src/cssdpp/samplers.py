"""Column selectors, random and deterministic.

Every selector maps a matrix (or its SVD) to a :class:`SubsetSelection`.
The determinantal samplers come in two flavours: a single-draw routine that
follows the chain rule literally, and a vectorized ``*_batch`` routine that
draws many subsets at once for Monte Carlo work. Both consume one uniform
per selected column and invert the conditional CDF, so for the same
generator state they return the same subset up to floating-point ties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (
    CapacityError,
    InputError,
    InvariantViolation,
    RankError,
    RejectionBudgetError,
)
from .linalg import (
    RANK_RTOL,
    DataMatrix,
    KLeverageProfile,
    SubsetSelection,
    SvdBundle,
    as_data_matrix,
    elementary_symmetric_table,
    k_leverage_scores,
    rejected_columns,
)
from .rng import as_generator, inverse_cdf

MIXTURE_MAX_RANK = 30
MIXTURE_MAX_SUBSETS = 2_000_000
DOUBLE_PHASE_RETRIES = 100


def _check_orthonormal_basis(Vk: np.ndarray, tol: float = 1e-8):
    k = Vk.shape[-1]
    G = np.swapaxes(Vk, -1, -2) @ Vk
    if not np.allclose(G, np.eye(k), atol=tol, rtol=0):
        raise InputError("Vk must have orthonormal columns")


def _as_svd(X) -> SvdBundle:
    if isinstance(X, SvdBundle):
        return X
    return as_data_matrix(X).svd


def _as_values(X) -> np.ndarray:
    if isinstance(X, SvdBundle):
        return (X.U * X.sigma) @ X.V.T
    return as_data_matrix(X).values


# ---------------------------------------------------------------- projection DPP


def projection_dpp_sample(Vk, rng=None) -> SubsetSelection:
    """One draw from the projection DPP with kernel ``Vk Vk^T``.

    Picks a row with probability proportional to its squared norm in the
    current basis, then replaces the basis by an orthonormal basis of its
    intersection with the complement of that coordinate.
    """
    W = np.array(Vk, dtype=np.float64)
    if W.ndim != 2:
        raise InputError("Vk must be a d x k matrix")
    _check_orthonormal_basis(W)
    gen = as_generator(rng)
    d, k = W.shape
    picked = []
    for _ in range(k):
        weights = np.einsum("ij,ij->i", W, W)
        weights[picked] = 0.0
        if not weights.sum() > 0:
            raise InvariantViolation("all conditional row norms vanished")
        i = int(inverse_cdf(weights, gen.random()))
        picked.append(i)
        a = W[i].copy()
        # Householder reflection of the columns so only the first one touches row i
        v = a.copy()
        v[0] += math.copysign(np.linalg.norm(a), a[0])
        W = W - np.outer(W @ v, v) * (2.0 / (v @ v))
        W = W[:, 1:]
        W[i] = 0.0
        if W.shape[1]:
            # one re-orthonormalization pass
            W, R = np.linalg.qr(W)
            W[i] = 0.0
    return SubsetSelection(tuple(picked), n_cols=d)


def projection_dpp_sample_batch(Vk, n: int, rng=None) -> np.ndarray:
    """``n`` independent projection-DPP draws, returned as an (n, k) index array.

    ``Vk`` is either one d x k basis or an (n, d, k) stack, one basis per
    draw. The chain rule is run on the kernel through its pivoted Cholesky
    factor, which needs only the kernel columns of the picked rows.
    Rows of the output are sorted.
    """
    Vk = np.asarray(Vk, dtype=np.float64)
    shared = Vk.ndim == 2
    if shared:
        _check_orthonormal_basis(Vk)
        d, k = Vk.shape
        resid = np.broadcast_to(np.einsum("ij,ij->i", Vk, Vk), (n, d)).copy()
    else:
        if Vk.shape[0] != n:
            raise InputError("stacked bases must have one basis per draw")
        _, d, k = Vk.shape
        resid = np.einsum("nij,nij->ni", Vk, Vk)
    gen = as_generator(rng)
    rows = np.arange(n)
    u = gen.random((k, n))
    chosen = np.empty((n, k), dtype=np.intp)
    factors = np.empty((k, n, d))
    for j in range(k):
        w = np.maximum(resid, 0.0)
        if np.any(w.sum(axis=1) <= 0):
            raise InvariantViolation("all conditional row norms vanished")
        idx = inverse_cdf(w, u[j])
        chosen[:, j] = idx
        if shared:
            col = Vk[idx] @ Vk.T
        else:
            col = np.einsum("ndk,nk->nd", Vk, Vk[rows, idx])
        for m in range(j):
            col -= factors[m] * factors[m][rows, idx][:, None]
        pivot = np.sqrt(w[rows, idx])
        factors[j] = col / pivot[:, None]
        resid -= factors[j] ** 2
        resid[rows[:, None], chosen[:, : j + 1]] = 0.0
    chosen.sort(axis=1)
    return chosen


# ---------------------------------------------------------------- volume sampling


def mixture_weights(sigma, k: int):
    """Exact mixture weights over k-subsets T of the r singular directions.

    Returns ``(subsets, weights)`` with subsets in lexicographic order and
    weights proportional to the product of ``sigma_i**2`` over T.
    """
    s2 = np.asarray(sigma, dtype=np.float64) ** 2
    r = s2.size
    if not 1 <= k <= r:
        raise RankError(f"k={k} outside [1, r={r}]")
    if r > MIXTURE_MAX_RANK or math.comb(r, k) > MIXTURE_MAX_SUBSETS:
        raise CapacityError(f"C({r},{k}) mixture components exceed the enumeration cap")
    subsets = np.array(list(combinations(range(r), k)), dtype=np.intp)
    scale = s2 / s2.max()
    w = np.prod(scale[subsets], axis=1)
    total = w.sum()
    if not total > 0:
        raise InvariantViolation("mixture weights vanish")
    return subsets, w / total


def sample_mixture_component(sigma, k: int, rng=None) -> np.ndarray:
    """Draw T from :func:`mixture_weights` by inverse CDF over the enumeration."""
    subsets, w = mixture_weights(sigma, k)
    gen = as_generator(rng)
    return subsets[int(inverse_cdf(w, gen.random()))]


def sample_mixture_component_batch(sigma, k: int, n: int, rng=None) -> np.ndarray:
    """``n`` draws of T by the elementary-symmetric-polynomial recursion.

    Scans directions from last to first and keeps direction i with
    probability ``lam_i e_{m-1}(lam_1..lam_{i-1}) / e_m(lam_1..lam_i)``, where
    m is the number of directions still to pick. Exact for any r, with no
    enumeration.
    """
    s2 = np.asarray(sigma, dtype=np.float64) ** 2
    r = s2.size
    if not 1 <= k <= r or not np.all(s2[:k] > 0):
        raise RankError(f"k={k} exceeds the number of positive singular values")
    lam = s2 / s2.max()
    E = elementary_symmetric_table(lam, k)
    gen = as_generator(rng)
    u = gen.random((r, n))
    remaining = np.full(n, k, dtype=np.intp)
    T = np.empty((n, k), dtype=np.intp)
    for step, i in enumerate(range(r, 0, -1)):
        active = remaining > 0
        m = np.maximum(remaining, 1)
        denom = E[m, i]
        with np.errstate(divide="ignore", invalid="ignore"):
            prob = np.where(denom > 0, lam[i - 1] * E[m - 1, i - 1] / denom, 0.0)
        take = active & ((u[step] < prob) | (remaining >= i))
        T[take, k - remaining[take]] = i - 1
        remaining = remaining - take
    T.sort(axis=1)
    return T


def volume_sampling_sample(X, k: int, rng=None) -> SubsetSelection:
    """One volume-sampling draw: P(S) proportional to det(X_S^T X_S)."""
    svd = _as_svd(X)
    if k > svd.rank:
        raise RankError(f"k={k} exceeds rank {svd.rank}")
    gen = as_generator(rng)
    T = sample_mixture_component_batch(svd.sigma, k, 1, gen)[0]
    return projection_dpp_sample(svd.V[:, T], gen)


def volume_sampling_sample_batch(X, k: int, n: int, rng=None) -> np.ndarray:
    """``n`` volume-sampling draws as an (n, k) array of sorted indices."""
    svd = _as_svd(X)
    if k > svd.rank:
        raise RankError(f"k={k} exceeds rank {svd.rank}")
    gen = as_generator(rng)
    T = sample_mixture_component_batch(svd.sigma, k, n, gen)
    bases = np.transpose(svd.V[:, T], (1, 0, 2))
    return projection_dpp_sample_batch(bases, n, gen)


# ---------------------------------------------------------------- multinomials


def leverage_multinomial_sample(profile: KLeverageProfile, s: int, rng=None) -> SubsetSelection:
    """``s`` i.i.d. draws with probabilities ``scores / k``; repeats are kept."""
    if s < 1:
        raise InputError("s must be >= 1")
    p = np.maximum(profile.scores, 0.0)
    gen = as_generator(rng)
    draws = inverse_cdf(p, gen.random(s))
    return SubsetSelection(tuple(draws), allow_duplicates=True, n_cols=profile.n_cols)


def length_square_sample(X, s: int, rng=None) -> SubsetSelection:
    """``s`` i.i.d. draws with probabilities proportional to squared column norms."""
    if s < 1:
        raise InputError("s must be >= 1")
    Xv = _as_values(X)
    p = np.einsum("ij,ij->j", Xv, Xv)
    if not p.sum() > 0:
        raise InputError("zero matrix")
    gen = as_generator(rng)
    draws = inverse_cdf(p, gen.random(s))
    return SubsetSelection(tuple(draws), allow_duplicates=True, n_cols=Xv.shape[1])


# ---------------------------------------------------------------- deterministic


def largest_leverage_select(profile: KLeverageProfile, k: int) -> SubsetSelection:
    """The k columns with the largest scores, ties to the smallest index."""
    if not 1 <= k <= profile.n_cols:
        raise InputError(f"k={k} outside [1, d={profile.n_cols}]")
    return SubsetSelection(tuple(profile.order[:k]), n_cols=profile.n_cols)


def threshold_select(profile: KLeverageProfile, theta: float) -> SubsetSelection:
    """Top-score columns until their cumulative score first exceeds ``theta``.

    Requires ``0 <= k - theta < 1``. When no head exceeds theta (theta = k),
    all columns with nonzero score are returned.
    """
    k = profile.k
    if not 0 <= k - theta < 1:
        raise InputError(f"need 0 <= k - theta < 1, got k={k}, theta={theta}")
    csum = np.cumsum(profile.scores[profile.order])
    hits = np.flatnonzero(csum > theta + 1e-12)
    c = int(hits[0]) + 1 if hits.size else profile.sparsity_p
    return SubsetSelection(tuple(profile.order[:c]), n_cols=profile.n_cols)


def pivoted_qr_pivots(A, k: int) -> list:
    """First k pivots of Householder QR with greedy column pivoting.

    Column norms are downdated after each step and recomputed from the
    trailing block once the downdated squared norm drops below 1e-6 of its
    original value. Ties go to the smallest column index.
    """
    A = np.array(A, dtype=np.float64)
    m, n = A.shape
    if k > min(m, n):
        raise RankError(f"k={k} exceeds min(shape)={min(m, n)}")
    orig = np.einsum("ij,ij->j", A, A)
    norms = orig.copy()
    ref = orig.copy()
    free = np.ones(n, dtype=bool)
    scale = math.sqrt(orig.max()) if orig.size else 0.0
    pivots = []
    for j in range(k):
        cand = np.where(free, norms, -np.inf)
        p = int(np.argmax(cand))
        if not math.sqrt(max(cand[p], 0.0)) > RANK_RTOL * scale:
            raise RankError(f"matrix has numerical rank {j} < k={k}")
        pivots.append(p)
        free[p] = False
        x = A[j:, p].copy()
        alpha = -math.copysign(np.linalg.norm(x), x[0])
        v = x
        v[0] -= alpha
        vv = v @ v
        if vv > 0:
            A[j:, :] -= np.outer(v, (v @ A[j:, :]) * (2.0 / vv))
        A[j, p] = alpha
        A[j + 1 :, p] = 0.0
        norms = norms - A[j, :] ** 2
        stale = free & (norms < 1e-6 * ref)
        if np.any(stale):
            norms[stale] = np.einsum("ij,ij->j", A[j + 1 :, stale], A[j + 1 :, stale])
            ref[stale] = norms[stale]
    return pivots


def pivoted_qr_select(X, k: int) -> SubsetSelection:
    """First k pivot columns of QR with column pivoting."""
    Xv = _as_values(X)
    return SubsetSelection(tuple(pivoted_qr_pivots(Xv, k)), n_cols=Xv.shape[1])


def double_phase_select(X, k: int, c: int | None = None, rng=None) -> SubsetSelection:
    """Leverage-score preselection of c draws followed by pivoted QR.

    Phase one draws c columns i.i.d. from the k-leverage distribution and
    scales each by ``1/sqrt(c p_i)``; repeated columns are merged into one
    column scaled by ``sqrt(mult/(c p_i))``. Phase two runs pivoted QR on the
    k x c' matrix ``V_k^T S D`` and keeps k pivots.
    """
    svd = _as_svd(X)
    if c is None:
        c = 10 * k
    if c <= k:
        raise InputError(f"c must exceed k, got c={c}, k={k}")
    profile = k_leverage_scores(svd, k)
    Vk = svd.V[:, :k]
    p = profile.scores / k
    gen = as_generator(rng)
    for _ in range(DOUBLE_PHASE_RETRIES):
        draws = inverse_cdf(np.maximum(p, 0.0), gen.random(c))
        cols, mult = np.unique(draws, return_counts=True)
        if cols.size < k:
            continue
        scaling = np.sqrt(mult / (c * p[cols]))
        reduced = Vk[cols].T * scaling
        try:
            piv = pivoted_qr_pivots(reduced, k)
        except RankError:
            continue
        return SubsetSelection(tuple(cols[piv]), n_cols=svd.n_cols)
    raise RankError(f"phase one produced fewer than k={k} usable columns in "
                    f"{DOUBLE_PHASE_RETRIES} attempts")


# ---------------------------------------------------------------- rejection DPP


def _rejection_budget(theta: float) -> int:
    return int(math.ceil(100 * theta))


def rejection_dpp_sample(Vk, profile: KLeverageProfile, theta: float, rng=None):
    """Projection-DPP draw conditioned to avoid the low-score columns.

    Redraws until the sample contains no column outside the p_eff(theta)
    largest scores. Returns ``(selection, attempts)``.
    """
    if not theta > 1:
        raise InputError(f"theta must exceed 1, got {theta}")
    avoid = np.zeros(profile.n_cols, dtype=bool)
    avoid[rejected_columns(profile, theta)] = True
    gen = as_generator(rng)
    budget = _rejection_budget(theta)
    for attempt in range(1, budget + 1):
        S = projection_dpp_sample(Vk, gen)
        if not np.any(avoid[S.as_array()]):
            return S, attempt
    raise RejectionBudgetError(f"no accepted draw within {budget} attempts (theta={theta})")


def rejection_dpp_sample_batch(Vk, profile: KLeverageProfile, theta: float, n: int, rng=None):
    """``n`` conditioned draws; returns ``(indices (n, k), attempts (n,))``.

    Proposals are drawn in blocks and scanned in order, so attempt counts are
    those of n consecutive sequential rejection loops.
    """
    if not theta > 1:
        raise InputError(f"theta must exceed 1, got {theta}")
    avoid = np.zeros(profile.n_cols, dtype=bool)
    avoid[rejected_columns(profile, theta)] = True
    gen = as_generator(rng)
    budget = _rejection_budget(theta)
    accepted, attempts = [], []
    got, gap = 0, 0
    while got < n:
        block = max(64, int(math.ceil((n - got) * theta * 1.2)))
        draws = projection_dpp_sample_batch(Vk, block, gen)
        pos = np.flatnonzero(~np.any(avoid[draws], axis=1))
        if pos.size:
            counts = np.diff(np.concatenate(([-1], pos)))
            counts[0] += gap
            gap = block - 1 - pos[-1]
            accepted.append(draws[pos])
            attempts.append(counts)
            got += pos.size
            if counts.max() > budget:
                break
        else:
            gap += block
        if gap >= budget:
            break
    if got < n or max(a.max() for a in attempts) > budget:
        raise RejectionBudgetError(f"no accepted draw within {budget} attempts (theta={theta})")
    return np.concatenate(accepted)[:n], np.concatenate(attempts)[:n]


# ---------------------------------------------------------------- dispatcher


SELECTOR_NAMES = (
    "dpp",
    "vs",
    "leverage",
    "length-square",
    "largest-leverage",
    "threshold",
    "pivoted-qr",
    "double-phase",
    "rejection-dpp",
)
RANDOMIZED = {"dpp", "vs", "leverage", "length-square", "double-phase", "rejection-dpp"}


@dataclass(frozen=True)
class SelectorKind:
    """A selector name with its parameter.

    ``s`` is the number of multinomial draws, ``theta`` the threshold or
    rejection parameter, ``c`` the double-phase preselection size.
    """

    name: str
    s: int | None = None
    theta: float | None = None
    c: int | None = None

    def __post_init__(self):
        if self.name not in SELECTOR_NAMES:
            raise InputError(f"unknown selector {self.name!r}; choose from {SELECTOR_NAMES}")

    @property
    def randomized(self) -> bool:
        return self.name in RANDOMIZED

    def validate(self, k: int):
        if self.s is not None and self.s < k:
            raise InputError(f"s={self.s} must be >= k={k}")
        if self.c is not None and self.c <= k:
            raise InputError(f"c={self.c} must exceed k={k}")
        if self.name == "rejection-dpp" and self.theta is not None and not self.theta > 1:
            raise InputError(f"theta={self.theta} must exceed 1")


def _kind(kind) -> SelectorKind:
    return kind if isinstance(kind, SelectorKind) else SelectorKind(str(kind))


def select(X, k: int, kind="dpp", rng=None) -> SubsetSelection:
    """Run one selector on X (a matrix, DataMatrix or SvdBundle)."""
    kind = _kind(kind)
    kind.validate(k)
    name = kind.name
    gen = as_generator(rng) if kind.randomized else None
    if name == "pivoted-qr":
        return pivoted_qr_select(X, k)
    if name == "length-square":
        return length_square_sample(X, kind.s or k, gen)
    if name == "vs":
        return volume_sampling_sample(X, k, gen)
    if name == "double-phase":
        return double_phase_select(X, k, kind.c, gen)
    svd = _as_svd(X)
    profile = k_leverage_scores(svd, k)
    if name == "dpp":
        return projection_dpp_sample(svd.V[:, :k], gen)
    if name == "leverage":
        return leverage_multinomial_sample(profile, kind.s or k, gen)
    if name == "largest-leverage":
        return largest_leverage_select(profile, k)
    if name == "threshold":
        theta = kind.theta if kind.theta is not None else k - 0.5
        return threshold_select(profile, theta)
    if name == "rejection-dpp":
        theta = kind.theta if kind.theta is not None else 2.0
        return rejection_dpp_sample(svd.V[:, :k], profile, theta, gen)[0]
    raise AssertionError(name)


def select_many(X, k: int, kind, n: int, rng=None) -> list:
    """``n`` independent selections; vectorized for the determinantal samplers."""
    kind = _kind(kind)
    kind.validate(k)
    gen = as_generator(rng)
    svd = _as_svd(X)
    d = svd.n_cols
    if kind.name == "dpp":
        arr = projection_dpp_sample_batch(svd.V[:, :k], n, gen)
    elif kind.name == "vs":
        arr = volume_sampling_sample_batch(svd, k, n, gen)
    elif kind.name == "rejection-dpp":
        theta = kind.theta if kind.theta is not None else 2.0
        profile = k_leverage_scores(svd, k)
        arr = rejection_dpp_sample_batch(svd.V[:, :k], profile, theta, n, gen)[0]
    else:
        src = X if isinstance(X, (DataMatrix, np.ndarray)) else svd
        return [select(src, k, kind, gen) for _ in range(n)]
    return [SubsetSelection(tuple(row), n_cols=d) for row in arr]

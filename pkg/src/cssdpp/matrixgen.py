"""Random matrices with prescribed spectrum and k-leverage scores.

The pipeline is: draw a leverage profile, draw a random interlacing
sequence of partial spectra (eigensteps) compatible with it, build a frame
F (k x d) realizing those eigensteps, take ``V_k = F^T``, complete it to an
orthogonal V and multiply by a Haar-distributed U and the singular values.
A deterministic alternative based on Givens rotations is also provided.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputError
from .linalg import DataMatrix, is_majorized
from .rng import as_generator

SUM_TOL = 1e-8
# values closer than this are treated as the same eigenvalue
ROOT_MATCH_TOL = 1e-9
INTERVAL_SLACK = 1e-9
NEGATIVE_WEIGHT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LeverageTarget:
    """Target column norms (k-leverage scores when the spectrum is all ones)."""

    scores: np.ndarray
    sorted_decreasing: bool = True

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if np.any(s < 0):
            raise InputError("negative target score")
        if self.sorted_decreasing and np.any(np.diff(s) > 0):
            raise InputError("scores flagged as sorted but are not decreasing")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def sparsity(self) -> int:
        return int(np.sum(self.scores >= 1e-12))


@dataclass(frozen=True, eq=False)
class EigenstepMatrix:
    """Partial spectra of a frame.

    ``values[i, r-1]`` is the i-th largest eigenvalue of
    ``C_r = sum_{j <= r} f_j f_j^T`` for r = 1..d; entries with i >= r are 0.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InputError("eigensteps must be a k x d array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, r: int) -> np.ndarray:
        """Spectrum of C_r (r = 0..d), decreasing."""
        if r == 0:
            return np.zeros(self.k)
        return self.values[:, r - 1]

    def violations(self, ell=None, sigma_sq=None, tol: float = 1e-9) -> list:
        """Human-readable list of broken constraints (empty when valid)."""
        out = []
        k, d = self.k, self.d
        scale = max(1.0, float(np.abs(self.values).max()))
        t = tol * scale
        for r in range(1, d + 1):
            lam = self.column(r)
            prev = self.column(r - 1)
            if np.any(lam < -t):
                out.append(f"negative eigenvalue at step {r}")
            if np.any(np.diff(lam) > t):
                out.append(f"step {r} is not sorted")
            if np.any(lam[r:] > t):
                out.append(f"step {r} has more than {r} nonzero eigenvalues")
            # prev interlaces lam: lam[i+1] <= prev[i] <= lam[i]
            if np.any(prev > lam + t) or np.any(prev[:-1] < lam[1:] - t):
                out.append(f"steps {r - 1} and {r} do not interlace")
            if ell is not None:
                target = float(np.sum(np.asarray(ell)[:r]))
                if abs(lam.sum() - target) > t:
                    out.append(f"trace of step {r} is {lam.sum()}, expected {target}")
        if sigma_sq is not None:
            if not np.allclose(self.column(d), np.sort(sigma_sq)[::-1], atol=t, rtol=0):
                out.append("last step differs from the target spectrum")
        return out

    def is_valid(self, ell=None, sigma_sq=None, tol: float = 1e-9) -> bool:
        return not self.violations(ell, sigma_sq, tol)


# ---------------------------------------------------------------- feasibility


def _padded(sigma_sq, d: int) -> np.ndarray:
    s = np.zeros(d)
    v = np.asarray(sigma_sq, dtype=np.float64).ravel()
    if v.size > d:
        raise InputError("more spectrum values than columns")
    s[: v.size] = v
    return s


def majorization_report(ell, sigma_sq):
    """``(feasible, reason)`` for prescribed column norms and spectrum."""
    ell = np.asarray(ell, dtype=np.float64).ravel()
    s2 = np.asarray(sigma_sq, dtype=np.float64).ravel()
    if np.any(ell < 0) or np.any(s2 < 0):
        return False, "negative entries"
    if s2.size > ell.size:
        return False, "more spectrum values than columns"
    if abs(ell.sum() - s2.sum()) > SUM_TOL * max(1.0, s2.sum()):
        return False, f"sums differ: {ell.sum()} vs {s2.sum()}"
    if not is_majorized(ell, _padded(s2, ell.size), tol=1e-10):
        return False, "spectrum does not majorize the column norms"
    return True, ""


def check_majorization(ell, sigma_sq) -> bool:
    """True iff the zero-padded spectrum majorizes the target column norms."""
    return majorization_report(ell, sigma_sq)[0]


def _require_feasible(ell, sigma_sq):
    ok, reason = majorization_report(ell, sigma_sq)
    if not ok:
        raise InfeasibleError(reason)


# ---------------------------------------------------------------- eigensteps


def _eigenstep_interval(lam_next, lam_cur, i, r, ell):
    """Admissible interval for the i-th eigenvalue of C_r (0-based i, 1-based r).

    ``lam_next`` is the spectrum of C_{r+1} (with a trailing 0 appended),
    ``lam_cur`` holds the already chosen entries i+1..k-1 of C_r, and ``ell``
    is decreasing. ``csum[j]`` is the sum of the first j targets.
    """
    k = lam_cur.size
    tail_cur = lam_cur[i + 1 :].sum()
    lower = max(lam_next[i + 1], lam_next[i:k].sum() - tail_cur - ell[r])
    upper = lam_next[i]
    csum = np.concatenate(([0.0], np.cumsum(ell)))
    for z in range(i + 1):
        # 1-based z' = z + 1: sum_{t=z'}^{r} ell_t - sum_{t=z'+1}^{i'} lam_next_t - tail_cur
        head = csum[r] - csum[z] if z < r else 0.0
        upper = min(upper, head - lam_next[z + 1 : i + 1].sum() - tail_cur)
    return lower, upper


def random_eigensteps(ell, sigma_sq, rng=None) -> EigenstepMatrix:
    """Uniform choice inside each admissible interval, from the last step down.

    ``ell`` must be sorted in decreasing order. Empty intervals within
    ``INTERVAL_SLACK`` (relative to the largest eigenvalue) collapse to
    their midpoint; wider gaps raise :class:`InfeasibleError`.
    """
    ell = np.asarray(ell, dtype=np.float64).ravel()
    s2 = np.sort(np.asarray(sigma_sq, dtype=np.float64).ravel())[::-1]
    if np.any(np.diff(ell) > 0):
        raise InputError("ell must be sorted in decreasing order")
    _require_feasible(ell, s2)
    d, k = ell.size, s2.size
    if k > d:
        raise InputError("k must not exceed d")
    gen = as_generator(rng)
    scale = max(1.0, float(s2.max()))
    lam = np.zeros((k, d))
    lam[:, d - 1] = s2
    for r in range(d - 1, 0, -1):
        nxt = np.append(lam[:, r], 0.0)
        cur = np.zeros(k)
        for i in range(k - 1, -1, -1):
            lo, hi = _eigenstep_interval(nxt, cur, i, r, ell)
            if lo > hi:
                if lo - hi > INTERVAL_SLACK * scale:
                    raise InfeasibleError(
                        f"empty eigenstep interval at step {r}, index {i}: [{lo}, {hi}]"
                    )
                val = 0.5 * (lo + hi)
            else:
                val = lo + (hi - lo) * gen.random()
            cur[i] = max(val, 0.0)
        lam[:, r - 1] = cur
    return EigenstepMatrix(lam)


def compute_eigensteps(F) -> EigenstepMatrix:
    """Spectra of the partial Gram matrices of the columns of F (k x d)."""
    F = np.asarray(F, dtype=np.float64)
    k, d = F.shape
    out = np.zeros((k, d))
    C = np.zeros((k, k))
    for r in range(d):
        C += np.outer(F[:, r], F[:, r])
        out[:, r] = np.linalg.eigvalsh(C)[::-1]
    return EigenstepMatrix(out)


# ---------------------------------------------------------------- reconstruction


def _cancel_common(a: np.ndarray, b: np.ndarray, tol: float):
    """Multiset difference: drop values present in both (within tol)."""
    a_left = list(a)
    b_left = []
    for x in b:
        for j, y in enumerate(a_left):
            if abs(x - y) <= tol:
                del a_left[j]
                break
        else:
            b_left.append(x)
    return np.array(a_left), np.array(b_left)


def _random_unit(dim: int, gen: np.random.Generator) -> np.ndarray:
    v = gen.standard_normal(dim)
    return v / np.linalg.norm(v)


def reconstruct_frame(steps: EigenstepMatrix, ell, rng=None, renormalize: bool = True) -> np.ndarray:
    """Build a k x d frame whose partial spectra are ``steps``.

    ``f_1`` is a uniformly random vector of norm ``sqrt(ell_1)``. Each next
    column is split across the eigenspaces of the current partial Gram
    matrix, with squared projections given by the residues of the ratio of
    consecutive characteristic polynomials; within each eigenspace the
    direction is uniformly random (a random sign for 1-dimensional ones).
    """
    ell = np.asarray(ell, dtype=np.float64).ravel()
    k, d = steps.k, steps.d
    if ell.size != d:
        raise InputError("ell length must match the number of steps")
    gen = as_generator(rng)
    scale = max(1.0, float(np.abs(steps.values).max()))
    tol = ROOT_MATCH_TOL * scale
    F = np.zeros((k, d))
    F[:, 0] = math.sqrt(max(ell[0], 0.0)) * _random_unit(k, gen)
    C = np.outer(F[:, 0], F[:, 0])
    for r in range(1, d):
        cur = steps.column(r)
        nxt = steps.column(r + 1)
        _, vecs = np.linalg.eigh(C)
        vecs = vecs[:, ::-1]  # aligned with the decreasing target spectrum
        I, J = _cancel_common(cur, nxt, tol)
        f = np.zeros(k)
        for lam in I:
            num = np.prod(lam - J)
            others = I[np.abs(I - lam) > tol]
            den = np.prod(lam - others)
            w = -num / den
            if w < -NEGATIVE_WEIGHT_TOL * scale:
                raise InfeasibleError(f"negative eigenspace weight {w} at step {r}")
            w = max(w, 0.0)
            block = vecs[:, np.abs(cur - lam) <= tol]
            f += math.sqrt(w) * (block @ _random_unit(block.shape[1], gen))
        if renormalize:
            norm = np.linalg.norm(f)
            target = math.sqrt(max(ell[r], 0.0))
            if norm > 0:
                f *= target / norm
        F[:, r] = f
        C += np.outer(f, f)
    return F


# ---------------------------------------------------------------- Givens construction


def _rotation_angle(a, b, g, t):
    """Angle setting ``||c f_i - s f_j||^2 = t`` given the 2x2 Gram (a, g; g, b)."""
    half = 0.5 * (a - b)
    R = math.hypot(half, g)
    if R == 0.0:
        return 0.0
    val = (t - 0.5 * (a + b)) / R
    val = min(1.0, max(-1.0, val))
    phi = math.atan2(g, half)
    return 0.5 * (math.acos(val) - phi)


def givens_frame(ell, sigma) -> np.ndarray:
    """Deterministic frame with column norms ``ell`` and singular values ``sigma``.

    Starts from ``[diag(sigma) | 0]``. Targets are served from largest to
    smallest: the two free columns whose norms bracket the target are
    rotated in their plane so the larger one takes the target norm exactly,
    then that column is frozen. Bracketing columns always exist while the
    remaining norms majorize the remaining targets, and this property is
    preserved by each step. Columns are finally placed at their target
    positions.
    """
    ell = np.asarray(ell, dtype=np.float64).ravel()
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    k, d = sigma.size, ell.size
    _require_feasible(ell, sigma**2)
    W = np.zeros((k, d))
    W[:, :k] = np.diag(sigma)
    tol = 1e-12 * max(1.0, float(sigma.max() ** 2))
    free = list(range(d))
    out = np.zeros((k, d))
    targets = np.argsort(-ell, kind="stable")
    for pos in targets[:-1]:
        t = ell[pos]
        norms = {c: float(W[:, c] @ W[:, c]) for c in free}
        exact = [c for c in free if abs(norms[c] - t) <= tol]
        if exact:
            chosen = exact[0]
        else:
            above = [c for c in free if norms[c] > t]
            below = [c for c in free if norms[c] < t]
            if not above or not below:
                raise InfeasibleError("no pair of columns brackets the next target norm")
            i = min(above, key=lambda c: (norms[c], c))
            j = max(below, key=lambda c: (norms[c], -c))
            a, b = norms[i], norms[j]
            g = float(W[:, i] @ W[:, j])
            th = _rotation_angle(a, b, g, t)
            c_, s_ = math.cos(th), math.sin(th)
            fi, fj = W[:, i].copy(), W[:, j].copy()
            W[:, i] = c_ * fi - s_ * fj
            W[:, j] = s_ * fi + c_ * fj
            chosen = i
        out[:, pos] = W[:, chosen]
        free.remove(chosen)
    out[:, targets[-1]] = W[:, free[0]]
    return out


# ---------------------------------------------------------------- full generator


def haar_stiefel(n: int, m: int, rng=None) -> np.ndarray:
    """n x m matrix with orthonormal columns, Haar distributed (n >= m)."""
    gen = as_generator(rng)
    Q, R = np.linalg.qr(gen.standard_normal((n, m)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def complete_orthonormal(Vk: np.ndarray, rng=None) -> np.ndarray:
    """Extend d x k orthonormal columns to a d x d orthogonal matrix.

    Gaussian vectors are orthogonalized by classical Gram-Schmidt run twice.
    """
    gen = as_generator(rng)
    d, k = Vk.shape
    V = np.zeros((d, d))
    V[:, :k] = Vk
    for j in range(k, d):
        v = gen.standard_normal(d)
        for _ in range(2):
            v -= V[:, :j] @ (V[:, :j].T @ v)
        V[:, j] = v / np.linalg.norm(v)
    return V


def random_frame(ell, sigma_sq, rng=None) -> np.ndarray:
    """Random k x d frame with column norms ``ell`` and Gram spectrum ``sigma_sq``.

    ``ell`` may be in any order; it is sorted internally and the columns are
    put back in the caller's order.
    """
    ell = np.asarray(ell, dtype=np.float64).ravel()
    gen = as_generator(rng)
    order = np.argsort(-ell, kind="stable")
    steps = random_eigensteps(ell[order], sigma_sq, gen)
    F_sorted = reconstruct_frame(steps, ell[order], gen)
    F = np.empty_like(F_sorted)
    F[:, order] = F_sorted
    return F


def matrix_generator(ell, sigma_diag, N: int, rng=None, return_factors: bool = False):
    """Random N x d matrix with singular values ``sigma_diag`` and k-leverage ``ell``.

    k is the sum of ``ell``. The leverage scores of the output match ``ell``
    whenever ``sigma_k > sigma_{k+1}``.
    """
    ell = np.asarray(ell, dtype=np.float64).ravel()
    sigma = np.asarray(sigma_diag, dtype=np.float64).ravel()
    d = ell.size
    if sigma.size != d:
        raise InputError("need one singular value per column")
    if N < d:
        raise InputError(f"N={N} must be at least d={d}")
    k = int(round(ell.sum()))
    if abs(ell.sum() - k) > SUM_TOL or not 1 <= k <= d:
        raise InfeasibleError(f"leverage scores sum to {ell.sum()}, not an integer k in [1, d]")
    gen = as_generator(rng)
    U = haar_stiefel(N, d, gen)
    Vk = random_frame(ell, np.ones(k), gen).T
    V = complete_orthonormal(Vk, gen)
    X = (U * sigma) @ V.T
    if return_factors:
        return DataMatrix(X), U, V
    return DataMatrix(X)


def _cap_redistribute(x: np.ndarray, max_passes: int):
    """Clip at 1 and spread the excess proportionally; None if still over after max_passes."""
    x = x.copy()
    for _ in range(max_passes):
        over = x > 1.0
        if not np.any(over):
            return x
        excess = np.sum(x[over] - 1.0)
        x[over] = 1.0
        free = x < 1.0
        x[free] += excess * x[free] / x[free].sum()
    return None if np.any(x > 1.0 + 1e-12) else np.minimum(x, 1.0)


def dirichlet_leverage_profile(k: int, p: int, d: int, rng=None, method: str = "reject",
                               max_passes: int = 20, max_draws: int = 2_000_000) -> LeverageTarget:
    """Random leverage profile with exactly p nonzero scores, sorted decreasing.

    The p scores are k times a flat Dirichlet draw, which may exceed 1.
    ``method="reject"`` redraws until every score is at most 1, i.e. samples
    the Dirichlet conditioned on the cap. ``method="redistribute"`` clips at
    1 and spreads the excess over the other scores in proportion to their
    values, redrawing if ``max_passes`` passes do not suffice; it leaves
    scores exactly equal to 1, i.e. columns every DPP sample contains. The
    rejection route falls back to redistribution after ``max_draws``
    proposals.
    """
    if not 1 <= k <= p <= d:
        raise InfeasibleError(f"need 1 <= k <= p <= d, got k={k}, p={p}, d={d}")
    if method not in ("reject", "redistribute"):
        raise InputError(f"unknown capping method {method!r}")
    gen = as_generator(rng)
    out = np.zeros(d)
    if p == k:
        out[:k] = 1.0
        return LeverageTarget(out)
    x = None
    if method == "reject":
        drawn = 0
        while drawn < max_draws and x is None:
            e = gen.standard_exponential((4096, p))
            cand = k * e / e.sum(axis=1, keepdims=True)
            ok = np.flatnonzero(np.all(cand <= 1.0, axis=1))
            drawn += 4096
            if ok.size:
                x = cand[ok[0]]
    while x is None:
        e = gen.standard_exponential(p)
        x = _cap_redistribute(k * e / e.sum(), max_passes)
    out[:p] = np.sort(x)[::-1]
    return LeverageTarget(out)


# ---------------------------------------------------------------- toy spectra


TOY_D = 20
TOY_N = 100


def _toy(head, d=TOY_D):
    s = np.full(d, 0.1)
    s[: len(head)] = head
    return s


TOY_SPECTRA = {
    "proj3": (_toy([100.0] * 3), 3),
    "proj5": (_toy([100.0] * 5), 5),
    "smooth3": (_toy([100.0, 10.0, 1.0]), 3),
    "smooth5": (_toy([10000.0, 1000.0, 100.0, 10.0, 1.0]), 5),
    "identity": (np.ones(TOY_D), None),
}


def toy_spectrum(name: str):
    """``(singular_values, k)`` of a named toy spectrum; k is None for identity."""
    try:
        s, k = TOY_SPECTRA[name]
    except KeyError:
        raise InputError(f"unknown toy spectrum {name!r}; choose from {sorted(TOY_SPECTRA)}") from None
    return s.copy(), k


def toy_matrix(name: str, p: int, rng=None, k: int | None = None, N: int = TOY_N,
               method: str = "reject"):
    """Toy matrix with a named spectrum and a random p-sparse leverage profile.

    Returns ``(X, profile)`` where ``profile`` is the target leverage vector.
    """
    sigma, k_default = toy_spectrum(name)
    k = k if k is not None else k_default
    if k is None:
        raise InputError("the identity spectrum needs an explicit k")
    gen = as_generator(rng)
    target = dirichlet_leverage_profile(k, p, sigma.size, gen, method=method)
    X = matrix_generator(target.scores, sigma, N, gen)
    return X, target.scores

"""Linear regression restricted to selected columns, and its excess risk."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import excess_risk_bounds
from .errors import InputError
from .linalg import (
    RANK_RTOL,
    DataMatrix,
    as_data_matrix,
    as_selection,
    coordinate_basis,
    principal_angles,
)
from .rng import RngState, as_generator
from .samplers import SelectorKind, select


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    """Synthetic problem ``y = X w* + noise`` with i.i.d. N(0, v) noise."""

    X: DataMatrix
    w_star: np.ndarray
    noise_variance: float

    def __post_init__(self):
        X = as_data_matrix(self.X)
        w = np.asarray(self.w_star, dtype=np.float64).ravel()
        if w.size != X.n_cols:
            raise InputError("w_star must have one entry per column")
        if self.noise_variance < 0:
            raise InputError("noise variance must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "w_star", w)

    @property
    def N(self) -> int:
        return self.X.n_rows

    @property
    def signal(self) -> np.ndarray:
        return self.X.values @ self.w_star

    def draw_response(self, rng=None) -> np.ndarray:
        gen = as_generator(rng)
        noise = gen.standard_normal(self.N) * math.sqrt(self.noise_variance)
        return self.signal + noise

    def excess_risk(self, w) -> float:
        r = self.X.values @ (self.w_star - np.asarray(w, dtype=np.float64))
        return float(r @ r) / self.N


def sparse_ols(X, y, S) -> np.ndarray:
    """Least squares on the columns S; all other coefficients are exactly zero."""
    Xv = as_data_matrix(X).values
    idx = np.asarray(as_selection(S).distinct, dtype=np.intp)
    if idx.size == 0:
        raise InputError("empty selection")
    w = np.zeros(Xv.shape[1])
    w[idx] = np.linalg.pinv(Xv[:, idx], rcond=RANK_RTOL) @ np.asarray(y, dtype=np.float64)
    return w


def _selector_fn(selector, X, k):
    if selector == "ols":
        full = tuple(range(X.n_cols))
        return lambda gen: full
    if isinstance(selector, (str, SelectorKind)):
        if k is None:
            raise InputError("k is required when the selector is given by name")
        return lambda gen: select(X, k, selector, gen)
    if callable(selector):
        return selector
    raise InputError(f"unsupported selector {selector!r}")


def excess_risk_mc(problem: RegressionProblem, selector, trials: int, rng=None, k: int | None = None):
    """Monte Carlo estimate of the excess risk; returns ``(mean, stderr)``.

    ``selector`` is ``"ols"`` (all columns), a selector name or
    :class:`SelectorKind` (then ``k`` is required), or a callable taking a
    numpy Generator and returning the selected columns. Each trial draws
    fresh noise and a fresh subset. With an :class:`RngState`, trial t uses
    substream t, so results do not depend on how trials are scheduled.
    """
    if trials < 2:
        raise InputError("need at least 2 trials")
    choose = _selector_fn(selector, problem.X, k)
    risks = np.empty(trials)
    shared = None if isinstance(rng, RngState) else as_generator(rng)
    for t in range(trials):
        gen = rng.substream(t).generator() if shared is None else shared
        y = problem.draw_response(gen)
        S = choose(gen)
        risks[t] = problem.excess_risk(sparse_ols(problem.X, y, S))
    return float(risks.mean()), float(risks.std(ddof=1) / math.sqrt(trials))


def max_tan_sq(X, S, k: int) -> float:
    """Largest squared tangent of the principal angles between span(e_S) and span(V_k)."""
    X = as_data_matrix(X)
    Vk = X.svd.V[:, :k]
    idx = as_selection(S).distinct
    if len(idx) < k:
        return math.inf
    angles = principal_angles(coordinate_basis(idx, X.n_cols), Vk)
    cos_min = math.cos(float(angles.max()))
    if cos_min <= 1e-15:
        return math.inf
    return 1.0 / cos_min**2 - 1.0


def css_risk_bound_for_subset(X, S, w_star, v: float, k: int) -> float:
    """Risk bound for sparse OLS on a fixed subset S of size k."""
    X = as_data_matrix(X)
    sig = X.svd.full_sigma()
    sigma_next = float(sig[k]) if k < sig.size else 0.0
    return excess_risk_bounds(
        "css_subset",
        k=k,
        N=X.n_rows,
        v=v,
        w_norm=float(np.linalg.norm(w_star)),
        sigma_next=sigma_next,
        max_tan_sq=max_tan_sq(X, S, k),
    )

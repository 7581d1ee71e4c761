"""Closed-form approximation and excess-risk bounds.

Approximation bounds are returned as factors multiplying the squared error
of the best rank-k approximation; :class:`BoundReport` packages a factor
with that error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InputError
from .linalg import FROBENIUS, SPECTRAL, _check_norm


@dataclass(frozen=True)
class BoundReport:
    """One bound evaluated on one matrix, in the squared-norm convention."""

    selector: str
    norm: str
    bound_factor: float
    pca_error_sq: float
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound_factor < 1 - 1e-12:
            raise InputError(f"bound factor {self.bound_factor} below 1")

    @property
    def bound_value(self) -> float:
        return self.bound_factor * self.pca_error_sq


def vs_bound(k: int, d: int, norm: str = FROBENIUS) -> float:
    """Volume-sampling factor: k+1 (Frobenius) or (d-k)(k+1) (spectral).

    The spectral factor multiplies the squared Frobenius PCA error.
    """
    norm = _check_norm(norm)
    if not 1 <= k < d:
        raise InputError(f"need 1 <= k < d, got k={k}, d={d}")
    return float(k + 1) if norm == FROBENIUS else float((d - k) * (k + 1))


def dpp_generic_bound(k: int, d: int) -> float:
    """Projection-DPP factor k(d+1-k), valid in both norms."""
    if not 1 <= k <= d:
        raise InputError(f"need 1 <= k <= d, got k={k}, d={d}")
    return float(k * (d + 1 - k))


def dpp_sparse_bounds(k: int, d: int, p: int, beta: float, stated_spectral: bool = False):
    """Sparsity-aware projection-DPP factors ``(spectral, frobenius)``.

    Frobenius is ``1 + beta k (p-k)/(d-k)``. Spectral is ``k(p-k+1)``, the
    value the derivation actually reaches; it is also the theta -> 1 limit
    of the conditioned bound. The shorter form ``k(p-k)`` is available with
    ``stated_spectral=True`` but is not a valid bound when p = k (it is 0
    while the error is at least sigma_{k+1}^2).
    """
    if not 1 <= k <= p <= d:
        raise InputError(f"need 1 <= k <= p <= d, got k={k}, p={p}, d={d}")
    if k == d:
        return float(k), 1.0
    if not 1 - 1e-9 <= beta <= d - k + 1e-9:
        raise InputError(f"beta={beta} outside [1, d-k]")
    spectral = float(k * (p - k)) if stated_spectral else float(k * (p - k + 1))
    frobenius = 1.0 + beta * k * (p - k) / (d - k)
    return spectral, frobenius


def dpp_peff_bounds(k: int, d: int, p_eff: int, theta: float, beta: float):
    """Factors for the DPP conditioned on avoiding the low-score columns.

    Returns ``(spectral, frobenius, accept_prob_lb)`` with spectral
    ``(p_eff-k+1)(k-1+theta)``, Frobenius
    ``1 + beta (p_eff+1-k)(k-1+theta)/(d-k)`` and acceptance lower bound
    ``1/theta``.
    """
    if not theta > 1:
        raise InputError(f"theta must exceed 1, got {theta}")
    if not k <= p_eff <= d:
        raise InputError(f"need k <= p_eff <= d, got p_eff={p_eff}")
    if not k < d:
        raise InputError("need k < d")
    spectral = (p_eff - k + 1) * (k - 1 + theta)
    frobenius = 1.0 + beta * (p_eff + 1 - k) * (k - 1 + theta) / (d - k)
    return float(spectral), float(frobenius), 1.0 / theta


RISK_KINDS = ("css_subset", "dpp", "dpp_conditional", "pcr", "ols")


def excess_risk_bounds(kind: str, **params) -> float:
    """Upper bound (or exact value, for OLS) on the excess prediction risk.

    Parameters by kind
    ------------------
    css_subset : k, N, v, w_norm, sigma_next, max_tan_sq
    dpp : k, p, N, v, w_norm, sigma_next
    dpp_conditional : k, p_eff, theta, N, v, w_norm, sigma_next
    pcr : k, N, v, w_norm, sigma_next
    ols : v, rank, N

    ``sigma_next`` is the (k+1)-th singular value and ``w_norm`` the norm of
    the true coefficient vector.
    """
    if kind not in RISK_KINDS:
        raise InputError(f"unknown risk bound {kind!r}; choose from {RISK_KINDS}")
    try:
        N = params["N"]
        v = params["v"]
        if kind == "ols":
            return v * params["rank"] / N
        k = params["k"]
        bias = params["w_norm"] ** 2 * params["sigma_next"] ** 2 / N
        variance = v * k / N
        if kind == "pcr":
            factor = 1.0
        elif kind == "css_subset":
            factor = 1.0 + params["max_tan_sq"]
        elif kind == "dpp":
            factor = 1.0 + k * (params["p"] - k)
        else:
            factor = 1.0 + (k - 1 + params["theta"]) * (params["p_eff"] - k + 1)
    except KeyError as exc:
        raise InputError(f"missing parameter {exc.args[0]!r} for risk bound {kind!r}") from None
    return factor * bias + variance


def drmamu_sample_size(k: int, eps: float, delta: float) -> int:
    """Number of leverage-score draws ``ceil(4000 k^2 / eps^2 log(1/delta))``.

    A 1e-9 slack absorbs rounding so that exact integers are not bumped up.
    """
    if not (eps > 0 and 0 < delta <= 1):
        raise InputError("need eps > 0 and 0 < delta <= 1")
    x = 4000.0 * k * k / eps**2 * math.log(1.0 / delta)
    return max(0, int(math.ceil(x - 1e-9)))


def report(selector: str, norm: str, factor: float, pca_error_sq: float, **inputs) -> BoundReport:
    """Wrap a factor into a :class:`BoundReport`; factors below 1 are lifted to 1."""
    norm = _check_norm(norm)
    return BoundReport(selector, norm, max(1.0, float(factor)), float(pca_error_sq), dict(inputs))


__all__ = [
    "BoundReport",
    "FROBENIUS",
    "SPECTRAL",
    "dpp_generic_bound",
    "dpp_peff_bounds",
    "dpp_sparse_bounds",
    "drmamu_sample_size",
    "excess_risk_bounds",
    "report",
    "vs_bound",
]

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssdpp.bounds import (
    BoundReport,
    dpp_generic_bound,
    dpp_peff_bounds,
    dpp_sparse_bounds,
    drmamu_sample_size,
    excess_risk_bounds,
    report,
    vs_bound,
)
from cssdpp.errors import InputError


def test_vs_bound_examples():
    assert vs_bound(3, 20) == 4
    assert vs_bound(3, 20, "spectral") == 68
    assert vs_bound(7, 8, "spectral") == 8
    with pytest.raises(InputError):
        vs_bound(5, 5)


def test_generic_bound_examples():
    assert dpp_generic_bound(3, 20) == 54
    assert dpp_generic_bound(1, 2) == 2
    assert dpp_generic_bound(6, 6) == 6


def test_sparse_bounds_examples():
    spec, fro = dpp_sparse_bounds(3, 20, 10, 1.0)
    assert fro == pytest.approx(38 / 17)
    assert spec == 24
    spec, _ = dpp_sparse_bounds(3, 20, 10, 1.0, stated_spectral=True)
    assert spec == 21
    assert dpp_sparse_bounds(3, 20, 3, 5.0)[1] == 1.0
    spec, fro = dpp_sparse_bounds(3, 20, 20, 1.0, stated_spectral=True)
    assert spec == 3 * 17 and fro == pytest.approx(4.0)
    with pytest.raises(InputError):
        dpp_sparse_bounds(3, 20, 2, 1.0)
    with pytest.raises(InputError):
        dpp_sparse_bounds(3, 20, 10, 0.5)


def test_sparse_spectral_default_never_below_one():
    for k in range(1, 6):
        for p in range(k, 12):
            assert dpp_sparse_bounds(k, 12, p, 1.0)[0] >= 1


def test_peff_bounds_examples():
    spec, fro, lb = dpp_peff_bounds(3, 20, 8, 2.0, 1.0)
    assert fro == pytest.approx(41 / 17)
    assert lb == 0.5
    spec, _, _ = dpp_peff_bounds(3, 20, 3, 1 + 1e-12, 1.0)
    assert spec == pytest.approx(3)
    with pytest.raises(InputError):
        dpp_peff_bounds(3, 20, 8, 1.0, 1.0)


def test_risk_examples():
    assert excess_risk_bounds("ols", v=1, rank=20, N=100) == pytest.approx(0.2)
    dpp = excess_risk_bounds("dpp", k=3, p=10, N=100, v=1, w_norm=1, sigma_next=0.1)
    assert dpp == pytest.approx(0.0322)
    common = dict(k=3, N=100, v=1, w_norm=2, sigma_next=0.3)
    assert excess_risk_bounds("dpp", p=3, **common) == excess_risk_bounds("pcr", **common)
    assert excess_risk_bounds("css_subset", max_tan_sq=0.0, **common) == excess_risk_bounds("pcr", **common)
    with pytest.raises(InputError):
        excess_risk_bounds("dpp", k=3, N=100)
    with pytest.raises(InputError):
        excess_risk_bounds("lasso", k=3)


def test_drmamu_examples():
    assert drmamu_sample_size(1, 1.0, 1 / math.e) == 4000
    assert drmamu_sample_size(2, 1.0, 1 / math.e) == 16000
    assert drmamu_sample_size(3, 0.5, 1.0) == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10), st.integers(0, 10), st.floats(0, 1), st.floats(0, 1))
def test_sparse_monotone_in_p_and_beta(k, extra_d, dp, b1, b2):
    d = k + 1 + extra_d
    p = k + dp % (d - k)
    lo_b, hi_b = sorted((1 + b1 * (d - k - 1), 1 + b2 * (d - k - 1)))
    base = dpp_sparse_bounds(k, d, p, lo_b)
    assert dpp_sparse_bounds(k, d, p, hi_b)[1] >= base[1]
    bigger = dpp_sparse_bounds(k, d, p + 1, lo_b)
    assert bigger[0] >= base[0] and bigger[1] >= base[1]


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10), st.integers(0, 10), st.floats(1.01, 5), st.floats(0, 2))
def test_peff_monotone(k, extra_d, dp, theta, dtheta):
    d = k + extra_d
    p = k + dp % (d - k + 1)
    base = dpp_peff_bounds(k, d, p, theta, 1.0)
    more_theta = dpp_peff_bounds(k, d, p, theta + dtheta, 1.0)
    assert more_theta[0] >= base[0] and more_theta[1] >= base[1]
    if p < d:
        more_p = dpp_peff_bounds(k, d, p + 1, theta, 1.0)
        assert more_p[0] >= base[0] and more_p[1] >= base[1]


@pytest.mark.parametrize("k,d", [(1, 5), (3, 20), (5, 20), (4, 4)])
def test_dominance_at_full_sparsity(k, d):
    generic = dpp_generic_bound(k, d)
    assert dpp_sparse_bounds(k, d, d, 1.0, stated_spectral=True)[0] <= generic
    assert dpp_sparse_bounds(k, d, d, 1.0)[0] <= generic


def test_report_contract():
    r = report("dpp", "frobenius", 38 / 17, 2.0, k=3, d=20, p=10, beta=1.0)
    assert r.bound_value == pytest.approx(76 / 17)
    assert r.inputs["p"] == 10
    assert report("dpp", "spectral", 0.0, 1.0).bound_factor == 1.0
    with pytest.raises(InputError):
        BoundReport("dpp", "frobenius", 0.5, 1.0)
    with pytest.raises(InputError):
        report("dpp", "nuclear", 2.0, 1.0)

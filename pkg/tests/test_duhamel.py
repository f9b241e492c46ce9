"""Perturbation series, fixed-point evaluator and the self-consistency residual."""

import numpy as np
import pytest

from hardyheat.duhamel import (
    QuadratureConfig,
    _get_engine,
    duhamel_residual,
    perturbation_term,
    tilde_p,
    tilde_p_fixed_point,
)
from hardyheat.errors import DomainError
from hardyheat.params import ModelParams, kappa_star

X, Y = (1.0, 0.0), (-1.0, 0.0)


def test_zero_coupling_is_free_kernel(ref_free):
    st = tilde_p(1.0, X, Y, ref_free)
    assert len(st.terms) == 1
    assert st.converged
    assert st.value == pytest.approx(0.014235250868343541, rel=1e-12)


def test_zeroth_term_is_free_kernel(ref_subcritical):
    v = perturbation_term(0, 1.0, X, Y, ref_subcritical)
    assert v.value == pytest.approx(0.014235250868343541, rel=1e-12)
    with pytest.raises(DomainError):
        perturbation_term(-1, 1.0, X, Y, ref_subcritical)


def test_supercritical_rejected():
    p = ModelParams.from_kappa(2, 1.0, 1.5 * kappa_star(2, 1.0))
    with pytest.raises(DomainError):
        tilde_p(1.0, X, Y, p)
    with pytest.raises(DomainError):
        tilde_p_fixed_point(1.0, X, [Y], p)


@pytest.mark.slow
def test_series_terms_regression(ref_subcritical):
    # frozen leading terms at kappa = 0.1, t = 1, x = (1,0), y = (-1,0)
    st = tilde_p(1.0, X, Y, ref_subcritical)
    expected = [
        0.014235250868343541,
        0.0019602320384007306,
        0.00019138586193444474,
        2.1349997954087408e-05,
    ]
    assert st.converged
    for got, ref in zip(st.terms[:4], expected):
        assert got == pytest.approx(ref, rel=1e-6)
    # geometric decay of the increments, quotient well below one
    ratios = [b / a for a, b in zip(st.terms[1:], st.terms[2:])]
    assert all(q < 0.5 for q in ratios)
    # the tail bound is an integral-level envelope, finite well below the
    # critical coupling
    assert np.isfinite(st.tail_bound) and st.tail_bound >= 0.0


@pytest.mark.slow
def test_series_and_fixed_point_agree(ref_subcritical):
    st = tilde_p(1.0, X, Y, ref_subcritical)
    fp = tilde_p_fixed_point(1.0, X, [Y], ref_subcritical)[0]
    # both routes run at the default 1e-3 grid tolerance
    assert st.value == pytest.approx(fp.value, rel=1e-3)


@pytest.mark.slow
def test_critical_fixed_point_regression(ref_critical):
    # frozen value at the critical coupling, where the series alone stalls
    fp = tilde_p_fixed_point(1.0, X, [Y], ref_critical)[0]
    assert fp.value == pytest.approx(0.02039493734685286, rel=1e-6)


@pytest.mark.slow
def test_duhamel_residual(ref_subcritical):
    eng = _get_engine(ref_subcritical, 1.0, X, QuadratureConfig())
    res = duhamel_residual(1.0, X, Y, eng, ref_subcritical)
    assert res < 1e-3


def test_engine_symmetry(ref_subcritical):
    # p(t, x, y) = p(t, y, x): two engines centered at either point agree
    cfg = QuadratureConfig()
    a = tilde_p(1.0, (0.7, 0.2), (-0.4, 0.5), ref_subcritical, cfg)
    b = tilde_p(1.0, (-0.4, 0.5), (0.7, 0.2), ref_subcritical, cfg)
    assert a.value == pytest.approx(b.value, rel=2e-3)


def test_config_validation():
    with pytest.raises(DomainError):
        QuadratureConfig(eps0=0.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiddenep.core import (COALESCING_VECTOR, CoreMatrix, ModelParams, MomentumSector, Regime,
                           build_core_matrix, build_sector, classify, coalescing_residual, ep_locus,
                           jordan_residual, spectral_decompose)
from hiddenep.errors import DomainError


def core(mu, dk, tk=0.0):
    return build_core_matrix(MomentumSector(0.0, tk, dk), ModelParams(t=0.0, delta=1.0, mu=mu))


@pytest.mark.parametrize("t, delta, k, tk, dk", [
    (0.5, 1.0, math.pi / 2, 0.5, 0.0),
    (0.0, 1.0, 0.0, 0.0, 1.0),
    (1.0, 2.0, math.pi / 3, math.sqrt(3) / 2, 1.0),
])
def test_build_sector_examples(t, delta, k, tk, dk):
    s = build_sector(ModelParams(t=t, delta=delta, mu=1.0), k)
    assert s.t_k == pytest.approx(tk, abs=1e-15)
    assert s.delta_k == pytest.approx(dk, abs=1e-15)


@pytest.mark.parametrize("k", [-math.pi, 3.5, -4.0])
def test_build_sector_rejects_k_outside_principal_range(k):
    with pytest.raises(DomainError):
        build_sector(ModelParams(t=0.0, delta=1.0, mu=1.0), k)


def test_model_params_rejects_bad_mu():
    with pytest.raises(DomainError):
        ModelParams(t=0.0, delta=1.0, mu=0.0)
    with pytest.raises(DomainError):
        ModelParams(t=0.0, delta=math.nan, mu=1.0)


@pytest.mark.parametrize("mu, dk, tk, expected", [
    (2.0, 0.0, 0.5, [[2.5, 0], [0, -1.5]]),
    (2.0, 1.0, 0.0, [[2, 1j], [1j, -2]]),
    (1.0, 1.0, 0.0, [[1, 1j], [1j, -1]]),
])
def test_core_matrix_examples(mu, dk, tk, expected):
    np.testing.assert_allclose(core(mu, dk, tk).entries, expected, atol=1e-15)


def test_core_matrix_at_ep_is_jordan_form():
    c = core(1.0, 1.0)
    assert spectral_decompose(c).is_ep
    assert jordan_residual(c) <= 1e-12
    assert coalescing_residual(c) <= 1e-12
    np.testing.assert_allclose(c.shifted() @ COALESCING_VECTOR, 0, atol=1e-15)


def test_spectral_localized():
    sd = spectral_decompose(core(2.0, 1.0))
    assert sd.eps_plus == pytest.approx(2 * math.sqrt(3))
    assert sd.regime is Regime.LOCALIZED
    assert not sd.is_ep


def test_spectral_delocalized_is_imaginary():
    sd = spectral_decompose(core(1.0, 2.0))
    assert sd.eps_plus == pytest.approx(2j * math.sqrt(3))
    assert sd.regime is Regime.DELOCALIZED


def test_spectral_at_ep_leaves_theta_unset():
    sd = spectral_decompose(core(1.0, 1.0))
    assert sd.is_ep and sd.theta_k is None and sd.eps_plus == 0


def test_theta_diagonalizes_core():
    # tanh(theta/2) = (mu - eps_+/2) / Delta_k
    mu, dk = 2.0, 1.0
    sd = spectral_decompose(core(mu, dk))
    assert math.tanh(sd.theta_k.real / 2) == pytest.approx((mu - math.sqrt(3)) / dk)


@pytest.mark.parametrize("mu, dk, tk, expected", [
    (1.0, 1.0, 0.0, 0.0),
    (2.0, 1.0, 0.0, 12.0),
    (1.0, 0.0, 7.0, 4.0),
])
def test_jordan_residual_examples(mu, dk, tk, expected):
    assert jordan_residual(core(mu, dk, tk)) == pytest.approx(expected, abs=1e-12)


def test_ep_locus_examples():
    assert ep_locus(ModelParams(t=0.0, delta=1.0, mu=1.0)) == pytest.approx([0.0, math.pi], abs=1e-12)
    assert ep_locus(ModelParams(t=0.0, delta=1.0, mu=2.0)) == []
    got = ep_locus(ModelParams(t=0.0, delta=2.0, mu=1.0))
    np.testing.assert_allclose(got, [-2 * math.pi / 3, -math.pi / 3, math.pi / 3, 2 * math.pi / 3], atol=1e-12)


def test_classify_relative_tolerance():
    assert classify(1.0, 1.0 + 1e-13) is Regime.EP
    assert classify(1.0, 1.0 + 1e-6) is Regime.DELOCALIZED
    assert classify(1.0, -0.5) is Regime.LOCALIZED


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.05, 5), dk=st.floats(-5, 5), tk=st.floats(-3, 3))
def test_eigenvalues_are_plus_minus_pair(mu, dk, tk):
    # eps_pm of the shifted core are the roots of x^2 = 4 (mu^2 - dk^2)
    sd = spectral_decompose(core(mu, dk, tk))
    assert sd.eps_minus == pytest.approx(-sd.eps_plus)
    assert sd.eps_plus ** 2 == pytest.approx(4 * (mu * mu - dk * dk), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.05, 5), dk=st.floats(-5, 5))
def test_regime_follows_mu_vs_abs_delta(mu, dk):
    r = classify(mu, dk)
    if abs(mu - abs(dk)) > 1e-8 * max(mu, abs(dk)):
        assert r is (Regime.LOCALIZED if mu > abs(dk) else Regime.DELOCALIZED)

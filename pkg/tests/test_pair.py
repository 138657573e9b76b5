import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiddenep.core import ModelParams, MomentumSector, build_core_matrix, build_sector, spectral_decompose
from hiddenep.errors import DomainError, RegimeError, SizeError
from hiddenep.numerics import eigh_tridiagonal, ipr
from hiddenep.pair import (TwoModeFockSpace, annihilation_residual, barred_mode_coefficients,
                           barred_transform, build_barred_hamiltonian, build_pair_hamiltonian,
                           calibrate_recursion_factor, crossbasis_matrix_element, extended_state,
                           ipr_vacuum_closed_form, ladder_energies, project_block, recursive_eigenvector,
                           vacuum_closed_form, vacuum_decay_ratio, vacuum_energy)


def chain(mu, dk, tk=0.0):
    return ModelParams(t=0.0, delta=1.0, mu=mu), MomentumSector(0.0, tk, dk)


# --- pair chain -------------------------------------------------------------


def test_pair_chain_example_with_constant():
    p, s = chain(2.0, 1.0)
    h = build_pair_hamiltonian(p, s, 3, include_constant=True)
    np.testing.assert_allclose(h.diag, [4, 12, 20])
    np.testing.assert_allclose(h.upper, [2j, 4j])


def test_pair_chain_default_drops_constant():
    p, s = chain(2.0, 1.0, tk=0.3)
    h = build_pair_hamiltonian(p, s, 3)
    np.testing.assert_allclose(h.diag, [0, 8, 16])


def test_pair_chain_without_pairing_is_diagonal():
    p, s = chain(2.0, 0.0)
    h = build_pair_hamiltonian(p, s, 2, include_constant=True)
    np.testing.assert_allclose(h.diag, [4, 12])
    np.testing.assert_allclose(h.upper, [0])


def test_pair_chain_size_error():
    p, s = chain(2.0, 1.0)
    with pytest.raises(SizeError):
        build_pair_hamiltonian(p, s, 1)


def test_first_hopping_is_two_i_delta():
    p, s = chain(1.7, -0.6)
    assert build_pair_hamiltonian(p, s, 4).upper[0] == pytest.approx(2j * -0.6)


@pytest.mark.parametrize("include_constant", [False, True])
def test_projection_oracle_small(include_constant):
    p, s = chain(2.0, 1.0, tk=0.4)
    ref = project_block(p, s, 6, include_constant)
    got = build_pair_hamiltonian(p, s, 7, include_constant)
    np.testing.assert_allclose(ref.diag[:5], got.diag[:5], atol=1e-12)
    np.testing.assert_allclose(ref.upper[:4], got.upper[:4], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(t=st.floats(-2, 2), delta=st.floats(-2, 2), mu=st.floats(0.05, 3), k=st.floats(-3.14, 3.14),
       const=st.booleans())
def test_projection_oracle_property(t, delta, mu, k, const):
    p = ModelParams(t=t, delta=delta, mu=mu)
    s = build_sector(p, k)
    ref = project_block(p, s, 12, const)
    got = build_pair_hamiltonian(p, s, 13, const)
    np.testing.assert_allclose(ref.diag, got.diag, atol=1e-12)
    np.testing.assert_allclose(ref.upper, got.upper, atol=1e-12)


def test_block_commutes_with_parity_and_momentum():
    p, s = chain(1.3, 0.8, tk=0.2)
    space = TwoModeFockSpace(10)
    h = space.block_hamiltonian(p, s).toarray()
    keep = space.interior_mask(2)
    for op in (space.parity().toarray(), space.momentum(0.7).toarray()):
        comm = h @ op - op @ h
        assert np.max(np.abs(comm[np.ix_(keep, keep)])) <= 1e-12


# --- localized side ---------------------------------------------------------


def test_vacuum_energy_example():
    p, s = chain(2.0, 1.0)
    assert vacuum_energy(p, s) == pytest.approx(2 * math.sqrt(3) - 4)
    assert vacuum_energy(p, s) == pytest.approx(-0.5359, abs=1e-4)


def test_vacuum_decay_ratio():
    p, s = chain(2.0, 1.0)
    assert vacuum_decay_ratio(p, s) == pytest.approx(2 - math.sqrt(3))
    assert vacuum_decay_ratio(*chain(1.0 + 1e-9, 1.0)) == pytest.approx(1.0, abs=1e-4)


def test_vacuum_regime_error():
    with pytest.raises(RegimeError):
        vacuum_closed_form(*chain(1.0, 2.0), 10)
    with pytest.raises(RegimeError):
        vacuum_energy(*chain(1.0, 1.0))


@pytest.mark.parametrize("mu, dk", [(2.0, 1.0), (1.2, -1.0), (3.0, 0.4)])
def test_vacuum_is_eigenvector(mu, dk):
    p, s = chain(mu, dk)
    st_, e = vacuum_closed_form(p, s, 200)
    assert build_pair_hamiltonian(p, s, 200).residual(st_.amplitudes, e) <= 1e-8


def test_vacuum_with_constant_shifts_energy():
    p, s = chain(2.0, 1.0, tk=0.5)
    st_, e = vacuum_closed_form(p, s, 120, include_constant=True)
    assert e == pytest.approx(2 * math.sqrt(3) - 4 + 2 * (2.0 - 0.5))
    assert build_pair_hamiltonian(p, s, 120, True).residual(st_.amplitudes, e) <= 1e-8


def test_vacuum_annihilated_by_gamma_modes():
    p, s = chain(2.0, 1.0)
    theta = spectral_decompose(build_core_matrix(s, p)).theta_k
    space = TwoModeFockSpace(60)
    g = space.gamma_modes(theta)
    st_, _ = vacuum_closed_form(p, s, 61)
    psi = space.embed_pair(st_.amplitudes)
    for name in ("gamma_k", "gamma_mk"):
        assert annihilation_residual(psi, g[name], space.interior_mask()) < 1e-8


def test_bare_vacuum_annihilated_by_b():
    space = TwoModeFockSpace(5)
    vac = space.pair_state(0)
    assert np.all(space.b_k @ vac == 0)


def test_gamma_cannot_annihilate_delocalized_eigenstates():
    p, s = chain(1.0, 2.0)
    theta = spectral_decompose(build_core_matrix(s, p)).theta_k
    space = TwoModeFockSpace(30)
    g = space.gamma_modes(theta)["gamma_k"]
    dec = eigh_tridiagonal(build_pair_hamiltonian(p, s, 31), n_lowest=5)
    for i in range(5):
        psi = space.embed_pair(dec.eigenvectors[:, i])
        assert annihilation_residual(psi, g, space.interior_mask()) > 0.1


def test_ladder_matches_spectrum():
    p, s = chain(2.0, 1.0)
    w = eigh_tridiagonal(build_pair_hamiltonian(p, s, 400), n_lowest=10, eigvals_only=True).eigenvalues
    lad = ladder_energies(p, s, 10)
    np.testing.assert_allclose(w, lad, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(np.diff(w), 4 * math.sqrt(3), rtol=1e-6)
    assert lad[0] == vacuum_energy(p, s)


def test_ladder_without_pairing():
    p, s = chain(2.0, 0.0)
    np.testing.assert_allclose(np.diff(ladder_energies(p, s, 4)), 8.0)
    w = build_pair_hamiltonian(p, s, 4, include_constant=True).diag
    np.testing.assert_allclose(w, 4 * 2.0 * np.arange(4) + 2 * 2.0)


def test_ipr_closed_form_matches_geometric_oracle():
    r = 2 - math.sqrt(3)
    oracle = (1 - r * r) / (1 + r * r)  # sum r^4l / (sum r^2l)^2
    assert ipr_vacuum_closed_form(2.0, 1.0) == pytest.approx(oracle, abs=1e-12)
    assert ipr_vacuum_closed_form(2.0, 1.0) == pytest.approx(0.8660, abs=1e-4)
    st_, _ = vacuum_closed_form(*chain(2.0, 1.0), 200)
    assert ipr(st_) == pytest.approx(oracle, abs=1e-12)


# --- delocalized side -------------------------------------------------------


def test_barred_transform_example():
    kp, km = barred_transform(*chain(1.0, 2.0))
    assert kp == pytest.approx((1 - math.sqrt(3)) / (2 * 3 ** 0.25))
    assert km == pytest.approx((1 + math.sqrt(3)) / (2 * 3 ** 0.25))
    assert kp == pytest.approx(-0.2781, abs=1e-4)


def test_barred_transform_regime_error():
    with pytest.raises(RegimeError):
        barred_transform(*chain(2.0, 1.0))


@settings(max_examples=50, deadline=None)
@given(mu=st.floats(0.05, 3), extra=st.floats(0.01, 3), sign=st.sampled_from([1, -1]))
def test_barred_transform_is_canonical(mu, extra, sign):
    kp, km = barred_transform(*chain(mu, sign * (mu + extra)))
    assert km * km - kp * kp == pytest.approx(1.0, rel=1e-10)


def test_barred_mode_commutator():
    v, u = barred_mode_coefficients(*chain(1.0, 2.0))
    space = TwoModeFockSpace(20)
    bbk, _ = space.barred_modes(v, u)
    comm = (bbk @ bbk.conj().T - bbk.conj().T @ bbk).toarray()
    keep = space.interior_mask(2)
    np.testing.assert_allclose(comm[np.ix_(keep, keep)], np.eye(keep.sum()), atol=1e-12)


def test_barred_chain_values():
    p, s = chain(1.0, 2.0)
    h = build_barred_hamiltonian(p, s, 3)
    np.testing.assert_allclose(h.upper, [2j * math.sqrt(3), 4j * math.sqrt(3)])
    np.testing.assert_allclose(h.diag, [-2.0, -2.0, -2.0])
    assert h.hermitian


def test_barred_chain_independent_of_hopping_term():
    a = build_barred_hamiltonian(*chain(1.0, 2.0, tk=0.0), 5)
    b = build_barred_hamiltonian(*chain(1.0, 2.0, tk=0.9), 5)
    np.testing.assert_array_equal(a.diag, b.diag)
    np.testing.assert_array_equal(a.upper, b.upper)


@pytest.mark.parametrize("dk", [2.0, -2.0])
def test_barred_chain_matches_projection_on_barred_basis(dk):
    p, s = chain(1.0, dk)
    v, u = barred_mode_coefficients(p, s)
    space = TwoModeFockSpace(70)
    B = space.barred_pair_states(v, u, 6)
    m = B.conj().T @ (space.block_hamiltonian(p, s) @ B)
    h = build_barred_hamiltonian(p, s, 6).to_dense()
    np.testing.assert_allclose(m, h, atol=1e-8)


def test_recursion_zero_energy_sequence():
    c = recursive_eigenvector(0.0, 1.0, 12).amplitudes
    assert c[2] == 0.5
    assert np.all(c[1::2] == 0)
    np.testing.assert_allclose(c[:6:2].real, [1, 0.5, 0.375])
    n = np.arange(1, 6)
    np.testing.assert_allclose(c[2 * n] / c[2 * (n - 1)], (2 * n - 1) / (2 * n), rtol=1e-15)


def test_recursion_rejects_bad_scale():
    with pytest.raises(DomainError):
        recursive_eigenvector(0.0, 0.0, 5)


def test_recursion_calibration_picks_two():
    best, scores = calibrate_recursion_factor(*chain(1.0, 2.0))
    assert best == 2.0
    assert scores[2.0] < 1e-10 < min(v for f, v in scores.items() if f != 2.0)


@pytest.mark.parametrize("dk, energy", [(2.0, 0.0), (2.0, 0.7), (-2.0, 1.3), (3.0, -0.4)])
def test_extended_state_residual(dk, energy):
    p, s = chain(1.0, dk)
    L = 500
    h = build_barred_hamiltonian(p, s, L)
    c = extended_state(p, s, energy, L).amplitudes
    assert h.residual(c, energy + h.diag[0], rows=L - 1) <= 1e-10


def test_crossbasis_exact_matches_operator():
    p, s = chain(1.0, 2.0)
    kp, km = barred_transform(p, s)
    space = TwoModeFockSpace(12)
    bbk, bbmk = space.barred_modes(kp, km)
    X = (bbk.conj().T @ bbmk.conj().T - bbk @ bbmk)
    P = space.pair_projector(8)
    M = (P.T @ X @ P).toarray()
    for l in range(6):
        for lp in range(6):
            assert crossbasis_matrix_element(l, lp, kp, km) == pytest.approx(M[l, lp], abs=1e-12)


def test_crossbasis_examples():
    kp, km = barred_transform(*chain(1.0, 2.0))
    assert crossbasis_matrix_element(0, 0, kp, km, "printed") == 0
    assert crossbasis_matrix_element(1, 2, kp, km, "printed") == pytest.approx(1.1547, abs=1e-4)
    assert crossbasis_matrix_element(2, 2, kp, km, "printed") == pytest.approx(2.3094j, abs=1e-4)
    # the operator itself
    assert crossbasis_matrix_element(1, 2, kp, km) == pytest.approx(-2.3094, abs=1e-4)
    assert crossbasis_matrix_element(2, 2, kp, km) == pytest.approx(2.8868j, abs=1e-4)


def test_crossbasis_rejects_negative_index():
    with pytest.raises(DomainError):
        crossbasis_matrix_element(-1, 0, 0.1, 1.0)

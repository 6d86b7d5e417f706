"""Spinor algebra checks against an explicit gamma-matrix oracle.

The oracle builds the Dirac-Pauli matrices directly and applies the chiral
projectors (1 +- gamma5)/2 to 4-spinors, independently of the packaged
component formulas.
"""

import numpy as np
import pytest

from zigzag.spinor import (
    SIGMA,
    Chirality,
    assemble,
    chiral_currents,
    chiral_decompose,
    coupling_scalar,
    dirac_alpha_vector,
    dirac_density,
    weyl_density,
    weyl_sigma_vector,
)

RNG = np.random.default_rng(20240811)

GAMMA0 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
GAMMA5 = np.block(
    [[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]]
).astype(complex)
P_RIGHT = (np.eye(4) + GAMMA5) / 2.0
P_LEFT = (np.eye(4) - GAMMA5) / 2.0
ALPHA = np.array(
    [
        np.block([[np.zeros((2, 2)), SIGMA[k]], [SIGMA[k], np.zeros((2, 2))]])
        for k in range(3)
    ]
)


def random_spinors(n, comps):
    return RNG.standard_normal((n, comps)) + 1j * RNG.standard_normal((n, comps))


def oracle_decompose(psi):
    """Chiral Weyl components via the projector matrices."""
    psi_r = P_RIGHT @ psi
    psi_l = P_LEFT @ psi
    # psi_R = (phi_R, phi_R)/sqrt(2): read the Weyl spinor off the upper block
    return np.sqrt(2.0) * psi_r[:2], np.sqrt(2.0) * psi_l[:2]


def test_chiral_decompose_matches_projector_oracle():
    for psi in random_spinors(50, 4):
        phi_r, phi_l = chiral_decompose(psi)
        ref_r, ref_l = oracle_decompose(psi)
        np.testing.assert_allclose(phi_r, ref_r, atol=1e-14)
        np.testing.assert_allclose(phi_l, ref_l, atol=1e-14)


def test_chiral_decompose_pinned_examples():
    phi_r, phi_l = chiral_decompose(np.array([1, 0, 0, 0], dtype=complex))
    np.testing.assert_allclose(phi_r, [1 / np.sqrt(2), 0], atol=1e-15)
    np.testing.assert_allclose(phi_l, [1 / np.sqrt(2), 0], atol=1e-15)

    phi_r, phi_l = chiral_decompose(np.zeros(4, dtype=complex))
    assert np.all(phi_r == 0) and np.all(phi_l == 0)

    phi_r, phi_l = chiral_decompose(np.array([1, 0, 1, 0]) / np.sqrt(2))
    np.testing.assert_allclose(phi_r, [1, 0], atol=1e-15)
    np.testing.assert_allclose(phi_l, [0, 0], atol=1e-15)


def test_assemble_inverts_decompose_exactly():
    psi = random_spinors(200, 4)
    psi /= np.linalg.norm(psi, axis=-1, keepdims=True)
    phi_r, phi_l = chiral_decompose(psi)
    back = assemble(phi_r, phi_l)
    assert np.abs(back - psi).max() < 1e-15


def test_assemble_pinned_examples():
    np.testing.assert_allclose(
        assemble(np.array([1, 0]), np.array([0, 0])),
        np.array([1, 0, 1, 0]) / np.sqrt(2),
        atol=1e-15,
    )
    one = np.array([1, 0]) / np.sqrt(2)
    np.testing.assert_allclose(assemble(one, one), [1, 0, 0, 0], atol=1e-15)
    assert np.all(assemble(np.zeros(2), np.zeros(2)) == 0)


def test_density_splits_across_chiralities():
    psi = random_spinors(500, 4)
    phi_r, phi_l = chiral_decompose(psi)
    total = weyl_density(phi_r) + weyl_density(phi_l)
    assert np.abs(total - dirac_density(psi)).max() < 1e-12


def test_bloch_vector_norm_equals_density():
    # the algebraic root of luminality, at the full acceptance batch size
    phi = random_spinors(1_000_000, 2)
    norm = np.linalg.norm(weyl_sigma_vector(phi), axis=-1)
    assert np.abs(norm - weyl_density(phi)).max() < 1e-12


def test_chiral_currents_examples_and_lightlike():
    up = np.array([1, 0], dtype=complex)
    zero = np.zeros(2, dtype=complex)
    cur = chiral_currents(up, zero)
    np.testing.assert_allclose(cur["rho_R"], 1.0, atol=1e-15)
    np.testing.assert_allclose(cur["j_R"], [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(cur["rho_L"], 0.0, atol=1e-15)

    cur = chiral_currents(zero, up)
    np.testing.assert_allclose(cur["rho_L"], 1.0, atol=1e-15)
    np.testing.assert_allclose(cur["j_L"], [0, 0, -1], atol=1e-15)

    plus_x = np.array([1, 1]) / np.sqrt(2)
    cur = chiral_currents(plus_x, zero)
    np.testing.assert_allclose(cur["j_R"], [1, 0, 0], atol=1e-15)

    phi = random_spinors(1000, 2)
    cur = chiral_currents(phi, phi)
    for c in "RL":
        diff = np.linalg.norm(cur[f"j_{c}"], axis=-1) - cur[f"rho_{c}"]
        assert np.abs(diff).max() < 1e-12


def test_coupling_scalar_examples():
    phi_r = np.array([1, 0], dtype=complex)
    phi_l = np.array([1j, 0], dtype=complex)
    assert coupling_scalar(phi_r, phi_l, 0.0) == 0.0
    assert abs(coupling_scalar(phi_r, phi_l, 1.0) - 2.0) < 1e-15
    real = RNG.standard_normal((20, 2)).astype(complex)
    assert np.abs(coupling_scalar(real, real, 3.0)).max() < 1e-15


def test_coupling_scalar_matches_four_spinor_form():
    # F = 2m Im(psi_R^dag gamma0 psi_L), evaluated with explicit matrices
    psi = random_spinors(300, 4)
    mass = 1.7
    phi_r, phi_l = chiral_decompose(psi)
    ours = coupling_scalar(phi_r, phi_l, mass)
    for k in range(300):
        psi_r = P_RIGHT @ psi[k]
        psi_l = P_LEFT @ psi[k]
        ref = 2.0 * mass * np.imag(np.conj(psi_r) @ GAMMA0 @ psi_l)
        assert abs(ours[k] - ref) < 1e-12


def test_coupling_scalar_antisymmetry():
    a = random_spinors(100, 2)
    b = random_spinors(100, 2)
    fwd = coupling_scalar(a, b, 2.0)
    rev = coupling_scalar(b, a, 2.0)
    assert np.abs(fwd + rev).max() < 1e-12


def test_coupling_scalar_rejects_negative_mass():
    with pytest.raises(ValueError):
        coupling_scalar(np.ones(2), np.ones(2), -1.0)


def test_dirac_alpha_vector_matches_matrix_oracle():
    psi = random_spinors(100, 4)
    ours = dirac_alpha_vector(psi)
    for k in range(100):
        ref = [np.real(np.conj(psi[k]) @ ALPHA[i] @ psi[k]) for i in range(3)]
        np.testing.assert_allclose(ours[k], ref, atol=1e-12)


def test_chirality_label_algebra():
    assert Chirality.R.sign == 1 and Chirality.L.sign == -1
    for c in Chirality:
        assert c.sign**2 == 1
        assert c.flipped.flipped is c

"""Spinor algebra in the Dirac-Pauli representation.

A Dirac 4-spinor is stored as components (phi_1, phi_2, chi_1, chi_2): the
upper and lower 2-spinors of the Dirac-Pauli basis, in which gamma^0 is
diagonal.  The chiral (Weyl) components are

    phi_R = (phi + chi) / sqrt(2),   phi_L = (phi - chi) / sqrt(2).

All functions accept either a single spinor (trailing axis of length 4 or 2)
or arrays of spinors with arbitrary leading axes, and are pure.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

_SQRT2 = np.sqrt(2.0)

# Pauli matrices; index order (component, row, col).
SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class Chirality(Enum):
    R = "R"
    L = "L"

    @property
    def sign(self) -> int:
        """s(R) = +1, s(L) = -1."""
        return 1 if self is Chirality.R else -1

    @property
    def flipped(self) -> "Chirality":
        return Chirality.L if self is Chirality.R else Chirality.R


def chiral_decompose(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a Dirac spinor into its right- and left-handed Weyl components."""
    psi = np.asarray(psi, dtype=complex)
    upper, lower = psi[..., :2], psi[..., 2:]
    return (upper + lower) / _SQRT2, (upper - lower) / _SQRT2


def assemble(phi_r: np.ndarray, phi_l: np.ndarray) -> np.ndarray:
    """Inverse of chiral_decompose: rebuild the 4-spinor from (phi_R, phi_L)."""
    phi_r = np.asarray(phi_r, dtype=complex)
    phi_l = np.asarray(phi_l, dtype=complex)
    return np.concatenate(
        [(phi_r + phi_l) / _SQRT2, (phi_r - phi_l) / _SQRT2], axis=-1
    )


def weyl_density(phi: np.ndarray) -> np.ndarray:
    """phi^dag phi for a 2-spinor array."""
    phi = np.asarray(phi)
    return np.sum(np.abs(phi) ** 2, axis=-1)


def weyl_sigma_vector(phi: np.ndarray) -> np.ndarray:
    """phi^dag sigma phi: the (unnormalized) Bloch vector, trailing axis xyz.

    Its euclidean norm equals phi^dag phi for every 2-spinor, which is what
    makes the single-particle chiral velocities unit vectors.
    """
    phi = np.asarray(phi, dtype=complex)
    a, b = phi[..., 0], phi[..., 1]
    cross = np.conj(a) * b
    return np.stack(
        [2.0 * cross.real, 2.0 * cross.imag, np.abs(a) ** 2 - np.abs(b) ** 2],
        axis=-1,
    )


def chiral_currents(phi_r: np.ndarray, phi_l: np.ndarray) -> dict[str, np.ndarray]:
    """Densities and fluxes of the two chiral currents.

    rho_c = phi_c^dag phi_c and j_R = +phi_R^dag sigma phi_R,
    j_L = -phi_L^dag sigma phi_L; both currents are lightlike pointwise.
    """
    return {
        "rho_R": weyl_density(phi_r),
        "rho_L": weyl_density(phi_l),
        "j_R": weyl_sigma_vector(phi_r),
        "j_L": -weyl_sigma_vector(phi_l),
    }


def coupling_scalar(phi_r: np.ndarray, phi_l: np.ndarray, mass: float) -> np.ndarray:
    """The chirality-exchange scalar F = 2m Im(phi_R^dag phi_L).

    F is the source of the right-handed density and the sink of the
    left-handed one; it vanishes identically for massless fields.
    """
    if mass < 0:
        raise ValueError("mass must be nonnegative")
    phi_r = np.asarray(phi_r, dtype=complex)
    phi_l = np.asarray(phi_l, dtype=complex)
    inner = np.sum(np.conj(phi_r) * phi_l, axis=-1)
    return 2.0 * mass * inner.imag


def dirac_density(psi: np.ndarray) -> np.ndarray:
    """psi^dag psi for a 4-spinor array."""
    psi = np.asarray(psi)
    return np.sum(np.abs(psi) ** 2, axis=-1)


def dirac_alpha_vector(psi: np.ndarray) -> np.ndarray:
    """psi^dag alpha psi, the spatial Dirac current, trailing axis xyz."""
    psi = np.asarray(psi, dtype=complex)
    upper, lower = psi[..., :2], psi[..., 2:]
    # alpha_k = offdiag(sigma_k, sigma_k): psi^dag alpha psi = 2 Re(upper^dag sigma lower)
    sig_lower = np.einsum("kij,...j->...ik", SIGMA, lower)
    return 2.0 * np.sum(np.conj(upper)[..., None] * sig_lower, axis=-2).real

"""Pointwise guidance data: chiral velocities, minimal flip rates, Bohm velocity.

The single-particle chiral velocity is the unit Bloch vector of the occupied
Weyl component, so it has unit norm wherever the component's density is
nonzero; the flip rates are the minimal pair

    t_LR = F^+ / rho_L,      t_RL = (-F)^+ / rho_R,

which never fire in both directions at once.  Samples taken where the
occupied density is below a floor are flagged degenerate: the trajectory
layer then holds the last velocity and uses the capped rate returned here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spinor import (
    Chirality,
    chiral_decompose,
    coupling_scalar,
    dirac_alpha_vector,
    dirac_density,
    weyl_density,
    weyl_sigma_vector,
)

# Relative density floor and the rate cap applied on degenerate samples.
DENSITY_FLOOR_FRACTION = 1e-12
RATE_CAP_FACTOR = 1e3


@dataclass
class GuidanceSample:
    """Velocities, rates and densities evaluated at one or more points."""

    v_R: np.ndarray
    v_L: np.ndarray
    t_LR: np.ndarray
    t_RL: np.ndarray
    rho_R: np.ndarray
    rho_L: np.ndarray
    degenerate_R: np.ndarray
    degenerate_L: np.ndarray


def velocity_field(phi: np.ndarray, chirality: Chirality, floor: float = 0.0):
    """s(c) * phi^dag sigma phi / phi^dag phi, with a degenerate flag.

    Below the floor the returned velocity rows are zero and flagged; callers
    hold their previous velocity there.
    """
    rho = weyl_density(phi)
    degenerate = rho <= floor
    safe = np.where(degenerate, 1.0, rho)
    v = chirality.sign * weyl_sigma_vector(phi) / safe[..., None]
    v = np.where(degenerate[..., None], 0.0, v)
    return v, degenerate


def jump_rates(
    phi_r: np.ndarray,
    phi_l: np.ndarray,
    mass: float,
    floor: float = 0.0,
    rate_cap: float | None = None,
):
    """Minimal flip rates (t_LR, t_RL); degenerate samples come back capped.

    rate_cap defaults to RATE_CAP_FACTOR * mass.  Only the rate *out of* a
    chirality whose density sits below the floor is capped; the opposite
    rate is well defined and returned exactly.
    """
    cap = RATE_CAP_FACTOR * mass if rate_cap is None else rate_cap
    rho_r = weyl_density(phi_r)
    rho_l = weyl_density(phi_l)
    exch = coupling_scalar(phi_r, phi_l, mass)
    deg_r = rho_r <= floor
    deg_l = rho_l <= floor
    t_lr = np.maximum(exch, 0.0) / np.where(deg_l, 1.0, rho_l)
    t_rl = np.maximum(-exch, 0.0) / np.where(deg_r, 1.0, rho_r)
    t_lr = np.where(deg_l, np.where(exch > 0, cap, 0.0), np.minimum(t_lr, cap))
    t_rl = np.where(deg_r, np.where(exch < 0, cap, 0.0), np.minimum(t_rl, cap))
    return t_lr, t_rl


def bohm_velocity(psi: np.ndarray, floor: float = 0.0):
    """Deterministic Dirac guidance velocity psi^dag alpha psi / psi^dag psi.

    Always subluminal, and equal to the density-weighted convex combination
    of the two chiral velocities.
    """
    rho = dirac_density(psi)
    degenerate = rho <= floor
    safe = np.where(degenerate, 1.0, rho)
    v = dirac_alpha_vector(psi) / safe[..., None]
    v = np.where(degenerate[..., None], 0.0, v)
    return v, degenerate


def guidance_sample(
    phi_r: np.ndarray,
    phi_l: np.ndarray,
    mass: float,
    floor: float = 0.0,
    rate_cap: float | None = None,
) -> GuidanceSample:
    """Bundle velocities, rates and densities for a batch of spinor samples."""
    v_r, deg_r = velocity_field(phi_r, Chirality.R, floor)
    v_l, deg_l = velocity_field(phi_l, Chirality.L, floor)
    t_lr, t_rl = jump_rates(phi_r, phi_l, mass, floor, rate_cap)
    return GuidanceSample(
        v_R=v_r,
        v_L=v_l,
        t_LR=t_lr,
        t_RL=t_rl,
        rho_R=weyl_density(phi_r),
        rho_L=weyl_density(phi_l),
        degenerate_R=deg_r,
        degenerate_L=deg_l,
    )


def convex_identity_residual(psi: np.ndarray) -> float:
    """Max |v_D - (rho_R v_R + rho_L v_L)/(rho_R + rho_L)| over a batch."""
    phi_r, phi_l = chiral_decompose(psi)
    rho_r = weyl_density(phi_r)[..., None]
    rho_l = weyl_density(phi_l)[..., None]
    v_r, _ = velocity_field(phi_r, Chirality.R)
    v_l, _ = velocity_field(phi_l, Chirality.L)
    v_d, _ = bohm_velocity(psi)
    mix = (rho_r * v_r + rho_l * v_l) / (rho_r + rho_l)
    return float(np.abs(v_d - mix).max())


def record_floor(densities_mean: float) -> float:
    """Density floor used by trajectory runs: a fraction of the mean density."""
    return DENSITY_FLOOR_FRACTION * densities_mean

"""Two-particle dynamics: factorization, subluminality, entanglement coupling."""

import numpy as np
import pytest

from zigzag.ensemble import integrate_master_equation
from zigzag.errors import ZigzagError
from zigzag.manybody import (
    SECTORS,
    SectorField2P,
    TwoParticleProvider,
    antisymmetrize,
    evolve_2p,
    exchange,
    product_state,
    sector_balance_residual,
    sector_flip_rate,
    sector_velocities,
)
from zigzag.waves import GridSpec, evolve_1d_spinful, gaussian_1d


def one_particle_state(grid1, center, sigma, momentum, chiral_weights, spin):
    """(4, N) spin-full chiral state: (R_up, R_dn, L_up, L_dn)."""
    env = gaussian_1d(grid1, center, sigma, momentum)
    wr, wl = chiral_weights
    out = np.zeros((4, grid1.points[0]), dtype=complex)
    out[0] = wr * spin[0] * env
    out[1] = wr * spin[1] * env
    out[2] = wl * spin[0] * env
    out[3] = wl * spin[1] * env
    norm = np.sqrt(np.sum(np.abs(out) ** 2) * grid1.spacing[0])
    return out / norm


GRID1 = GridSpec((16.0,), (64,))
GRID2 = GridSpec((16.0, 16.0), (64, 64))


def test_massless_sectors_advect_rigidly():
    one = one_particle_state(GRID1, 8.0, 1.5, 0.0, (1.0, 0.0), (1.0, 0.0))
    two = one_particle_state(GRID1, 6.0, 1.5, 0.0, (0.0, 1.0), (1.0, 0.0))
    state = product_state(GRID2, one, two, mass=0.0)
    rec = evolve_2p(state, t_final=2.0, dt=0.25)
    # sector RL with spins uu: particle 1 moves +1, particle 2 moves -1
    i0 = SECTORS.index("RL")
    start = rec.frames[0].reshape((4, 2, 2) + GRID2.points)[i0, 0, 0]
    end = rec.frames[-1].reshape((4, 2, 2) + GRID2.points)[i0, 0, 0]
    shift = int(round(2.0 / GRID2.spacing[0]))
    np.testing.assert_allclose(
        end, np.roll(np.roll(start, shift, axis=0), -shift, axis=1), atol=1e-10
    )


def test_norm_conserved_and_stride_guarded():
    one = one_particle_state(GRID1, 8.0, 1.5, 1.0, (0.8, 0.6), (1.0, 0.0))
    two = one_particle_state(GRID1, 6.0, 2.0, -0.5, (0.6, 0.8j), (0.0, 1.0))
    state = product_state(GRID2, one, two, mass=1.0)
    assert abs(state.norm() - 1.0) < 1e-12
    rec = evolve_2p(state, t_final=1.0, dt=0.02)
    norms = rec.norms()
    assert np.abs(norms - 1.0).max() < 1e-10


def test_product_state_marginals_match_single_particle_evolutions():
    mass = 1.0
    one = one_particle_state(GRID1, 8.0, 2.0, 0.8, (1.0, 0.0), (1.0, 0.0))
    two = one_particle_state(GRID1, 7.0, 1.8, -0.6, (0.7, 0.4j), (0.6, 0.8))
    state = product_state(GRID2, one, two, mass=mass)
    t_final = 1.0
    rec = evolve_2p(state, t_final, dt=0.0005)

    ref1 = evolve_1d_spinful(one, GRID1, mass, t_final, 0.125)
    ref2 = evolve_1d_spinful(two, GRID1, mass, t_final, 0.125)

    blocks = rec.frames[-1].reshape((4, 2, 2) + GRID2.points)
    dens2p = (np.abs(blocks) ** 2).sum(axis=(0, 1, 2))
    marg1 = dens2p.sum(axis=1) * GRID2.spacing[1]
    marg2 = dens2p.sum(axis=0) * GRID2.spacing[0]
    dens1 = (np.abs(ref1.frames[-1]) ** 2).sum(axis=0)
    dens2 = (np.abs(ref2.frames[-1]) ** 2).sum(axis=0)
    assert np.abs(marg1 - dens1).max() < 1e-8
    assert np.abs(marg2 - dens2).max() < 1e-8


def test_rest_superposition_products_follow_cosine_populations():
    # a = b rest superposition in each factor: sector populations are products
    mass = 1.0
    one = np.zeros((4, 64), dtype=complex)
    one[0] = 1.0 / np.sqrt(16.0)  # R_up only: f = 1, g = 0
    state = product_state(GRID2, one, one, mass=mass)
    t_final = 0.8
    rec = evolve_2p(state, t_final, dt=0.002)
    blocks = rec.frames[-1].reshape((4, 2, 2) + GRID2.points)
    pops = (np.abs(blocks) ** 2).sum(axis=(1, 2, 3, 4)) * GRID2.cell_volume
    c2 = np.cos(mass * t_final) ** 2
    s2 = np.sin(mass * t_final) ** 2
    expected = {"RR": c2 * c2, "RL": c2 * s2, "LR": s2 * c2, "LL": s2 * s2}
    for name, want in expected.items():
        assert abs(pops[SECTORS.index(name)] - want) < 1e-6


def test_sector_velocities_pinned_spin_states():
    # product up x up in sector RR: both particles luminal +1
    block = np.zeros((2, 2), dtype=complex)
    block[0, 0] = 1.0
    v1, v2, rho, deg = sector_velocities(block, SECTORS.index("RR"))
    assert (v1, v2) == (1.0, 1.0) and not deg

    # up x down in RR: particle 2 runs against its chirality sign
    block = np.zeros((2, 2), dtype=complex)
    block[0, 1] = 1.0
    v1, v2, _, _ = sector_velocities(block, SECTORS.index("RR"))
    assert (v1, v2) == (1.0, -1.0)

    # spin singlet: both velocities vanish
    singlet = np.zeros((2, 2), dtype=complex)
    singlet[0, 1] = 1 / np.sqrt(2)
    singlet[1, 0] = -1 / np.sqrt(2)
    v1, v2, _, _ = sector_velocities(singlet, SECTORS.index("RR"))
    assert abs(v1) < 1e-10 and abs(v2) < 1e-10


def test_subluminality_over_random_blocks():
    gen = np.random.default_rng(8)
    blocks = gen.standard_normal((5000, 2, 2)) + 1j * gen.standard_normal((5000, 2, 2))
    for s in range(4):
        v1, v2, _, _ = sector_velocities(blocks, s)
        assert np.abs(v1).max() <= 1 + 1e-12
        assert np.abs(v2).max() <= 1 + 1e-12


def test_rates_factorize_over_product_states():
    # flipping particle 1 in a product state sees factor 1's single rate
    gen = np.random.default_rng(3)
    mass = 1.3
    phi1_r = gen.standard_normal(2) + 1j * gen.standard_normal(2)
    phi1_l = gen.standard_normal(2) + 1j * gen.standard_normal(2)
    phi2_r = gen.standard_normal(2) + 1j * gen.standard_normal(2)

    # sector (R, R) -> (L, R): rate = 2m [Im(<phi1_L|phi1_R> rho2)]^+ / (rho1 rho2)
    block_rr = np.outer(phi1_r, phi2_r)
    block_lr = np.outer(phi1_l, phi2_r)
    rate_joint = sector_flip_rate(block_rr[None], block_lr[None], mass)[0]
    inner1 = np.vdot(phi1_l, phi1_r)
    rho1 = np.sum(np.abs(phi1_r) ** 2)
    rho2 = np.sum(np.abs(phi2_r) ** 2)
    rate_single = 2 * mass * max((inner1 * rho2).imag, 0.0) / (rho1 * rho2)
    assert abs(rate_joint - rate_single) < 1e-12


def test_entangled_flip_changes_other_particles_velocity():
    # Bell-type spin entanglement: flipping c1 moves particle 2's velocity
    up = np.array([1.0, 0.0])
    dn = np.array([0.0, 1.0])
    z1 = np.exp(-0.5 * np.linspace(-2, 2, 64) ** 2)
    z2 = np.exp(-0.5 * (np.linspace(-2, 2, 64) - 0.5) ** 2)
    # sector RR: (up x dn - dn x up)/sqrt2 with asymmetric spatial weights;
    # sector LR: different spin mix -> different <sigma_z(2)>
    block_rr = (np.outer(up, dn) - np.outer(dn, up)) / np.sqrt(2)
    block_lr = (np.outer(up, dn) + 0.5 * np.outer(dn, up)) / np.sqrt(1.25)
    v1_rr, v2_rr, _, _ = sector_velocities(block_rr, SECTORS.index("RR"))
    v1_lr, v2_lr, _, _ = sector_velocities(block_lr, SECTORS.index("LR"))
    assert abs(v2_rr - v2_lr) > 1e-6  # strict change for particle 2


def test_antisymmetry_preserved_under_evolution():
    one = one_particle_state(GRID1, 9.0, 1.5, 0.7, (0.8, 0.6), (1.0, 0.0))
    two = one_particle_state(GRID1, 7.0, 1.5, -0.7, (0.6, 0.8), (0.0, 1.0))
    state = antisymmetrize(product_state(GRID2, one, two, mass=1.0))
    swapped = exchange(state.fields)
    assert np.abs(state.fields + swapped).max() < 1e-12

    rec = evolve_2p(state, t_final=1.0, dt=0.02)
    final = rec.frames[-1].reshape((4, 2, 2) + GRID2.points)
    assert np.abs(final + exchange(final)).max() < 1e-10


def test_sector_balance_residual_small():
    one = one_particle_state(GRID1, 8.0, 2.0, 0.5, (0.9, 0.436), (0.8, 0.6))
    two = one_particle_state(GRID1, 7.0, 1.6, -0.4, (0.7, 0.714), (1.0, 0.0))
    state = antisymmetrize(product_state(GRID2, one, two, mass=1.0))
    rec = evolve_2p(state, t_final=0.02, dt=0.0005)
    assert sector_balance_residual(rec) < 1e-5


def test_provider_flip_targets_and_shapes():
    one = one_particle_state(GRID1, 8.0, 1.5, 0.3, (0.8, 0.6), (1.0, 0.0))
    state = product_state(GRID2, one, one, mass=1.0)
    rec = evolve_2p(state, t_final=0.1, dt=0.01)
    prov = TwoParticleProvider(rec)
    labels = np.arange(4)
    targets = prov.flip_targets(labels)
    assert targets.tolist() == [[2, 1], [3, 0], [0, 3], [1, 2]]
    pos = np.array([[8.0, 8.0], [7.0, 9.0], [6.0, 6.0], [9.0, 7.0]])
    v, deg = prov.velocity(pos, 0.05, labels)
    assert v.shape == (4, 2) and not deg.any()
    assert np.abs(v).max() <= 1 + 1e-12
    rates, occ = prov.flip_rates(pos, 0.05, labels)
    assert rates.shape == (4, 2) and np.all(rates >= 0)
    dens = prov.label_densities(0.05)
    assert dens.shape == (4, 64, 64) and np.all(dens >= 0)


def test_sector_master_equation_pde_tracks_wave_densities():
    mass = 1.0
    one = one_particle_state(GRID1, 8.0, 2.0, 0.4, (1.0, 0.0), (1.0, 0.0))
    two = one_particle_state(GRID1, 7.5, 2.2, -0.3, (1.0, 0.0), (0.6, 0.8))
    state = antisymmetrize(product_state(GRID2, one, two, mass=mass))
    t_final = 0.5
    rec = evolve_2p(state, t_final, dt=0.00025)
    prov = TwoParticleProvider(rec)

    p0 = prov.label_densities(0.0)
    res = integrate_master_equation(
        GRID2, p0, 0.0, t_final, dt=0.002,
        velocity_of=prov.grid_velocities,
        transition_of=prov.grid_transitions,
    )
    rho_end = prov.label_densities(t_final)
    dev = np.abs(res[t_final] - rho_end).max() / rho_end.max()
    assert dev < 1e-6

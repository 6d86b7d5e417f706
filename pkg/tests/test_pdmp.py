"""Trajectory engine checks: interpolation, determinism, jump statistics."""

import numpy as np
import pytest

from zigzag import rng
from zigzag.errors import RecordWindowError, ZigzagError
from zigzag.interpolate import interp_periodic
from zigzag.pdmp import ParticleState, integrate_step, run_ensemble, sample_trajectory
from zigzag.providers import BohmProvider, ChiralProvider1D
from zigzag.spinor import Chirality
from zigzag.waves import ChiralField1D, GridSpec, evolve_1d, gaussian_1d, uniform_1d


def rest_record(a, b, mass=1.0, t_final=10.0, dt=0.01, length=8.0, points=64):
    grid = GridSpec((length,), (points,))
    fa, ga = (a + b) / np.sqrt(2), (a - b) / np.sqrt(2)
    f = np.full(points, fa / np.sqrt(length), dtype=complex)
    g = np.full(points, ga / np.sqrt(length), dtype=complex)
    return evolve_1d(ChiralField1D(grid, f, g), mass, t_final, dt)


# ---------------------------------------------------------------------------
# interpolation


def test_interp_periodic_exact_at_nodes_and_for_cubics():
    grid = GridSpec((8.0,), (64,))
    (z,) = grid.axes()
    k = grid.wavenumbers()[0][2]
    field = np.exp(1j * k * z)[None]
    got = interp_periodic(field, grid, z[:, None])
    np.testing.assert_allclose(got[0], field[0], atol=1e-14)

    # cubic interpolation reproduces smooth fields to ~h^4
    queries = np.linspace(0, 8.0, 97)[:-1][:, None]
    got = interp_periodic(field, grid, queries)
    ref = np.exp(1j * k * queries[:, 0])
    assert np.abs(got[0] - ref).max() < 5e-5


def test_interp_periodic_2d_matches_separable_modes():
    grid = GridSpec((4.0, 8.0), (32, 64))
    ax = grid.axes()
    k0 = grid.wavenumbers()[0][1]
    k1 = grid.wavenumbers()[1][3]
    field = (np.exp(1j * k0 * ax[0])[:, None] * np.exp(1j * k1 * ax[1])[None, :])[None]
    gen = np.random.default_rng(5)
    q = gen.random((50, 2)) * np.array(grid.extents)
    got = interp_periodic(field, grid, q)
    ref = np.exp(1j * (k0 * q[:, 0] + k1 * q[:, 1]))
    assert np.abs(got[0] - ref).max() < 2e-3


# ---------------------------------------------------------------------------
# deterministic limits


def test_massless_trajectories_are_straight_lines():
    grid = GridSpec((16.0,), (128,))
    f0 = gaussian_1d(grid, 8.0, 1.5)
    g0 = gaussian_1d(grid, 8.0, 1.5)
    rec = evolve_1d(ChiralField1D(grid, f0 / np.sqrt(2), g0 / np.sqrt(2)), 0.0, 4.0, 0.1)
    prov = ChiralProvider1D(rec)
    for chirality, sign in ((Chirality.R, 1.0), (Chirality.L, -1.0)):
        traj = sample_trajectory(
            prov,
            ParticleState(np.array([5.0]), chirality, 0.0),
            t_final=4.0,
            seed=11,
            dt=0.05,
        )
        assert len(traj.events) == 0
        expected = np.mod(5.0 + sign * traj.times, 16.0)
        assert np.abs(traj.positions[:, 0] - expected).max() < 1e-9


def test_rest_eigenstate_runs_straight_with_zero_events():
    rec = rest_record(1.0, 0.0, t_final=6.0)
    prov = ChiralProvider1D(rec)
    traj = sample_trajectory(
        prov, ParticleState(np.array([1.0]), Chirality.R, 0.0), 6.0, seed=3, dt=0.01
    )
    assert len(traj.events) == 0
    np.testing.assert_allclose(
        traj.positions[:, 0], np.mod(1.0 + traj.times, 8.0), atol=1e-9
    )
    assert np.all(traj.velocities == 1.0)


def test_zero_rate_step_is_pure_deterministic_integration():
    rec = rest_record(1.0, 0.0, t_final=1.0)
    prov = ChiralProvider1D(rec)
    state = ParticleState(np.array([2.0]), Chirality.R, 0.0)
    gen = rng.stream(5, rng.PURPOSE_JUMP)
    new, event = integrate_step(prov, state, 0.01, gen)
    assert event is None
    np.testing.assert_allclose(new.position, [2.01], atol=1e-12)
    assert new.chirality is Chirality.R


# ---------------------------------------------------------------------------
# reproducibility


def test_same_seed_gives_bit_identical_trajectories():
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=6.0)
    prov = ChiralProvider1D(rec)
    init = ParticleState(np.array([3.0]), Chirality.R, 0.0)
    t1 = sample_trajectory(prov, init, 6.0, seed=42, dt=0.01)
    t2 = sample_trajectory(prov, init, 6.0, seed=42, dt=0.01)
    assert np.array_equal(t1.positions, t2.positions)
    assert np.array_equal(t1.labels, t2.labels)
    assert np.array_equal(t1.events.times, t2.events.times)
    t3 = sample_trajectory(prov, init, 6.0, seed=43, dt=0.01)
    assert not np.array_equal(t1.events.times, t3.events.times)


def test_lockstep_ensemble_equals_individual_trajectories():
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=4.0)
    prov = ChiralProvider1D(rec)
    n = 8
    pos0 = np.linspace(0.5, 7.5, n)[:, None]
    labels0 = np.array([0, 1] * 4)
    out_times = np.arange(0.0, 4.0 + 1e-12, 0.5)
    run = run_ensemble(prov, pos0, labels0, 0.0, 4.0, seed=7, dt=0.01, output_times=out_times)
    for i in range(n):
        single = run_ensemble(
            prov,
            pos0[i : i + 1],
            labels0[i : i + 1],
            0.0,
            4.0,
            seed=7,
            dt=0.01,
            output_times=out_times,
            index_offset=i,
        )
        assert np.array_equal(single.positions[:, 0], run.positions[:, i])
        assert np.array_equal(single.labels[:, 0], run.labels[:, i])
        np.testing.assert_array_equal(
            single.events.times, run.events.select(i).times
        )


def test_chunked_ensemble_equals_whole_run():
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=2.0)
    prov = ChiralProvider1D(rec)
    n = 64
    pos0 = np.linspace(0.1, 7.9, n)[:, None]
    labels0 = np.zeros(n, dtype=int)
    out = np.array([0.0, 2.0])
    whole = run_ensemble(prov, pos0, labels0, 0.0, 2.0, 13, 0.01, out)
    half = 32
    first = run_ensemble(prov, pos0[:half], labels0[:half], 0.0, 2.0, 13, 0.01, out)
    second = run_ensemble(
        prov, pos0[half:], labels0[half:], 0.0, 2.0, 13, 0.01, out, index_offset=half
    )
    merged = np.concatenate([first.positions, second.positions], axis=1)
    assert np.array_equal(whole.positions, merged)


# ---------------------------------------------------------------------------
# jump statistics


def test_rest_superposition_only_allowed_jump_direction():
    # on m t in (0, pi/2) the exchange scalar is negative: only R -> L fires
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=1.5, dt=0.005)
    prov = ChiralProvider1D(rec)
    n = 400
    pos0 = np.linspace(0.0, 8.0, n, endpoint=False)[:, None]
    labels0 = np.zeros(n, dtype=int)  # equilibrium at t=0: all R
    run = run_ensemble(
        prov, pos0, labels0, 0.0, 1.5, seed=2, dt=0.005, output_times=np.array([0.0, 1.5])
    )
    assert len(run.events) > 0
    assert np.all(run.events.old_label == 0)
    assert np.all(run.events.new_label == 1)


def test_trajectory_positions_continuous_across_events():
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=6.0, dt=0.005)
    prov = ChiralProvider1D(rec)
    traj = sample_trajectory(
        prov, ParticleState(np.array([4.0]), Chirality.R, 0.0), 6.0, seed=21, dt=0.005
    )
    assert len(traj.events) > 0
    # velocity flips sign at each event; the sampled path stays continuous
    steps = np.abs(np.diff(traj.positions[:, 0]))
    steps = np.minimum(steps, 8.0 - steps)  # periodic distance
    assert steps.max() < 0.005 + 1e-12


def test_mean_jump_count_matches_rate_quadrature():
    mass = 1.0
    t_final = 10.0
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), mass=mass, t_final=t_final, dt=0.005)
    prov = ChiralProvider1D(rec)
    n = 4000
    pos0 = (np.arange(n) % 64) * 0.125
    labels0 = np.zeros(n, dtype=int)
    run = run_ensemble(
        prov,
        pos0[:, None],
        labels0,
        0.0,
        t_final,
        seed=5,
        dt=0.005,
        output_times=np.array([0.0, t_final]),
    )
    # oracle: in equilibrium the expected flip intensity is m |sin(2mt)|
    ts = np.linspace(0.0, t_final, 2_000_001)
    expected = np.trapezoid(mass * np.abs(np.sin(2 * mass * ts)), ts)
    got = run.jump_counts.mean()
    se = run.jump_counts.std() / np.sqrt(n)
    assert abs(got - expected) < 3.0 * se + 0.02 * expected


def test_halving_dt_keeps_event_statistics_stable():
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=10.0, dt=0.005)
    prov = ChiralProvider1D(rec)
    n = 4000
    pos0 = ((np.arange(n) % 64) * 0.125)[:, None]
    labels0 = np.zeros(n, dtype=int)
    out = np.array([0.0, 10.0])
    mean = {}
    for dt in (0.005, 0.0025):
        run = run_ensemble(prov, pos0, labels0, 0.0, 10.0, 5, dt, out)
        mean[dt] = (run.jump_counts.mean(), run.jump_counts.std() / np.sqrt(n))
    m1, se1 = mean[0.005]
    m2, se2 = mean[0.0025]
    assert abs(m1 - m2) < np.hypot(se1, se2) * 3.0


# ---------------------------------------------------------------------------
# adaptive single-step contract


def test_integrate_step_respects_window_and_stride():
    rec = rest_record(1.0, 0.0, t_final=1.0)
    prov = ChiralProvider1D(rec)
    gen = rng.stream(1, rng.PURPOSE_JUMP)
    with pytest.raises(ZigzagError):
        integrate_step(prov, ParticleState(np.array([0.0]), Chirality.R, 0.0), 0.5, gen)
    with pytest.raises(RecordWindowError):
        integrate_step(prov, ParticleState(np.array([0.0]), Chirality.R, 0.995), 0.01, gen)


def test_integrate_step_flips_and_reports_event():
    # near m t = pi/4 the R -> L rate is ~2m: with many draws a flip happens
    rec = rest_record(1 / np.sqrt(2), 1 / np.sqrt(2), t_final=2.0, dt=0.005)
    prov = ChiralProvider1D(rec)
    gen = rng.stream(77, rng.PURPOSE_JUMP)
    state = ParticleState(np.array([1.0]), Chirality.R, 0.6)
    seen_flip = False
    for _ in range(400):
        state, event = integrate_step(prov, state, 0.005, gen)
        if event is not None:
            t_ev, pos_ev, old, new = event
            assert old == "R" and new == "L"
            assert state.chirality is Chirality.L
            seen_flip = True
            break
        if state.time > 1.5:
            break
    assert seen_flip


def test_run_rejects_dt_larger_than_frame_stride():
    rec = rest_record(1.0, 0.0, t_final=1.0, dt=0.01)
    prov = ChiralProvider1D(rec)
    with pytest.raises(ZigzagError):
        run_ensemble(
            prov,
            np.array([[0.0]]),
            np.array([0]),
            0.0,
            1.0,
            1,
            0.02,
            np.array([0.0, 1.0]),
        )


def test_bohm_provider_tracks_density_flow():
    grid = GridSpec((16.0,), (128,))
    f0 = gaussian_1d(grid, 8.0, 1.5)
    rec = evolve_1d(ChiralField1D(grid, f0, np.zeros_like(f0)), 0.0, 2.0, 0.05)
    prov = BohmProvider(rec)
    traj = sample_trajectory(
        prov,
        ParticleState(np.array([8.0]), Chirality.R, 0.0),
        2.0,
        seed=1,
        dt=0.05,
    )
    # massless right-moving packet: Bohm velocity is +1 where g = 0
    np.testing.assert_allclose(traj.velocities, 1.0, atol=1e-9)

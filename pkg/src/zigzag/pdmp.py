"""Piecewise-deterministic trajectory sampling.

Between flips a trajectory follows dx/dt = v_label(x, t) under a classical
4-stage Runge-Kutta step on the interpolated guidance field.  Flips are drawn
by thinning an inhomogeneous Poisson clock: each substep holds the rate fixed
at its starting state and fires with probability 1 - exp(-rate * dt_sub),
placing the flip at the substep end.  Positions never jump; only the velocity
field switches.

All randomness is counter-based (see rng): trajectory i at substep j always
sees the same uniform, whether it is run alone, inside a lockstep ensemble,
or in index chunks, so ensembles are order-independent and byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import rng
from .errors import RecordWindowError, ZigzagError
from .spinor import Chirality
from .waves import WaveRecord

THINNING_MAX_STEP_FRACTION = 0.1  # target rate * dt_sub for adaptive stepping


class GuidanceProvider(Protocol):
    """What the trajectory engine needs from a dynamical model."""

    label_names: tuple[str, ...]
    record: WaveRecord
    unit_speed: bool

    def velocity(self, pos: np.ndarray, t: float, labels: np.ndarray):
        """Motion velocity (n, d) plus a degenerate-sample mask (n,)."""
        ...

    def flip_rates(self, pos: np.ndarray, t: float, labels: np.ndarray):
        """(rates (n, n_channels), occupied-label density (n,))."""
        ...

    def flip_targets(self, labels: np.ndarray) -> np.ndarray:
        """Label reached through each channel, (n_labels, n_channels)."""
        ...

    def label_densities(self, t: float) -> np.ndarray:
        """Equilibrium densities per label on the grid, (n_labels, *grid)."""
        ...


@dataclass
class ParticleState:
    """PDMP configuration: position, chirality label, time."""

    position: np.ndarray
    chirality: Chirality
    time: float = 0.0


@dataclass
class JumpEvents:
    """Flip events of a run, flat arrays sorted by (trajectory, time)."""

    traj: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    old_label: np.ndarray
    new_label: np.ndarray

    def __len__(self):
        return len(self.times)

    @classmethod
    def empty(cls, dim: int) -> "JumpEvents":
        return cls(
            traj=np.empty(0, dtype=np.int64),
            times=np.empty(0),
            positions=np.empty((0, dim)),
            old_label=np.empty(0, dtype=np.int64),
            new_label=np.empty(0, dtype=np.int64),
        )

    def select(self, traj_index: int) -> "JumpEvents":
        sel = self.traj == traj_index
        return JumpEvents(
            self.traj[sel],
            self.times[sel],
            self.positions[sel],
            self.old_label[sel],
            self.new_label[sel],
        )


@dataclass
class Trajectory:
    """Sampled path of one trajectory plus its flip events."""

    times: np.ndarray
    positions: np.ndarray  # (n_samples, d)
    labels: np.ndarray  # (n_samples,)
    velocities: np.ndarray  # (n_samples, d)
    events: JumpEvents
    label_names: tuple[str, ...]
    seed: int
    index: int


@dataclass
class EnsembleRun:
    """Lockstep result for n trajectories sampled at common output times."""

    times: np.ndarray  # (n_out,)
    positions: np.ndarray  # (n_out, n, d)
    labels: np.ndarray  # (n_out, n)
    velocities: np.ndarray  # (n_out, n, d)
    events: JumpEvents
    jump_counts: np.ndarray  # (n,)
    label_names: tuple[str, ...]
    seed: int
    max_speed_excess: float
    min_density_hit: float
    degenerate_steps: int = 0

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            times=self.times,
            positions=self.positions[:, i],
            labels=self.labels[:, i],
            velocities=self.velocities[:, i],
            events=self.events.select(i),
            label_names=self.label_names,
            seed=self.seed,
            index=i,
        )


def _rk4_advance(provider, pos, t, labels, dt, held_v):
    """One deterministic step; degenerate samples coast on their held velocity."""

    def vel(p, s):
        v, deg = provider.velocity(p, s, labels)
        if np.any(deg):
            v = np.where(deg[:, None], held_v, v)
        return v, deg

    k1, deg1 = vel(pos, t)
    k2, _ = vel(pos + 0.5 * dt * k1, t + 0.5 * dt)
    k3, _ = vel(pos + 0.5 * dt * k2, t + 0.5 * dt)
    k4, _ = vel(pos + dt * k3, t + dt)
    new_pos = pos + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return new_pos, k1, deg1


def run_ensemble(
    provider: GuidanceProvider,
    positions: np.ndarray,
    labels: np.ndarray,
    t_start: float,
    t_final: float,
    seed: int,
    dt: float,
    output_times: np.ndarray,
    index_offset: int = 0,
) -> EnsembleRun:
    """Advance n trajectories in lockstep over a fixed substep schedule.

    output_times must be substep boundaries; dt must divide the window and
    not exceed the record frame stride.  Trajectory i consumes draw
    index_offset + i of the per-substep counter streams, so chunked and
    whole-ensemble runs agree bit for bit.
    """
    record = provider.record
    if not record.covers(t_start, t_final):
        raise RecordWindowError(
            f"window [{t_start}, {t_final}] outside record "
            f"[{record.t_start}, {record.t_end}]"
        )
    if dt > record.stride * (1.0 + 1e-9):
        raise ZigzagError("trajectory dt must not exceed the record frame stride")
    span = t_final - t_start
    n_steps = int(round(span / dt))
    if n_steps <= 0 or not np.isclose(n_steps * dt, span, rtol=1e-9, atol=1e-12):
        raise ZigzagError("dt must evenly divide the sampling window")

    output_times = np.asarray(output_times, dtype=float)
    out_steps = np.round((output_times - t_start) / dt).astype(int)
    if not np.allclose(t_start + out_steps * dt, output_times, rtol=0, atol=1e-9):
        raise ZigzagError("output times must lie on the substep schedule")
    out_lookup = {int(s): i for i, s in enumerate(out_steps)}

    pos = np.array(positions, dtype=float, copy=True)
    if pos.ndim == 1:
        pos = pos[:, None]
    lab = np.array(labels, dtype=np.int64, copy=True)
    n, d = pos.shape
    grid = record.grid

    n_out = len(output_times)
    out_pos = np.empty((n_out, n, d))
    out_lab = np.empty((n_out, n), dtype=np.int64)
    out_vel = np.empty((n_out, n, d))

    ev_traj, ev_time, ev_pos, ev_old, ev_new = [], [], [], [], []
    jump_counts = np.zeros(n, dtype=np.int64)
    held_v = np.zeros((n, d))
    max_excess = 0.0
    min_density = np.inf
    degenerate_steps = 0

    all_labels = np.arange(len(provider.label_names))
    targets = provider.flip_targets(all_labels)

    for k in range(n_steps + 1):
        t = t_start + k * dt

        if k in out_lookup:
            v_now, deg = provider.velocity(pos, t, lab)
            v_now = np.where(deg[:, None], held_v, v_now)
            i_out = out_lookup[k]
            out_pos[i_out] = pos
            out_lab[i_out] = lab
            out_vel[i_out] = v_now
        if k == n_steps:
            break

        rates, occupied = provider.flip_rates(pos, t, lab)
        if occupied.size:
            min_density = min(min_density, float(occupied.min()))

        new_pos, k1, deg1 = _rk4_advance(provider, pos, t, lab, dt, held_v)
        new_pos = grid.wrap(new_pos)
        if provider.unit_speed and (~deg1).any():
            speed = np.linalg.norm(k1[~deg1], axis=-1)
            max_excess = max(max_excess, float(np.abs(speed - 1.0).max()))
        held_v = np.where(deg1[:, None], held_v, k1)
        degenerate_steps += int(deg1.sum())

        total_rate = rates.sum(axis=1)
        p_jump = -np.expm1(-total_rate * dt)
        u = rng.uniforms(seed, rng.PURPOSE_JUMP, k, index_offset + n)[index_offset:]
        firing = u < p_jump
        if firing.any():
            idx = np.nonzero(firing)[0]
            if rates.shape[1] == 1:
                channel = np.zeros(len(idx), dtype=np.int64)
            else:
                uc = rng.uniforms(seed, rng.PURPOSE_CHANNEL, k, index_offset + n)[
                    index_offset:
                ]
                frac = rates[idx] / total_rate[idx, None]
                channel = (uc[idx, None] >= np.cumsum(frac, axis=1)).sum(axis=1)
                channel = np.clip(channel, 0, rates.shape[1] - 1)
            old = lab[idx]
            new = targets[old, channel]
            t_end = t_start + (k + 1) * dt
            ev_traj.append(idx + index_offset)
            ev_time.append(np.full(len(idx), t_end))
            ev_pos.append(new_pos[idx].copy())
            ev_old.append(old.copy())
            ev_new.append(new)
            lab[idx] = new
            jump_counts[idx] += 1

        pos = new_pos

    if ev_traj:
        flat_traj = np.concatenate(ev_traj)
        flat_time = np.concatenate(ev_time)
        order = np.lexsort((flat_time, flat_traj))
        events = JumpEvents(
            traj=flat_traj[order],
            times=flat_time[order],
            positions=np.concatenate(ev_pos)[order],
            old_label=np.concatenate(ev_old)[order],
            new_label=np.concatenate(ev_new)[order],
        )
    else:
        events = JumpEvents.empty(d)

    return EnsembleRun(
        times=output_times,
        positions=out_pos,
        labels=out_lab,
        velocities=out_vel,
        events=events,
        jump_counts=jump_counts,
        label_names=provider.label_names,
        seed=seed,
        max_speed_excess=max_excess,
        min_density_hit=float(min_density) if np.isfinite(min_density) else 0.0,
        degenerate_steps=degenerate_steps,
    )


def sample_trajectory(
    provider: GuidanceProvider,
    init: ParticleState,
    t_final: float,
    seed: int,
    dt: float,
    output_stride: float | None = None,
    index: int = 0,
) -> Trajectory:
    """Sample one trajectory; identical to its slot in a lockstep ensemble."""
    record = provider.record
    if not (init.time < t_final <= record.t_end + 1e-9):
        raise RecordWindowError("need init.time < t_final <= record end")
    stride = output_stride if output_stride is not None else dt
    ratio = int(round(stride / dt))
    if ratio < 1 or not np.isclose(ratio * dt, stride, rtol=1e-9, atol=1e-12):
        raise ZigzagError("output stride must be a multiple of dt")
    n_steps = int(round((t_final - init.time) / dt))
    out_idx = np.arange(0, n_steps + 1, ratio)
    if out_idx[-1] != n_steps:
        out_idx = np.append(out_idx, n_steps)
    output_times = init.time + out_idx * dt

    # single-label providers (deterministic guidance) ignore the chirality
    if init.chirality.value in provider.label_names:
        label0 = provider.label_names.index(init.chirality.value)
    else:
        label0 = 0
    run = run_ensemble(
        provider,
        positions=np.asarray(init.position, dtype=float)[None, :],
        labels=np.array([label0]),
        t_start=init.time,
        t_final=init.time + n_steps * dt,
        seed=seed,
        dt=dt,
        output_times=output_times,
        index_offset=index,
    )
    traj = run.trajectory(0)
    return Trajectory(
        times=traj.times,
        positions=traj.positions,
        labels=traj.labels,
        velocities=traj.velocities,
        events=traj.events,
        label_names=provider.label_names,
        seed=seed,
        index=index,
    )


def integrate_step(
    provider: GuidanceProvider,
    state: ParticleState,
    dt: float,
    rand: np.random.Generator,
):
    """One adaptive PDMP step per the thinning contract.

    The step is subdivided until rate * dt_sub <= 0.1, re-evaluating the rate
    at each substep start; each substep fires a Bernoulli(1 - e^{-rate dt})
    flip placed at the substep end.  Returns (new_state, event_or_None); on a
    flip the step ends early at that substep boundary.
    """
    record = provider.record
    if set(provider.label_names) != {"R", "L"}:
        raise ZigzagError("integrate_step works on two-chirality providers")
    if dt > record.stride * (1.0 + 1e-9):
        raise ZigzagError("dt must not exceed the record frame stride")
    if not record.covers(state.time, state.time + dt):
        raise RecordWindowError("step leaves the record window")

    label = provider.label_names.index(state.chirality.value)
    pos = np.asarray(state.position, dtype=float)[None, :]
    lab = np.array([label])
    t = state.time
    remaining = dt
    held = np.zeros_like(pos)

    while remaining > 1e-15:
        rates, _ = provider.flip_rates(pos, t, lab)
        total = float(rates.sum())
        n_sub = max(1, int(np.ceil(total * remaining / THINNING_MAX_STEP_FRACTION)))
        dt_sub = remaining / n_sub
        new_pos, k1, deg = _rk4_advance(provider, pos, t, lab, dt_sub, held)
        new_pos = record.grid.wrap(new_pos)
        held = np.where(deg[:, None], held, k1)
        fire = total > 0 and rand.random() < -np.expm1(-total * dt_sub)
        t += dt_sub
        remaining -= dt_sub
        pos = new_pos
        if fire:
            if rates.shape[1] == 1:
                channel = 0
            else:
                frac = np.cumsum(rates[0]) / total
                channel = min(
                    int(np.searchsorted(frac, rand.random())), rates.shape[1] - 1
                )
            new_label = int(provider.flip_targets(np.array([label]))[0, channel])
            new_name = provider.label_names[new_label]
            new_state = ParticleState(
                position=pos[0].copy(), chirality=Chirality(new_name), time=t
            )
            event = (t, pos[0].copy(), state.chirality.value, new_name)
            return new_state, event

    new_state = ParticleState(position=pos[0].copy(), chirality=state.chirality, time=t)
    return new_state, None

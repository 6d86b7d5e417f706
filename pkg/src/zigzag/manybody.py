"""Two-particle zig-zag dynamics on a 1D grid with full spin structure.

Each chirality sector c = (c1, c2) carries a four-component spin block over
(z1, z2).  The evolution Strang-splits exact spectral transport (particle i
advects at s(c_i) times its spin-z sign) against the exact mass rotation that
mixes the four sectors; both sub-steps are unitary, so the norm is conserved
to rounding.

Velocities are s(c_i) <sigma_z^(i)> per particle, bounded by the light speed
and below it for spin-mixed blocks; flip rates reuse the minimal prescription
with one channel per particle, treated as competing clocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError, NumericalError, ZigzagError
from .guidance import DENSITY_FLOOR_FRACTION, RATE_CAP_FACTOR
from .interpolate import RecordSampler
from .waves import GridSpec, WaveRecord, _check_record_budget, _frame_count

SECTORS = ("RR", "RL", "LR", "LL")  # index: 2*c1 + c2, with R = 0, L = 1
SPINS = ("uu", "ud", "du", "dd")  # index: 2*a1 + a2, with up = 0, down = 1
COMPONENTS = tuple(f"{s}_{a}" for s in SECTORS for a in SPINS)

_FLIP_FIRST = 2  # XOR masks on the sector index
_FLIP_SECOND = 1


def sector_signs(sector: int) -> tuple[int, int]:
    """(s(c1), s(c2)) for a sector index."""
    return 1 - 2 * (sector >> 1), 1 - 2 * (sector & 1)


@dataclass
class SectorField2P:
    """Initial data: (4 sectors, 2 spin1, 2 spin2, N1, N2) complex block."""

    grid: GridSpec
    fields: np.ndarray
    mass: float

    def __post_init__(self):
        if self.grid.dim != 2:
            raise GridError("SectorField2P needs a 2D (z1, z2) grid")
        self.fields = np.asarray(self.fields, dtype=complex)
        expected = (4, 2, 2) + self.grid.points
        if self.fields.shape != expected:
            raise ZigzagError(f"fields must have shape {expected}")
        if not np.all(np.isfinite(self.fields.view(float))):
            raise NumericalError("non-finite sector fields")

    def norm(self) -> float:
        return float(
            np.sum(np.abs(self.fields) ** 2) * self.grid.cell_volume
        )


def product_state(
    grid: GridSpec, one: np.ndarray, two: np.ndarray, mass: float
) -> SectorField2P:
    """Tensor product of two single-particle spin-full chiral states.

    one, two: (4, N) arrays with components (R_up, R_dn, L_up, L_dn) on each
    particle's axis.
    """
    fields = np.empty((4, 2, 2) + grid.points, dtype=complex)
    for c1 in range(2):
        for c2 in range(2):
            for a1 in range(2):
                for a2 in range(2):
                    fields[2 * c1 + c2, a1, a2] = np.outer(
                        one[2 * c1 + a1], two[2 * c2 + a2]
                    )
    return SectorField2P(grid, fields, mass)


def exchange(fields: np.ndarray) -> np.ndarray:
    """Simultaneous exchange of positions, spins and sector labels."""
    out = np.empty_like(fields)
    for s in range(4):
        swapped_sector = ((s & 1) << 1) | (s >> 1)
        for a1 in range(2):
            for a2 in range(2):
                out[s, a1, a2] = fields[swapped_sector, a2, a1].T
    return out


def antisymmetrize(state: SectorField2P) -> SectorField2P:
    anti = state.fields - exchange(state.fields)
    norm = np.sqrt(np.sum(np.abs(anti) ** 2) * state.grid.cell_volume)
    if norm == 0:
        raise ZigzagError("state is symmetric; antisymmetric part vanishes")
    return SectorField2P(state.grid, anti / norm, state.mass)


def evolve_2p(state: SectorField2P, t_final: float, dt: float) -> WaveRecord:
    """Strang-split evolution; frames stored every frame_stride = dt.

    Sub-steps are exact: spectral transport along the sector/spin light-cone
    directions, and the closed-form sector rotation
    exp(-i m dt (X1 + X2)) built from cos/sin pairs.
    """
    grid = state.grid
    n_frames = _frame_count(t_final, dt)
    _check_record_budget(n_frames + 1, 16, grid.cells)

    k1 = grid.wavenumbers()[0][:, None]
    k2 = grid.wavenumbers()[1][None, :]

    # transport phase for half a step, per (sector, spin1, spin2)
    half = np.empty((4, 2, 2) + grid.points, dtype=complex)
    for s in range(4):
        s1, s2 = sector_signs(s)
        for a1 in range(2):
            for a2 in range(2):
                v1 = s1 * (1 - 2 * a1)
                v2 = s2 * (1 - 2 * a2)
                half[s, a1, a2] = np.exp(-1j * (v1 * k1 + v2 * k2) * (dt / 2.0))

    cos = np.cos(state.mass * dt)
    sin = np.sin(state.mass * dt)

    frames = np.empty((n_frames + 1, 16) + grid.points, dtype=complex)
    frames[0] = state.fields.reshape((16,) + grid.points)

    fk = np.fft.fft2(state.fields, axes=(-2, -1))
    for j in range(1, n_frames + 1):
        fk = fk * half
        f = np.fft.ifft2(fk, axes=(-2, -1))
        # rotate sectors: X2 mixes c2 (index^1), X1 mixes c1 (index^2)
        f = cos * f - 1j * sin * f[[1, 0, 3, 2]]
        f = cos * f - 1j * sin * f[[2, 3, 0, 1]]
        fk = np.fft.fft2(f, axes=(-2, -1))
        fk = fk * half
        frames[j] = np.fft.ifft2(fk, axes=(-2, -1)).reshape((16,) + grid.points)

    record = WaveRecord(
        kind="two_particle",
        grid=grid,
        times=np.arange(n_frames + 1) * dt,
        frames=frames,
        mass=state.mass,
        components=COMPONENTS,
        meta={"sectors": list(SECTORS), "spins": list(SPINS)},
    )
    record.validate_stride()
    return record


# ---------------------------------------------------------------------------
# pointwise guidance on sector blocks


def sector_velocities(block: np.ndarray, sector: int, floor: float = 0.0):
    """Per-particle velocities of one sector block.

    block: (..., 2, 2) spin amplitudes at each evaluation point.
    Returns (v1, v2, rho, degenerate).
    """
    dens = np.abs(block) ** 2
    rho = dens.sum(axis=(-2, -1))
    s1, s2 = sector_signs(sector)
    mz1 = dens[..., 0, :].sum(axis=-1) - dens[..., 1, :].sum(axis=-1)
    mz2 = dens[..., :, 0].sum(axis=-1) - dens[..., :, 1].sum(axis=-1)
    deg = rho <= floor
    safe = np.where(deg, 1.0, rho)
    v1 = np.where(deg, 0.0, s1 * mz1 / safe)
    v2 = np.where(deg, 0.0, s2 * mz2 / safe)
    return v1, v2, rho, deg


def sector_flip_rate(
    block_from: np.ndarray,
    block_to: np.ndarray,
    mass: float,
    floor: float = 0.0,
    rate_cap: float | None = None,
):
    """Minimal rate for one flip channel: 2m [Im <to|from>]^+ / rho_from."""
    cap = RATE_CAP_FACTOR * mass if rate_cap is None else rate_cap
    inner = np.sum(np.conj(block_to) * block_from, axis=(-2, -1))
    rho = np.sum(np.abs(block_from) ** 2, axis=(-2, -1))
    deg = rho <= floor
    raw = 2.0 * mass * np.maximum(inner.imag, 0.0)
    rate = raw / np.where(deg, 1.0, rho)
    rate = np.where(deg, np.where(raw > 0, cap, 0.0), np.minimum(rate, cap))
    return rate


class TwoParticleProvider:
    """Guidance provider over a two_particle record: 4 labels, 2 channels."""

    label_names = SECTORS
    unit_speed = False

    def __init__(self, record: WaveRecord, floor: float | None = None,
                 rate_cap: float | None = None):
        if record.kind != "two_particle":
            raise ZigzagError("TwoParticleProvider needs a two_particle record")
        self.record = record
        self.sampler = RecordSampler(record)
        mean_density = float(
            np.sum(np.abs(record.frames[0]) ** 2, axis=0).mean()
        )
        self.floor = (
            DENSITY_FLOOR_FRACTION * mean_density if floor is None else floor
        )
        self.rate_cap = (
            RATE_CAP_FACTOR * max(record.mass, 1e-300)
            if rate_cap is None
            else rate_cap
        )

    def _blocks(self, pos, t):
        """All sector blocks at the sample points: (4, 2, 2, n)."""
        comps = self.sampler.sample(pos, t)  # (16, n)
        return comps.reshape(4, 2, 2, -1)

    def velocity(self, pos, t, labels):
        blocks = np.moveaxis(self._blocks(pos, t), -1, 0)  # (n, 4, 2, 2)
        n = len(labels)
        v = np.empty((n, 2))
        deg = np.empty(n, dtype=bool)
        for s in range(4):
            sel = labels == s
            if not sel.any():
                continue
            v1, v2, _, d = sector_velocities(blocks[sel, s], s, self.floor)
            v[sel, 0] = v1
            v[sel, 1] = v2
            deg[sel] = d
        return v, deg

    def flip_rates(self, pos, t, labels):
        blocks = np.moveaxis(self._blocks(pos, t), -1, 0)  # (n, 4, 2, 2)
        n = len(labels)
        rates = np.empty((n, 2))
        occupied = np.empty(n)
        mass = self.record.mass
        for s in range(4):
            sel = labels == s
            if not sel.any():
                continue
            own = blocks[sel, s]
            occupied[sel] = np.sum(np.abs(own) ** 2, axis=(-2, -1))
            for ch, mask in enumerate((_FLIP_FIRST, _FLIP_SECOND)):
                rates[sel, ch] = sector_flip_rate(
                    own, blocks[sel, s ^ mask], mass, self.floor, self.rate_cap
                )
        return rates, occupied

    def flip_targets(self, labels):
        labels = np.asarray(labels)
        return np.stack([labels ^ _FLIP_FIRST, labels ^ _FLIP_SECOND], axis=1)

    def label_densities(self, t):
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        return (
            np.abs(frame.reshape((4, 4) + self.record.grid.points)) ** 2
        ).sum(axis=1)

    # --- grid-level guidance for the sector master equation ---

    def grid_velocities(self, t):
        """(4, 2, N1, N2): per-sector per-particle velocity fields."""
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        blocks = frame.reshape((4, 2, 2) + self.record.grid.points)
        out = np.empty((4, 2) + self.record.grid.points)
        for s in range(4):
            block = np.moveaxis(blocks[s], (0, 1), (-2, -1))
            v1, v2, _, _ = sector_velocities(block, s, self.floor)
            out[s, 0] = v1
            out[s, 1] = v2
        return out

    def grid_transitions(self, t):
        """(4, 4, N1, N2): sector transition rate fields."""
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        blocks = frame.reshape((4, 2, 2) + self.record.grid.points)
        moved = np.moveaxis(blocks, (1, 2), (-2, -1))  # (4, N1, N2, 2, 2)
        out = np.zeros((4, 4) + self.record.grid.points)
        for s in range(4):
            for mask in (_FLIP_FIRST, _FLIP_SECOND):
                out[s, s ^ mask] = sector_flip_rate(
                    moved[s], moved[s ^ mask], self.record.mass,
                    self.floor, self.rate_cap,
                )
        return out


def sector_balance_residual(record: WaveRecord) -> float:
    """Max residual of the sector continuity balance, by substitution.

    d_t rho_c is evaluated with centered frame differences; the flux
    divergence is spectral; the source is the signed exchange between each
    sector and its two flip partners.
    """
    if len(record.times) < 3:
        raise ZigzagError("need at least three frames")
    grid = record.grid
    blocks = record.frames.reshape((len(record.times), 4, 2, 2) + grid.points)
    mass = record.mass
    k1 = grid.wavenumbers()[0][:, None]
    k2 = grid.wavenumbers()[1][None, :]
    dt = record.stride

    worst = 0.0
    dens = (np.abs(blocks) ** 2).sum(axis=(2, 3))  # (nt, 4, N1, N2)
    for s in range(4):
        s1, s2 = sector_signs(s)
        spin_dens = np.abs(blocks[:, s]) ** 2
        mz1 = spin_dens[:, 0].sum(axis=1) - spin_dens[:, 1].sum(axis=1)
        mz2 = spin_dens[:, :, 0].sum(axis=1) - spin_dens[:, :, 1].sum(axis=1)
        flux1 = s1 * mz1
        flux2 = s2 * mz2
        div = np.fft.ifft(1j * k1[None] * np.fft.fft(flux1, axis=1), axis=1).real
        div += np.fft.ifft(
            1j * k2[None] * np.fft.fft(flux2, axis=2), axis=2
        ).real
        source = np.zeros_like(div)
        for mask in (_FLIP_FIRST, _FLIP_SECOND):
            inner = np.sum(
                np.conj(blocks[:, s]) * blocks[:, s ^ mask], axis=(1, 2)
            )
            source += 2.0 * mass * inner.imag
        ddt = (dens[2:, s] - dens[:-2, s]) / (2.0 * dt)
        res = ddt + div[1:-1] - source[1:-1]
        worst = max(worst, float(np.abs(res).max()))
    return worst

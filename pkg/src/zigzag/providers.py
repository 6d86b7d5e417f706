"""Guidance providers for the relativistic single-particle records.

A provider adapts one WaveRecord to the trajectory engine: it interpolates
the stored spinor at requested points (cubic in space, linear in time) and
derives velocities and minimal flip rates from the *interpolated* spinor, so
unit speed and rate minimality hold exactly at every sample.
"""

from __future__ import annotations

import numpy as np

from .errors import ZigzagError
from .guidance import DENSITY_FLOOR_FRACTION, RATE_CAP_FACTOR, jump_rates
from .interpolate import RecordSampler
from .spinor import chiral_decompose, weyl_density, weyl_sigma_vector
from .waves import WaveRecord

R, L = 0, 1  # label indices shared by the two-chirality providers


class _TwoLabelFlips:
    """Single flip channel between two labels."""

    def flip_targets(self, labels: np.ndarray) -> np.ndarray:
        return (1 - np.asarray(labels))[:, None]


def _mean_density(record: WaveRecord) -> float:
    dens = np.sum(np.abs(record.frames[0]) ** 2, axis=0)
    return float(dens.mean())


class ChiralProvider1D(_TwoLabelFlips):
    """Zig-zag guidance on a 1+1D chiral record: velocity +-1, rates from F.

    With spin frozen up, phi_R = (f, 0) and phi_L = (g, 0); the velocities
    are exactly +-1 along the grid axis regardless of the field values.
    """

    label_names = ("R", "L")
    unit_speed = True

    def __init__(self, record: WaveRecord, floor: float | None = None,
                 rate_cap: float | None = None):
        if record.kind != "dirac1d":
            raise ZigzagError("ChiralProvider1D needs a dirac1d record")
        self.record = record
        self.sampler = RecordSampler(record)
        self.floor = (
            DENSITY_FLOOR_FRACTION * _mean_density(record) if floor is None else floor
        )
        self.rate_cap = (
            RATE_CAP_FACTOR * max(record.mass, 1e-300) if rate_cap is None else rate_cap
        )

    def velocity(self, pos, t, labels):
        n = len(labels)
        v = np.where(labels == R, 1.0, -1.0)[:, None]
        return v, np.zeros(n, dtype=bool)

    def _rates_pair(self, pos, t):
        f, g = self.sampler.sample(pos, t)
        zero = np.zeros_like(f)
        phi_r = np.stack([f, zero], axis=-1)
        phi_l = np.stack([g, zero], axis=-1)
        t_lr, t_rl = jump_rates(
            phi_r, phi_l, self.record.mass, self.floor, self.rate_cap
        )
        return t_lr, t_rl, np.abs(f) ** 2, np.abs(g) ** 2

    def flip_rates(self, pos, t, labels):
        t_lr, t_rl, rho_r, rho_l = self._rates_pair(pos, t)
        out = np.where(labels == R, t_rl, t_lr)[:, None]
        occupied = np.where(labels == R, rho_r, rho_l)
        return out, occupied

    def label_densities(self, t):
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        return np.abs(frame) ** 2


class DiracProvider3D(_TwoLabelFlips):
    """Zig-zag guidance on a free 3+1D Dirac record."""

    label_names = ("R", "L")
    unit_speed = True

    def __init__(self, record: WaveRecord, floor: float | None = None,
                 rate_cap: float | None = None):
        if record.kind != "dirac3d":
            raise ZigzagError("DiracProvider3D needs a dirac3d record")
        self.record = record
        self.sampler = RecordSampler(record)
        self.floor = (
            DENSITY_FLOOR_FRACTION * _mean_density(record) if floor is None else floor
        )
        self.rate_cap = (
            RATE_CAP_FACTOR * max(record.mass, 1e-300) if rate_cap is None else rate_cap
        )

    def _chiral_at(self, pos, t):
        psi = self.sampler.sample(pos, t).T  # (n, 4)
        return chiral_decompose(psi)

    def velocity(self, pos, t, labels):
        phi_r, phi_l = self._chiral_at(pos, t)
        rho_r = weyl_density(phi_r)
        rho_l = weyl_density(phi_l)
        occupied_r = labels == R
        rho = np.where(occupied_r, rho_r, rho_l)
        deg = rho <= self.floor
        safe = np.where(deg, 1.0, rho)
        bloch = np.where(
            occupied_r[:, None],
            weyl_sigma_vector(phi_r),
            -weyl_sigma_vector(phi_l),
        )
        v = bloch / safe[:, None]
        v = np.where(deg[:, None], 0.0, v)
        return v, deg

    def flip_rates(self, pos, t, labels):
        phi_r, phi_l = self._chiral_at(pos, t)
        t_lr, t_rl = jump_rates(
            phi_r, phi_l, self.record.mass, self.floor, self.rate_cap
        )
        out = np.where(labels == R, t_rl, t_lr)[:, None]
        occupied = np.where(labels == R, weyl_density(phi_r), weyl_density(phi_l))
        return out, occupied

    def label_densities(self, t):
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        psi = np.moveaxis(frame, 0, -1)
        phi_r, phi_l = chiral_decompose(psi)
        return np.stack([weyl_density(phi_r), weyl_density(phi_l)])


class BohmProvider:
    """Deterministic Dirac guidance (no flips), for side-by-side comparison."""

    label_names = ("D",)
    unit_speed = False

    def __init__(self, record: WaveRecord, floor: float | None = None):
        if record.kind not in ("dirac1d", "dirac3d"):
            raise ZigzagError("BohmProvider needs a Dirac record")
        self.record = record
        self.sampler = RecordSampler(record)
        self.floor = (
            DENSITY_FLOOR_FRACTION * _mean_density(record) if floor is None else floor
        )

    def velocity(self, pos, t, labels):
        comps = self.sampler.sample(pos, t)
        if self.record.kind == "dirac1d":
            f, g = comps
            rho = np.abs(f) ** 2 + np.abs(g) ** 2
            flux = np.abs(f) ** 2 - np.abs(g) ** 2
            deg = rho <= self.floor
            v = np.where(deg, 0.0, flux / np.where(deg, 1.0, rho))[:, None]
            return v, deg
        psi = comps.T
        from .spinor import dirac_alpha_vector, dirac_density

        rho = dirac_density(psi)
        deg = rho <= self.floor
        v = dirac_alpha_vector(psi) / np.where(deg, 1.0, rho)[:, None]
        v = np.where(deg[:, None], 0.0, v)
        return v, deg

    def flip_rates(self, pos, t, labels):
        comps = self.sampler.sample(pos, t)
        rho = np.sum(np.abs(comps) ** 2, axis=0)
        return np.zeros((len(labels), 1)), rho

    def flip_targets(self, labels):
        return np.asarray(labels)[:, None]

    def label_densities(self, t):
        k, w = self.record.frame_weight(t)
        frame = (1.0 - w) * self.record.frames[int(k)] + w * self.record.frames[
            int(k) + 1
        ]
        return np.sum(np.abs(frame) ** 2, axis=0)[None]

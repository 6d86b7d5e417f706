"""Periodic field interpolation: cubic Lagrange in space, linear in time.

Trajectories always interpolate the *spinor* and derive velocities from the
interpolated value, never the other way around, so algebraic facts about the
guidance fields (unit norm, rate minimality) survive interpolation exactly.
"""

from __future__ import annotations

import numpy as np

from .waves import GridSpec, WaveRecord

_OFFSETS = np.array([-1, 0, 1, 2])


def _cubic_weights(frac: np.ndarray) -> np.ndarray:
    """Four-point Lagrange weights for stencil offsets (-1, 0, 1, 2).

    frac is the fractional cell coordinate in [0, 1); returns shape (4, n).
    """
    x = frac
    return np.stack(
        [
            -x * (x - 1.0) * (x - 2.0) / 6.0,
            (x * x - 1.0) * (x - 2.0) / 2.0,
            -x * (x + 1.0) * (x - 2.0) / 2.0,
            x * (x * x - 1.0) / 6.0,
        ]
    )


def interp_periodic(fields: np.ndarray, grid: GridSpec, positions: np.ndarray) -> np.ndarray:
    """Cubic interpolation of stacked fields at arbitrary positions.

    fields: (C, *grid.points); positions: (n, dim) in box coordinates.
    Returns (C, n).
    """
    positions = np.atleast_2d(positions)
    n = positions.shape[0]
    ncomp = fields.shape[0]
    flat = fields.reshape(ncomp, -1)

    idx = []
    wts = []
    for ax in range(grid.dim):
        h = grid.spacing[ax]
        npts = grid.points[ax]
        u = positions[:, ax] / h
        base = np.floor(u).astype(np.int64)
        frac = u - base
        idx.append(np.mod(base[None, :] + _OFFSETS[:, None], npts))
        wts.append(_cubic_weights(frac))

    strides = np.cumprod((grid.points + (1,))[::-1])[::-1][1:]  # row-major

    out = np.zeros((ncomp, n), dtype=fields.dtype)
    if grid.dim == 1:
        for o in range(4):
            out += wts[0][o] * flat[:, idx[0][o]]
    elif grid.dim == 2:
        for ox in range(4):
            row = idx[0][ox] * strides[0]
            wx = wts[0][ox]
            for oy in range(4):
                out += (wx * wts[1][oy]) * flat[:, row + idx[1][oy]]
    else:
        for ox in range(4):
            rowx = idx[0][ox] * strides[0]
            wx = wts[0][ox]
            for oy in range(4):
                rowy = rowx + idx[1][oy] * strides[1]
                wxy = wx * wts[1][oy]
                for oz in range(4):
                    out += (wxy * wts[2][oz]) * flat[:, rowy + idx[2][oz]]
    return out


class RecordSampler:
    """Spinor samples from a WaveRecord at (positions, scalar time)."""

    def __init__(self, record: WaveRecord):
        self.record = record

    def sample(self, positions: np.ndarray, t: float) -> np.ndarray:
        """Interpolated components, shape (C, n)."""
        rec = self.record
        k, w = rec.frame_weight(t)
        k = int(k)
        w = float(w)
        lo = interp_periodic(rec.frames[k], rec.grid, positions)
        if w <= 0.0:
            return lo
        hi = interp_periodic(rec.frames[k + 1], rec.grid, positions)
        return (1.0 - w) * lo + w * hi

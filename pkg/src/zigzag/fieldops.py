"""Spectral vector calculus on periodic grids.

Vector fields always carry three cartesian components; a 1D grid lives along
z and a 2D grid spans (y, z), so derivatives along the missing axes vanish.
This keeps curls and cross products well defined in reduced dimensions.
"""

from __future__ import annotations

import numpy as np

from .errors import GridError
from .waves import GridSpec

# grid axis -> cartesian component (x=0, y=1, z=2)
AXIS_MAP = {1: (2,), 2: (1, 2), 3: (0, 1, 2)}


def cartesian_axes(grid: GridSpec) -> tuple[int, ...]:
    return AXIS_MAP[grid.dim]


def partial(field: np.ndarray, grid: GridSpec, grid_axis: int) -> np.ndarray:
    """Spectral derivative along one grid axis (grid axes trail the shape)."""
    k = grid.wavenumbers()[grid_axis]
    ax = field.ndim - grid.dim + grid_axis
    shape = [1] * field.ndim
    shape[ax] = grid.points[grid_axis]
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(field, axis=ax), axis=ax)
    if np.isrealobj(field):
        return out.real
    return out


def grad(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Cartesian gradient, shape (3, *field.shape)."""
    out = np.zeros((3,) + field.shape, dtype=complex if np.iscomplexobj(field) else float)
    for g_ax, c_ax in enumerate(cartesian_axes(grid)):
        out[c_ax] = partial(field, grid, g_ax)
    return out


def div(vec: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Divergence of a (3, *grid) cartesian vector field."""
    if vec.shape[0] != 3:
        raise GridError("vector fields carry three cartesian components")
    out = np.zeros(vec.shape[1:], dtype=complex if np.iscomplexobj(vec) else float)
    for g_ax, c_ax in enumerate(cartesian_axes(grid)):
        out = out + partial(vec[c_ax], grid, g_ax)
    return out


def curl(vec: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Curl of a (3, *grid) cartesian vector field."""
    if vec.shape[0] != 3:
        raise GridError("vector fields carry three cartesian components")
    d = {}
    for g_ax, c_ax in enumerate(cartesian_axes(grid)):
        for comp in range(3):
            d[(c_ax, comp)] = partial(vec[comp], grid, g_ax)

    def pd(c_ax, comp):
        return d.get((c_ax, comp), np.zeros(vec.shape[1:]))

    return np.stack(
        [
            pd(1, 2) - pd(2, 1),
            pd(2, 0) - pd(0, 2),
            pd(0, 1) - pd(1, 0),
        ]
    )


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product along the leading (component) axis."""
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a * b).sum(axis=0)

"""Guiding-wave solvers on periodic grids.

Two relativistic solvers live here, both exact per momentum mode:

* the 1+1-dimensional chiral pair (f, g), obtained from the coupled Weyl
  equations by restricting to z-dependence with spin frozen along +z:

      i (d_t + d_z) f = m g,      i (d_t - d_z) g = m f,

  so f advects right and g advects left at the speed of light, with the mass
  rotating amplitude between them;

* the free 3+1-dimensional Dirac equation, advanced per mode k through
  exp(-i (alpha.k + m beta) t) = cos(E t) - i sin(E t) (alpha.k + m beta)/E.

Evolved fields are packaged as WaveRecords: immutable, uniformly strided
frame stacks that the trajectory layer may share across workers, exportable
as flat little-endian binaries with a JSON sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridError, MemoryCapError, NumericalError, ZigzagError
from .spinor import chiral_decompose

# Caps keep desk-scale runs from eating the machine by accident.
MAX_GRID_CELLS = 1 << 22
MAX_RECORD_BYTES = 3 << 30

# Coarsest admissible relative second difference of the stored total density;
# beyond it, linear-in-time interpolation is too lossy for trajectory work.
STRIDE_SMOOTHNESS = 0.15


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: per-axis extent and point count."""

    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.points):
            raise GridError("extents and points must have matching length")
        if len(self.extents) not in (1, 2, 3):
            raise GridError("grid dimension must be 1, 2 or 3")
        for n in self.points:
            if n < 16:
                raise GridError(f"need at least 16 points per axis, got {n}")
            if n & (n - 1):
                raise GridError(f"points per axis must be a power of two, got {n}")
        for ext in self.extents:
            if not (ext > 0 and np.isfinite(ext)):
                raise GridError(f"extent must be positive and finite, got {ext}")
        if self.cells > MAX_GRID_CELLS:
            raise MemoryCapError(
                f"grid has {self.cells} cells, cap is {MAX_GRID_CELLS}"
            )

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(ext / n for ext, n in zip(self.extents, self.points))

    @property
    def cells(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, starting at 0."""
        return [
            np.arange(n) * d for n, d in zip(self.points, self.spacing)
        ]

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumber arrays matching numpy's FFT layout."""
        return [
            2.0 * np.pi * np.fft.fftfreq(n, d=d)
            for n, d in zip(self.points, self.spacing)
        ]

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Wrap positions (trailing axis = grid axis) into the periodic box."""
        return np.mod(x, np.asarray(self.extents))

    def to_dict(self) -> dict:
        return {"extents": list(self.extents), "points": list(self.points)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(tuple(float(x) for x in d["extents"]), tuple(int(n) for n in d["points"]))


@dataclass
class WaveRecord:
    """Time-indexed stack of solved field frames.

    frames has shape (n_times, n_components, *grid.points) and is treated as
    immutable once built.  kind selects the interpretation of the component
    axis ("dirac1d": f, g; "dirac3d": four spinor components; "pauli": two
    spin components; "two_particle": 4 sectors x 4 spin pairs).
    """

    kind: str
    grid: GridSpec
    times: np.ndarray
    frames: np.ndarray
    mass: float
    components: tuple[str, ...]
    meta: dict = field(default_factory=dict)
    interpolation: str = "cubic-space, linear-time"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ZigzagError("a record needs at least two frames")
        dt = np.diff(self.times)
        if not np.all(dt > 0):
            raise ZigzagError("frame times must be strictly increasing")
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ZigzagError("frame times must be uniformly spaced")
        expected = (len(self.times), len(self.components)) + self.grid.points
        if self.frames.shape != expected:
            raise ZigzagError(
                f"frame array shape {self.frames.shape} != expected {expected}"
            )

    @property
    def stride(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def covers(self, t0: float, t1: float) -> bool:
        eps = 1e-9 * max(1.0, abs(self.t_end))
        return self.t_start - eps <= t0 and t1 <= self.t_end + eps

    def frame_weight(self, t: float | np.ndarray):
        """Index of the frame at or below t plus the linear blend weight."""
        u = (np.asarray(t) - self.t_start) / self.stride
        k = np.clip(np.floor(u).astype(int), 0, len(self.times) - 2)
        return k, u - k

    def densities(self) -> np.ndarray:
        """Total density per frame, shape (n_times, *grid.points)."""
        return np.sum(np.abs(self.frames) ** 2, axis=1)

    def norms(self) -> np.ndarray:
        """Total norm integral per frame."""
        dens = self.densities()
        return dens.reshape(len(self.times), -1).sum(axis=1) * self.grid.cell_volume

    def validate_stride(self):
        """Reject strides too coarse for linear-in-time interpolation."""
        dens = self.densities()
        if len(self.times) < 3:
            return
        second = np.abs(dens[2:] - 2.0 * dens[1:-1] + dens[:-2]).max()
        scale = np.abs(dens).max()
        if scale > 0 and second / scale > STRIDE_SMOOTHNESS:
            raise ZigzagError(
                "frame stride too coarse: relative density curvature "
                f"{second / scale:.3g} exceeds {STRIDE_SMOOTHNESS}"
            )


def _check_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr.view(float))):
        raise NumericalError(f"non-finite values in {what}")


def _check_record_budget(n_frames: int, n_comp: int, cells: int):
    nbytes = n_frames * n_comp * cells * 16
    if nbytes > MAX_RECORD_BYTES:
        raise MemoryCapError(
            f"record would take {nbytes} bytes, cap is {MAX_RECORD_BYTES}"
        )


def _frame_count(t_final: float, dt: float) -> int:
    if dt <= 0 or t_final <= 0:
        raise ZigzagError("t_final and dt must be positive")
    n = int(round(t_final / dt))
    if not np.isclose(n * dt, t_final, rtol=1e-9, atol=1e-12):
        raise ZigzagError("t_final must be an integer multiple of dt")
    return n


# ---------------------------------------------------------------------------
# 1+1D chiral pair


@dataclass
class ChiralField1D:
    """Right- and left-handed amplitudes on a 1D grid (spin frozen along +z)."""

    grid: GridSpec
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 1:
            raise GridError("ChiralField1D needs a 1D grid")
        self.f = np.asarray(self.f, dtype=complex)
        self.g = np.asarray(self.g, dtype=complex)
        if self.f.shape != (self.grid.points[0],) or self.g.shape != self.f.shape:
            raise ZigzagError("field arrays must match the grid")
        _check_finite(self.f, "f")
        _check_finite(self.g, "g")


def evolve_1d(initial: ChiralField1D, mass: float, t_final: float, dt: float) -> WaveRecord:
    """Evolve the chiral pair, storing a frame every dt.

    Each momentum mode advances through the exact 2x2 propagator of
    H(k) = k sigma_z + m sigma_x, so the only discretization is the grid
    itself; dt is a frame stride, not an integration step.
    """
    grid = initial.grid
    if dt > min(grid.spacing) + 1e-15:
        raise ZigzagError("frame stride dt must not exceed the grid spacing")
    n_frames = _frame_count(t_final, dt)
    _check_record_budget(n_frames + 1, 2, grid.cells)

    k = grid.wavenumbers()[0]
    energy = np.hypot(k, mass)
    cos = np.cos(energy * dt)
    snc = dt * np.sinc(energy * dt / np.pi)  # sin(E dt)/E, safe at E = 0
    u11 = cos - 1j * snc * k
    u12 = -1j * snc * mass
    u22 = cos + 1j * snc * k

    frames = np.empty((n_frames + 1, 2, grid.points[0]), dtype=complex)
    fk = np.fft.fft(initial.f)
    gk = np.fft.fft(initial.g)
    frames[0, 0] = initial.f
    frames[0, 1] = initial.g
    for j in range(1, n_frames + 1):
        fk, gk = u11 * fk + u12 * gk, u12 * fk + u22 * gk
        frames[j, 0] = np.fft.ifft(fk)
        frames[j, 1] = np.fft.ifft(gk)

    record = WaveRecord(
        kind="dirac1d",
        grid=grid,
        times=np.arange(n_frames + 1) * dt,
        frames=frames,
        mass=mass,
        components=("f", "g"),
    )
    record.validate_stride()
    return record


# ---------------------------------------------------------------------------
# 3+1D free Dirac


@dataclass
class DiracField3D:
    """Four spinor components over a 3D grid, Dirac-Pauli ordering."""

    grid: GridSpec
    psi: np.ndarray  # (4, Nx, Ny, Nz)

    def __post_init__(self):
        if self.grid.dim != 3:
            raise GridError("DiracField3D needs a 3D grid")
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.shape != (4,) + self.grid.points:
            raise ZigzagError("spinor array must be (4, Nx, Ny, Nz)")
        _check_finite(self.psi, "psi")


def _sigma_dot_k(kx, ky, kz, chi1, chi2):
    """(sigma . k) applied to the 2-spinor (chi1, chi2) of mode arrays."""
    return (
        kz * chi1 + (kx - 1j * ky) * chi2,
        (kx + 1j * ky) * chi1 - kz * chi2,
    )


def evolve_3d(initial: DiracField3D, mass: float, t_final: float, dt: float) -> WaveRecord:
    """Free Dirac evolution, exact per momentum mode, frame every dt."""
    grid = initial.grid
    if dt > min(grid.spacing) + 1e-15:
        raise ZigzagError("frame stride dt must not exceed the grid spacing")
    n_frames = _frame_count(t_final, dt)
    _check_record_budget(n_frames + 1, 4, grid.cells)

    ks = grid.wavenumbers()
    kx, ky, kz = np.meshgrid(*ks, indexing="ij")
    energy = np.sqrt(kx**2 + ky**2 + kz**2 + mass**2)
    cos = np.cos(energy * dt)
    snc = dt * np.sinc(energy * dt / np.pi)

    frames = np.empty((n_frames + 1, 4) + grid.points, dtype=complex)
    frames[0] = initial.psi
    psik = np.stack([np.fft.fftn(initial.psi[c]) for c in range(4)])
    for j in range(1, n_frames + 1):
        up1, up2, lo1, lo2 = psik
        s_lo1, s_lo2 = _sigma_dot_k(kx, ky, kz, lo1, lo2)
        s_up1, s_up2 = _sigma_dot_k(kx, ky, kz, up1, up2)
        h1 = mass * up1 + s_lo1
        h2 = mass * up2 + s_lo2
        h3 = s_up1 - mass * lo1
        h4 = s_up2 - mass * lo2
        psik = np.stack(
            [
                cos * up1 - 1j * snc * h1,
                cos * up2 - 1j * snc * h2,
                cos * lo1 - 1j * snc * h3,
                cos * lo2 - 1j * snc * h4,
            ]
        )
        for c in range(4):
            frames[j, c] = np.fft.ifftn(psik[c])

    record = WaveRecord(
        kind="dirac3d",
        grid=grid,
        times=np.arange(n_frames + 1) * dt,
        frames=frames,
        mass=mass,
        components=("psi1", "psi2", "psi3", "psi4"),
    )
    record.validate_stride()
    return record


def evolve_1d_spinful(
    initial: np.ndarray, grid: GridSpec, mass: float, t_final: float, dt: float
) -> WaveRecord:
    """z-restricted Dirac evolution with live spin, exact per mode.

    initial has components (R_up, R_dn, L_up, L_dn) over the 1D grid.  Each
    momentum mode splits into two 2x2 blocks: (R_up, L_up) sees
    H = k sigma_z + m sigma_x and (R_dn, L_dn) sees the same with k -> -k.
    """
    if grid.dim != 1:
        raise GridError("evolve_1d_spinful needs a 1D grid")
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (4, grid.points[0]):
        raise ZigzagError("initial must be (4, N): R_up, R_dn, L_up, L_dn")
    _check_finite(initial, "initial")
    if dt > min(grid.spacing) + 1e-15:
        raise ZigzagError("frame stride dt must not exceed the grid spacing")
    n_frames = _frame_count(t_final, dt)
    _check_record_budget(n_frames + 1, 4, grid.cells)

    k = grid.wavenumbers()[0]
    frames = np.empty((n_frames + 1, 4, grid.points[0]), dtype=complex)
    frames[0] = initial
    comps_k = np.stack([np.fft.fft(initial[c]) for c in range(4)])

    def mode_factors(k_eff):
        energy = np.hypot(k_eff, mass)
        cos = np.cos(energy * dt)
        snc = dt * np.sinc(energy * dt / np.pi)
        return cos - 1j * snc * k_eff, -1j * snc * mass, cos + 1j * snc * k_eff

    u11, u12, u22 = mode_factors(k)
    d11, d12, d22 = mode_factors(-k)
    for j in range(1, n_frames + 1):
        r_up, r_dn, l_up, l_dn = comps_k
        comps_k = np.stack(
            [
                u11 * r_up + u12 * l_up,
                d11 * r_dn + d12 * l_dn,
                u12 * r_up + u22 * l_up,
                d12 * r_dn + d22 * l_dn,
            ]
        )
        for c in range(4):
            frames[j, c] = np.fft.ifft(comps_k[c])

    record = WaveRecord(
        kind="dirac1d_spinful",
        grid=grid,
        times=np.arange(n_frames + 1) * dt,
        frames=frames,
        mass=mass,
        components=("R_up", "R_dn", "L_up", "L_dn"),
    )
    record.validate_stride()
    return record


# ---------------------------------------------------------------------------
# Analytic fixtures and initial data


def rest_superposition(a: complex, b: complex, chi: np.ndarray, mass: float, t):
    """Spatially constant superposition of the two rest-frame energy branches.

    Returns the Dirac spinor e^{-imt} a (chi, 0) + e^{+imt} b (0, chi) at the
    given time(s); its chiral components are
    phi_R/L = (a e^{-imt} +/- b e^{imt}) chi / sqrt(2), so for real a = b the
    chiral populations trade as cos^2(mt) / sin^2(mt) while the exchange
    scalar runs as F = -m sin(2mt) |2ab|-scaled.
    """
    chi = np.asarray(chi, dtype=complex)
    if chi.shape != (2,) or not np.isclose(np.vdot(chi, chi).real, 1.0, atol=1e-12):
        raise ZigzagError("chi must be a normalized 2-spinor")
    if not np.isclose(abs(a) ** 2 + abs(b) ** 2, 1.0, atol=1e-12):
        raise ZigzagError("need |a|^2 + |b|^2 = 1")
    t = np.asarray(t, dtype=float)
    upper = a * np.exp(-1j * mass * t)[..., None] * chi
    lower = b * np.exp(+1j * mass * t)[..., None] * chi
    return np.concatenate([upper, lower], axis=-1)


def rest_superposition_chiral_amplitudes(a: complex, b: complex, mass: float, t):
    """Closed-form (f, g) amplitudes of the rest superposition for chi = up."""
    t = np.asarray(t, dtype=float)
    f = (a * np.exp(-1j * mass * t) + b * np.exp(1j * mass * t)) / np.sqrt(2.0)
    g = (a * np.exp(-1j * mass * t) - b * np.exp(1j * mass * t)) / np.sqrt(2.0)
    return f, g


def snap_momentum(grid: GridSpec, momentum: float, axis: int = 0) -> float:
    """Round a momentum to the nearest grid wavenumber (periodicity)."""
    dk = 2.0 * np.pi / grid.extents[axis]
    return round(momentum / dk) * dk


def gaussian_1d(grid: GridSpec, center: float, sigma: float, momentum: float = 0.0) -> np.ndarray:
    """Normalized periodic Gaussian envelope with a momentum phase.

    The momentum is snapped to the nearest grid wavenumber so that the phase
    is exactly periodic; otherwise the box seam would leak spectral ringing
    into every derivative-based diagnostic.
    """
    (z,) = grid.axes()
    length = grid.extents[0]
    # fold the envelope over a few periodic images so it is smooth at the seam
    env = np.zeros_like(z)
    for shift in (-length, 0.0, length):
        env += np.exp(-((z - center + shift) ** 2) / (4.0 * sigma**2))
    amp = env * np.exp(1j * snap_momentum(grid, momentum) * z)
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid.spacing[0])
    return amp / norm


def uniform_1d(grid: GridSpec, value: complex = 1.0, normalized: bool = True) -> np.ndarray:
    arr = np.full(grid.points[0], value, dtype=complex)
    if normalized:
        arr /= np.sqrt(np.sum(np.abs(arr) ** 2) * grid.spacing[0])
    return arr


def gaussian_3d(grid: GridSpec, center, sigma: float, momentum=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Normalized 3D Gaussian envelope with a grid-commensurate phase."""
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    env = np.ones(grid.points)
    for x, c, ext in zip(mesh, center, grid.extents):
        folded = np.zeros_like(x)
        for shift in (-ext, 0.0, ext):
            folded += np.exp(-((x - c + shift) ** 2) / (4.0 * sigma**2))
        env = env * folded
    phase = np.zeros(grid.points)
    for ax, (x, p) in enumerate(zip(mesh, momentum)):
        phase = phase + snap_momentum(grid, p, ax) * x
    amp = env * np.exp(1j * phase)
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid.cell_volume)
    return amp / norm


# ---------------------------------------------------------------------------
# Current-balance residual


def divergence_residual(record: WaveRecord, mass: float | None = None) -> float:
    """Max interior residual of the chiral current balance.

    Checks d_t rho_R + div j_R - F and d_t rho_L + div j_L + F with spectral
    space derivatives and centered time differences; returns the worst
    absolute value over both chiralities and all interior frame times.
    """
    if len(record.times) < 3:
        raise ZigzagError("need at least three frames for a centered residual")
    m = record.mass if mass is None else mass

    if record.kind == "dirac1d":
        f = record.frames[:, 0]
        g = record.frames[:, 1]
        rho_r = np.abs(f) ** 2
        rho_l = np.abs(g) ** 2
        flux_r = rho_r  # spin frozen up: j_R = +rho_R z-hat
        flux_l = -rho_l
        exch = 2.0 * m * (np.conj(f) * g).imag
        k = record.grid.wavenumbers()[0]
        div_r = np.fft.ifft(1j * k * np.fft.fft(flux_r, axis=-1), axis=-1).real
        div_l = np.fft.ifft(1j * k * np.fft.fft(flux_l, axis=-1), axis=-1).real
    elif record.kind == "dirac3d":
        psi = np.moveaxis(record.frames, 1, -1)  # (nt, Nx, Ny, Nz, 4)
        phi_r, phi_l = chiral_decompose(psi)
        rho_r = np.sum(np.abs(phi_r) ** 2, axis=-1)
        rho_l = np.sum(np.abs(phi_l) ** 2, axis=-1)
        from .spinor import coupling_scalar, weyl_sigma_vector

        j_r = weyl_sigma_vector(phi_r)
        j_l = -weyl_sigma_vector(phi_l)
        exch = coupling_scalar(phi_r, phi_l, m)
        ks = record.grid.wavenumbers()
        div_r = np.zeros_like(rho_r)
        div_l = np.zeros_like(rho_l)
        for ax in range(3):
            shape = [1, 1, 1, 1]
            shape[ax + 1] = record.grid.points[ax]
            k_ax = ks[ax].reshape(shape)
            div_r += np.fft.ifft(
                1j * k_ax * np.fft.fft(j_r[..., ax], axis=ax + 1), axis=ax + 1
            ).real
            div_l += np.fft.ifft(
                1j * k_ax * np.fft.fft(j_l[..., ax], axis=ax + 1), axis=ax + 1
            ).real
    else:
        raise ZigzagError(f"divergence residual undefined for kind {record.kind!r}")

    dt = record.stride
    ddt_r = (rho_r[2:] - rho_r[:-2]) / (2.0 * dt)
    ddt_l = (rho_l[2:] - rho_l[:-2]) / (2.0 * dt)
    res_r = ddt_r + div_r[1:-1] - exch[1:-1]
    res_l = ddt_l + div_l[1:-1] + exch[1:-1]
    return float(max(np.abs(res_r).max(), np.abs(res_l).max()))


# ---------------------------------------------------------------------------
# Binary export / import


def save_record(record: WaveRecord, base: str | Path) -> tuple[Path, Path]:
    """Write <base>.bin (flat little-endian complex doubles) + <base>.json."""
    base = Path(base)
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    data = np.ascontiguousarray(record.frames, dtype="<c16")
    header = {
        "kind": record.kind,
        "grid": record.grid.to_dict(),
        "times": [float(t) for t in record.times],
        "mass": record.mass,
        "components": list(record.components),
        "meta": record.meta,
        "interpolation": record.interpolation,
        "dtype": "<c16",
        "layout": "frames[time][component][grid...] row-major",
    }
    tmp_bin = bin_path.with_name(bin_path.name + ".tmp")
    tmp_json = json_path.with_name(json_path.name + ".tmp")
    tmp_bin.write_bytes(data.tobytes())
    tmp_json.write_text(json.dumps(header, sort_keys=True, indent=1))
    tmp_bin.replace(bin_path)
    tmp_json.replace(json_path)
    return bin_path, json_path


def load_record(base: str | Path) -> WaveRecord:
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    grid = GridSpec.from_dict(header["grid"])
    times = np.asarray(header["times"], dtype=float)
    comps = tuple(header["components"])
    shape = (len(times), len(comps)) + grid.points
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<c16")
    frames = raw.reshape(shape).astype(complex)
    return WaveRecord(
        kind=header["kind"],
        grid=grid,
        times=times,
        frames=frames,
        mass=float(header["mass"]),
        components=comps,
        meta=header.get("meta", {}),
        interpolation=header.get("interpolation", "cubic-space, linear-time"),
    )

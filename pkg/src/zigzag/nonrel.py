"""Non-relativistic layer: Pauli solver, current expansions, zig-zag models.

The chiral currents of the slow regime expand order by order in p/m; the
orders are kept separate (never pre-summed) because every balance identity
and both Pauli zig-zag models are statements about specific orders:

* model A guides with (j_0 + j_1 + j_2)/(j0_0 + j0_1) and preserves
  j0_0 + j0_1 exactly;
* model B guides with s(c) s + v_P and preserves j0_0 = phi^dag phi / 2;
* the truncated limits of the relativistic model (order 1 and 2) preserve
  neither, which is exactly the non-equivariance this module measures.

Conventions: the solver handles a scalar potential and a uniform magnetic
field (a general vector potential on a periodic box cannot represent the
homogeneous-field preset anyway); the algebraic layer (expansions and
identity residuals) supports arbitrary periodic A with B = curl A.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import GridError, NumericalError, PositivityError, ZigzagError
from .fieldops import cartesian_axes, cross, curl, div, dot, grad
from .guidance import DENSITY_FLOOR_FRACTION, RATE_CAP_FACTOR
from .interpolate import interp_periodic
from .waves import (
    GridSpec,
    WaveRecord,
    _check_record_budget,
    _frame_count,
    snap_momentum,
)

SIGN = (1.0, -1.0)  # s(c) for labels (R, L)


# ---------------------------------------------------------------------------
# Pauli field container and operators


@dataclass
class PauliField:
    """Two-component spinor with static potentials on a 1D or 2D grid."""

    grid: GridSpec
    phi: np.ndarray  # (2, *points)
    mass: float
    charge: float = 0.0
    scalar_potential: np.ndarray | None = None  # V on the grid
    vector_potential: np.ndarray | None = None  # A, (3, *points)
    uniform_b: np.ndarray | None = None  # homogeneous B, shape (3,)

    def __post_init__(self):
        if self.grid.dim not in (1, 2):
            raise GridError("PauliField lives on a 1D or 2D grid")
        if self.mass <= 0:
            raise ZigzagError("nonrelativistic fields need a positive mass")
        self.phi = np.asarray(self.phi, dtype=complex)
        if self.phi.shape != (2,) + self.grid.points:
            raise ZigzagError("phi must have shape (2, *grid.points)")
        if self.scalar_potential is None:
            self.scalar_potential = np.zeros(self.grid.points)
        self.scalar_potential = np.asarray(self.scalar_potential, dtype=float)
        if self.vector_potential is None:
            self.vector_potential = np.zeros((3,) + self.grid.points)
        self.vector_potential = np.asarray(self.vector_potential, dtype=float)
        if self.vector_potential.shape != (3,) + self.grid.points:
            raise ZigzagError("A must have shape (3, *grid.points)")
        self.uniform_b = (
            np.zeros(3) if self.uniform_b is None else np.asarray(self.uniform_b, float)
        )
        for arr in (self.phi.view(float), self.scalar_potential, self.vector_potential):
            if not np.all(np.isfinite(arr)):
                raise NumericalError("non-finite Pauli field data")

    @property
    def electric_field(self) -> np.ndarray:
        """E = -grad V (potentials are static)."""
        return -grad(self.scalar_potential, self.grid)

    @property
    def magnetic_field(self) -> np.ndarray:
        """B = curl A plus the uniform component."""
        b = curl(self.vector_potential, self.grid)
        return b + self.uniform_b.reshape((3,) + (1,) * self.grid.dim)

    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.phi) ** 2, axis=0)


def sigma_expectation(phi: np.ndarray) -> np.ndarray:
    """phi^dag sigma phi with the spinor axis leading: (3, *pts) real."""
    a, b = phi[0], phi[1]
    m = np.conj(a) * b
    return np.stack([2.0 * m.real, 2.0 * m.imag, np.abs(a) ** 2 - np.abs(b) ** 2])


def spinor_inner(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """phi^dag psi over the leading spinor axis."""
    return (np.conj(phi) * psi).sum(axis=0)


def sigma_dot(vec: np.ndarray) -> np.ndarray:
    """sigma . vec for a (3, 2, *pts) spinor-valued vector."""
    vx, vy, vz = vec
    return np.stack([vx[1] - 1j * vy[1] + vz[0], vx[0] + 1j * vy[0] - vz[1]])


def sigma_times(b: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """(b . sigma) phi for a cartesian vector b (broadcastable) and spinor phi."""
    bx, by, bz = b
    return np.stack(
        [bz * phi[0] + (bx - 1j * by) * phi[1], (bx + 1j * by) * phi[0] - bz * phi[1]]
    )


def covariant_gradient(phi: np.ndarray, field: PauliField) -> np.ndarray:
    """D phi = (grad - i e A) phi, shape (3, 2, *pts)."""
    out = np.zeros((3, 2) + field.grid.points, dtype=complex)
    for comp in range(2):
        out[:, comp] = grad(phi[comp], field.grid)
    return out - 1j * field.charge * field.vector_potential[:, None] * phi[None]


def sigma_covariant(phi: np.ndarray, field: PauliField) -> np.ndarray:
    """(sigma . D) phi."""
    return sigma_dot(covariant_gradient(phi, field))


def pauli_apply(phi: np.ndarray, field: PauliField) -> np.ndarray:
    """H phi = -(1/2m) D^2 phi - (e/2m) B.sigma phi + e V phi."""
    from .fieldops import partial

    dphi = covariant_gradient(phi, field)
    d2 = np.zeros_like(phi)
    for g_ax, c_ax in enumerate(cartesian_axes(field.grid)):
        d2 = d2 + partial(dphi[c_ax], field.grid, g_ax)
    d2 = d2 - 1j * field.charge * (field.vector_potential[:, None] * dphi).sum(axis=0)
    out = -(0.5 / field.mass) * d2
    out = out - (0.5 * field.charge / field.mass) * sigma_times(
        field.magnetic_field[:, None], phi
    )
    return out + field.charge * field.scalar_potential * phi


# ---------------------------------------------------------------------------
# Order-by-order current expansion


@dataclass
class CurrentExpansion:
    """Chiral currents and exchange scalar, one entry per order in p/m."""

    grid: GridSpec
    j0: dict  # {"R": [order0, order1, order2], "L": [...]}, each (*pts,)
    jvec: dict  # {"R": [...], "L": [...]}, each (3, *pts)
    exchange: list  # [F0, F1, F2, F3], each (*pts,)


def expand_currents(field: PauliField) -> CurrentExpansion:
    g = field.grid
    m = field.mass
    phi = field.phi
    sdphi = sigma_covariant(phi, field)
    dphi = covariant_gradient(phi, field)
    svec = sigma_expectation(phi)

    j0_0 = 0.5 * spinor_inner(phi, phi).real
    j0_1_mag = (0.5 / m) * spinor_inner(phi, sdphi).imag
    j0_2 = (0.125 / m**2) * spinor_inner(sdphi, sdphi).real

    jv_0_mag = 0.5 * svec
    phi_d_phi = np.stack([spinor_inner(phi, dphi[k]) for k in range(3)])
    jv_1 = (0.5 / m) * phi_d_phi.imag + (0.25 / m) * curl(svec, g)
    jv_2_mag = (0.125 / m**2) * np.stack(
        [spinor_inner(sdphi, sigma_times(e_k, sdphi)).real for e_k in np.eye(3)]
    )

    f1 = 0.5 * div(svec, g)
    sd3 = sigma_covariant_from(sigma_covariant_from(sdphi, field), field)
    f3 = (0.25 / m**2) * spinor_inner(phi, sd3).real + (
        0.5 * field.charge / m
    ) * dot(field.electric_field, svec)

    zeros = np.zeros(g.points)
    j0 = {}
    jvec = {}
    for label, sign in zip("RL", SIGN):
        j0[label] = [j0_0, sign * j0_1_mag, j0_2]
        jvec[label] = [sign * jv_0_mag, jv_1, sign * jv_2_mag]
    return CurrentExpansion(
        grid=g, j0=j0, jvec=jvec, exchange=[zeros, f1, zeros.copy(), f3]
    )


def sigma_covariant_from(phi_like: np.ndarray, field: PauliField) -> np.ndarray:
    """(sigma . D) applied to an arbitrary 2-spinor field."""
    return sigma_dot(covariant_gradient(phi_like, field))


def identity_residuals(field: PauliField) -> dict[str, float]:
    """Max-abs residuals of the order-by-order balance and lightlike identities.

    Time derivatives are evaluated by substituting the Pauli right-hand side
    analytically, never by differencing stored frames.
    """
    g = field.grid
    m = field.mass
    phi = field.phi
    exp = expand_currents(field)
    phidot = -1j * pauli_apply(phi, field)
    sdphi = sigma_covariant(phi, field)
    sdphidot = sigma_covariant(phidot, field)

    res = {}
    # leading flux balance: div j_{c,0} = s(c) F1 (algebraic)
    worst = 0.0
    for label, sign in zip("RL", SIGN):
        r = div(exp.jvec[label][0], g) - sign * exp.exchange[1]
        worst = max(worst, float(np.abs(r).max()))
    res["leading_flux_balance"] = worst

    # density continuity: d_t j0_{c,0} + div j_{c,1} = 0
    ddt_j00 = spinor_inner(phi, phidot).real
    r = ddt_j00 + div(exp.jvec["R"][1], g)
    res["density_continuity"] = float(np.abs(r).max())

    # first-order balance: d_t j0_{c,1} + div j_{c,2} = s(c) F3
    worst = 0.0
    for label, sign in zip("RL", SIGN):
        ddt_j01 = (
            sign
            * (0.5 / m)
            * (spinor_inner(phidot, sdphi) + spinor_inner(phi, sdphidot)).imag
        )
        r = ddt_j01 + div(exp.jvec[label][2], g) - sign * exp.exchange[3]
        worst = max(worst, float(np.abs(r).max()))
    res["first_order_balance"] = worst

    # lightlike expansion identities, order by order
    worst0 = worst1 = worst2 = 0.0
    for label in "RL":
        j0 = exp.j0[label]
        jv = exp.jvec[label]
        r0 = j0[0] ** 2 - dot(jv[0], jv[0])
        r1 = j0[0] * j0[1] - dot(jv[0], jv[1])
        r2 = j0[1] ** 2 + 2 * j0[0] * j0[2] - dot(jv[1], jv[1]) - 2 * dot(jv[0], jv[2])
        worst0 = max(worst0, float(np.abs(r0).max()))
        worst1 = max(worst1, float(np.abs(r1).max()))
        worst2 = max(worst2, float(np.abs(r2).max()))
    res["lightlike_order0"] = worst0
    res["lightlike_order1"] = worst1
    res["lightlike_order2"] = worst2
    return res


# ---------------------------------------------------------------------------
# Pauli solver (Strang split, scalar potential + uniform magnetic field)


def pauli_evolve(
    field: PauliField, t_final: float, dt: float, substeps: int = 1
) -> WaveRecord:
    """Evolve the Pauli spinor; a frame is stored every dt.

    Each internal split step (dt / substeps) is kinetic-exact in Fourier
    space and potential/spin-exact pointwise; a nonzero curl-type vector
    potential is not supported by the solver (the analysis layer accepts it).
    """
    g = field.grid
    if np.any(field.vector_potential != 0.0):
        raise ZigzagError(
            "the split-step solver supports A = 0 (uniform B and scalar V only)"
        )
    n_frames = _frame_count(t_final, dt)
    _check_record_budget(n_frames + 1, 2, g.cells)
    dts = dt / substeps
    if dts * np.abs(field.charge * field.scalar_potential).max() > 0.5:
        raise ZigzagError("dt too large for the potential strength (split accuracy)")

    ks = g.wavenumbers()
    k2 = np.zeros(g.points)
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = g.points[ax]
        k2 = k2 + ks[ax].reshape(shape) ** 2
    kin_half = np.exp(-1j * k2 / (2.0 * field.mass) * (dts / 2.0))

    phase_v = np.exp(-1j * dts * field.charge * field.scalar_potential)
    b = field.uniform_b
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        angle = 0.5 * field.charge * bnorm / field.mass * dts
        axis_vec = b / bnorm
        spin_c = np.cos(angle)
        spin_s = 1j * np.sin(angle)
    else:
        spin_c, spin_s, axis_vec = 1.0, 0.0, np.zeros(3)

    def point_step(phi):
        out = phi * phase_v
        if bnorm > 0:
            out = spin_c * out + spin_s * sigma_times(axis_vec.reshape(3, 1, 1)[:, :, : 1].reshape(3, 1, 1) if False else axis_vec[:, None, None] if g.dim == 1 else axis_vec[:, None, None, None], out) if False else spin_c * out + spin_s * sigma_times(
                axis_vec.reshape((3,) + (1,) * (out.ndim - 1)), out
            )
        return out

    frames = np.empty((n_frames + 1, 2) + g.points, dtype=complex)
    frames[0] = field.phi
    cur = field.phi.copy()
    axes = tuple(range(1, g.dim + 1))
    for j in range(1, n_frames + 1):
        for _ in range(substeps):
            cur = np.fft.ifftn(np.fft.fftn(cur, axes=axes) * kin_half, axes=axes)
            cur = point_step(cur)
            cur = np.fft.ifftn(np.fft.fftn(cur, axes=axes) * kin_half, axes=axes)
        frames[j] = cur

    record = WaveRecord(
        kind="pauli",
        grid=g,
        times=np.arange(n_frames + 1) * dt,
        frames=frames,
        mass=field.mass,
        components=("phi_up", "phi_dn"),
        meta={
            "charge": field.charge,
            "scalar_potential": field.scalar_potential.tolist(),
            "uniform_b": field.uniform_b.tolist(),
        },
    )
    record.validate_stride()
    return record


def pauli_field_from_record(record: WaveRecord, t: float) -> PauliField:
    """Rebuild a PauliField at a record time (linear frame blend)."""
    k, w = record.frame_weight(t)
    phi = (1.0 - w) * record.frames[int(k)] + w * record.frames[int(k) + 1]
    return PauliField(
        grid=record.grid,
        phi=phi,
        mass=record.mass,
        charge=record.meta.get("charge", 0.0),
        scalar_potential=np.asarray(record.meta["scalar_potential"])
        if "scalar_potential" in record.meta
        else None,
        uniform_b=np.asarray(record.meta.get("uniform_b", [0.0, 0.0, 0.0])),
    )


# ---------------------------------------------------------------------------
# Zig-zag guidance fields for the slow models


def model_a_fields(exp: CurrentExpansion):
    """Velocities, out-rates and equilibrium densities of model A."""
    vel = {}
    rate = {}
    equil = {}
    f_sum = exp.exchange[1] + exp.exchange[3]
    for label, sign in zip("RL", SIGN):
        den = exp.j0[label][0] + exp.j0[label][1]
        num = exp.jvec[label][0] + exp.jvec[label][1] + exp.jvec[label][2]
        safe = np.where(den <= 0, np.inf, den)
        vel[label] = num / safe
        rate[label] = np.maximum(-sign * f_sum, 0.0) / safe
        equil[label] = den
    return vel, rate, equil


def model_b_fields(exp: CurrentExpansion):
    """Velocities, out-rates and equilibrium densities of model B."""
    vel = {}
    rate = {}
    equil = {}
    rho = 2.0 * exp.j0["R"][0]  # phi^dag phi
    safe = np.where(rho <= 0, np.inf, rho)
    svec = 2.0 * exp.jvec["R"][0]  # phi^dag sigma phi
    v_pauli = 2.0 * exp.jvec["R"][1] / safe
    f1 = exp.exchange[1]
    for label, sign in zip("RL", SIGN):
        vel[label] = sign * svec / safe + v_pauli
        rate[label] = np.maximum(-sign * 2.0 * f1, 0.0) / safe
        equil[label] = exp.j0[label][0]
    return vel, rate, equil


def truncated_fields(exp: CurrentExpansion, order: int):
    """Order-1 or order-2 truncation of the relativistic guidance."""
    if order not in (1, 2):
        raise ZigzagError("truncation order must be 1 or 2")
    vel = {}
    rate = {}
    equil = {}
    for label, sign in zip("RL", SIGN):
        j00, j01, j02 = exp.j0[label]
        jv0, jv1, jv2 = exp.jvec[label]
        safe = np.where(j00 <= 0, np.inf, j00)
        ratio1 = j01 / safe
        base_rate = np.maximum(-sign * exp.exchange[1], 0.0)
        if order == 1:
            vel[label] = (jv0 + jv1 - ratio1 * jv0) / safe
            rate[label] = base_rate / safe * (1.0 - ratio1)
        else:
            ratio2 = j02 / safe
            full_rate = np.maximum(-sign * (exp.exchange[1] + exp.exchange[3]), 0.0)
            vel[label] = (
                jv0 + jv1 + jv2 - ratio1 * (jv0 + jv1) + (ratio1**2 - ratio2) * jv0
            ) / safe
            rate[label] = (
                full_rate + (ratio1**2 - (j01 + j02) / safe) * base_rate
            ) / safe
        rate[label] = np.maximum(rate[label], 0.0)
        equil[label] = j00 + j01
    return vel, rate, equil


_MODEL_FIELDS = {
    "pauli_A": lambda exp, order: model_a_fields(exp),
    "pauli_B": lambda exp, order: model_b_fields(exp),
    "nr_truncated": truncated_fields,
}


class PauliZigzagProvider:
    """Trajectory guidance for the slow zig-zag models on a pauli record.

    Guidance fields (velocities, rates, equilibrium densities) are
    precomputed on the grid per frame and interpolated along trajectories;
    the slow velocities involve spatial derivatives of the spinor, so
    point-interpolating the spinor alone would not determine them.
    """

    label_names = ("R", "L")
    unit_speed = False

    def __init__(
        self,
        record: WaveRecord,
        model: str = "pauli_B",
        order: int = 1,
        floor: float | None = None,
        rate_cap: float | None = None,
    ):
        if record.kind != "pauli":
            raise ZigzagError("PauliZigzagProvider needs a pauli record")
        if model not in _MODEL_FIELDS:
            raise ZigzagError(f"unknown slow zig-zag model {model!r}")
        self.record = record
        self.model = model
        self.order = order
        g = record.grid
        mean_density = float(np.sum(np.abs(record.frames[0]) ** 2, axis=0).mean())
        self.floor = DENSITY_FLOOR_FRACTION * mean_density if floor is None else floor
        self.rate_cap = (
            RATE_CAP_FACTOR * record.mass if rate_cap is None else rate_cap
        )

        caxes = cartesian_axes(g)
        nf = len(record.times)
        dim = g.dim
        # bundle layout per frame: [v(R) dims..., v(L) dims..., rate R, rate L,
        # equil R, equil L]
        self._bundle = np.empty((nf, 2 * dim + 4) + g.points)
        for j in range(nf):
            pf = pauli_field_from_record(record, record.times[j])
            exp = expand_currents(pf)
            vel, rate, equil = _MODEL_FIELDS[model](exp, order)
            if model == "pauli_A":
                self._check_positivity(equil, g, record.times[j])
            row = 0
            for label in "RL":
                for ax in caxes:
                    self._bundle[j, row] = vel[label][ax]
                    row += 1
            for label in "RL":
                self._bundle[j, row] = np.clip(rate[label], 0.0, self.rate_cap)
                row += 1
            for label in "RL":
                self._bundle[j, row] = np.maximum(equil[label], 0.0)
                row += 1
        self._dim = dim

    def _check_positivity(self, equil, grid, t):
        floor_scale = 1e-8 * max(e.max() for e in equil.values())
        for label in "RL":
            bad = equil[label] < -floor_scale
            if bad.any():
                idx = np.argwhere(bad)
                raise PositivityError(
                    f"model A equilibrium density negative for label {label} "
                    f"at t={t:.4g}, first offending grid index {tuple(idx[0])}"
                )

    def _sample_bundle(self, pos, t):
        k, w = self.record.frame_weight(t)
        lo = interp_periodic(self._bundle[int(k)], self.record.grid, pos)
        if w <= 0:
            return lo
        hi = interp_periodic(self._bundle[int(k) + 1], self.record.grid, pos)
        return (1.0 - w) * lo + w * hi

    def velocity(self, pos, t, labels):
        vals = self._sample_bundle(pos, t)
        dim = self._dim
        n = len(labels)
        v = np.empty((n, dim))
        for lab in (0, 1):
            sel = labels == lab
            if sel.any():
                v[sel] = vals[lab * dim : (lab + 1) * dim, sel].T
        occupied = np.where(labels == 0, vals[2 * dim + 2], vals[2 * dim + 3])
        deg = occupied <= self.floor
        v = np.where(deg[:, None], 0.0, v)
        return v, deg

    def flip_rates(self, pos, t, labels):
        vals = self._sample_bundle(pos, t)
        dim = self._dim
        rate = np.where(labels == 0, vals[2 * dim], vals[2 * dim + 1])
        occupied = np.where(labels == 0, vals[2 * dim + 2], vals[2 * dim + 3])
        rate = np.clip(rate, 0.0, self.rate_cap)
        return rate[:, None], occupied

    def flip_targets(self, labels):
        return (1 - np.asarray(labels))[:, None]

    def label_densities(self, t):
        k, w = self.record.frame_weight(t)
        lo = self._bundle[int(k)]
        hi = self._bundle[int(k) + 1] if w > 0 else lo
        vals = (1.0 - w) * lo + w * hi
        dim = self._dim
        return np.stack([vals[2 * dim + 2], vals[2 * dim + 3]])

    # --- grid-level guidance for master-equation integration ---

    def grid_velocities(self, t):
        k, w = self.record.frame_weight(t)
        lo = self._bundle[int(k)]
        hi = self._bundle[int(k) + 1] if w > 0 else lo
        vals = (1.0 - w) * lo + w * hi
        dim = self._dim
        return np.stack([vals[0:dim], vals[dim : 2 * dim]])

    def grid_transitions(self, t):
        k, w = self.record.frame_weight(t)
        lo = self._bundle[int(k)]
        hi = self._bundle[int(k) + 1] if w > 0 else lo
        vals = (1.0 - w) * lo + w * hi
        dim = self._dim
        zero = np.zeros(self.record.grid.points)
        t_rl = vals[2 * dim]  # out of R
        t_lr = vals[2 * dim + 1]  # out of L
        return np.stack(
            [np.stack([zero, t_rl]), np.stack([t_lr, zero])]
        )


# ---------------------------------------------------------------------------
# Spin-eigenstate closed forms


def spin_eigenstate_forms(
    psi: np.ndarray, xi: np.ndarray, grid: GridSpec, mass: float
):
    """Closed-form guidance for phi = psi(x) xi with constant unit spinor xi.

    Returns per-label velocities and rates of the slow model B and of the
    order-1 truncated model, plus the expansion entries, all on the grid.
    The rate normalization follows from the general out-rate with
    phi = psi xi: [-s(c) s . grad ln |psi|^2]^+.
    """
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (2,) or not np.isclose(np.vdot(xi, xi).real, 1.0, atol=1e-12):
        raise ZigzagError("xi must be a normalized constant 2-spinor")
    psi = np.asarray(psi, dtype=complex)
    svec = sigma_expectation(xi[:, None] if False else xi.reshape(2, 1)).reshape(3)
    shape = (3,) + (1,) * grid.dim
    s_b = svec.reshape(shape)

    dens = np.abs(psi) ** 2
    gpsi = grad(psi, grid)
    safe = np.where(dens <= 0, np.inf, dens)
    grad_s_phase = np.stack([(np.conj(psi) * gpsi[k]).imag for k in range(3)]) / safe
    grad_log_dens = grad(dens, grid) / safe

    vel_b = {}
    rate_b = {}
    vel_t = {}
    rate_t = {}
    curl_term = cross(grad_log_dens, s_b) / (2.0 * mass)
    s_dot_gradS = dot(s_b, grad_s_phase)
    for label, sign in zip("RL", SIGN):
        vel_b[label] = sign * s_b + grad_s_phase / mass + curl_term
        rate_b[label] = np.maximum(-sign * dot(s_b, grad_log_dens), 0.0)
        vel_t[label] = vel_b[label] - (s_dot_gradS / mass) * s_b
        rate_t[label] = rate_b[label] * (1.0 - sign * s_dot_gradS / mass)

    lap = div(gpsi, grid)
    grad_lap = grad(lap, grid)
    gpsi_conj = np.conj(gpsi)
    expansion = {
        "j0_0": 0.5 * dens,
        "j0_1_mag": (0.5 / mass) * dot(s_b, np.stack([(np.conj(psi) * gpsi[k]).imag for k in range(3)])),
        "j0_2": (0.125 / mass**2)
        * (dot(gpsi_conj, gpsi).real + (1j * dot(s_b, cross(gpsi_conj, gpsi))).real),
        "jv_0_mag": 0.5 * s_b * dens,
        "jv_1": (0.5 / mass) * np.stack([(np.conj(psi) * gpsi[k]).imag for k in range(3)])
        + (0.25 / mass) * cross(grad(dens, grid), s_b),
        "jv_2_mag": (0.125 / mass**2)
        * (
            2.0 * (dot(s_b, gpsi_conj) * gpsi).real
            - s_b * dot(gpsi_conj, gpsi).real
            - (1j * cross(gpsi_conj, gpsi)).real
        ),
        "F1": 0.5 * dot(s_b, grad(dens, grid)),
        "F3": (0.25 / mass**2) * (np.conj(psi) * dot(s_b, grad_lap)).real,
    }
    return {
        "vel_B": vel_b,
        "rate_B": rate_b,
        "vel_trunc1": vel_t,
        "rate_trunc1": rate_t,
        "expansion": expansion,
        "spin_vector": svec,
    }


# ---------------------------------------------------------------------------
# Slow relativistic packets for truncation comparisons


def positive_energy_packet(
    grid: GridSpec, center: float, sigma: float, momentum: float, xi, mass: float
):
    """Exact positive-energy Dirac packet on a 1D grid with live spin.

    Returns (chiral (4, N): R_up, R_dn, L_up, L_dn;  pauli (2, N)), both
    normalized; the Pauli spinor is the upper Dirac-Pauli component, the
    seed of the slow expansion.
    """
    if grid.dim != 1:
        raise GridError("positive_energy_packet lives on a 1D grid")
    xi = np.asarray(xi, dtype=complex)
    xi = xi / np.linalg.norm(xi)
    p0 = snap_momentum(grid, momentum)
    env = np.zeros(grid.points[0], dtype=complex)
    (z,) = grid.axes()
    length = grid.extents[0]
    for shift in (-length, 0.0, length):
        env += np.exp(-((z - center + shift) ** 2) / (4.0 * sigma**2))
    env = env * np.exp(1j * p0 * z)

    envk = np.fft.fft(env)
    k = grid.wavenumbers()[0]
    energy = np.hypot(k, mass)
    small = k / (energy + mass)

    upper_k = np.stack([xi[0] * envk, xi[1] * envk])
    lower_k = np.stack([small * xi[0] * envk, -small * xi[1] * envk])
    upper = np.stack([np.fft.ifft(c) for c in upper_k])
    lower = np.stack([np.fft.ifft(c) for c in lower_k])

    norm = np.sqrt(
        (np.sum(np.abs(upper) ** 2) + np.sum(np.abs(lower) ** 2)) * grid.spacing[0]
    )
    upper /= norm
    lower /= norm
    phi_r = (upper + lower) / np.sqrt(2.0)
    phi_l = (upper - lower) / np.sqrt(2.0)
    chiral = np.stack([phi_r[0], phi_r[1], phi_l[0], phi_l[1]])
    return chiral, upper


def exact_chiral_velocities(chiral: np.ndarray):
    """Unit chiral velocities (3, N) per label from a spin-full 1D state."""
    phi_r = np.stack([chiral[0], chiral[1]])
    phi_l = np.stack([chiral[2], chiral[3]])
    out = {}
    for label, sign, phi in (("R", 1.0, phi_r), ("L", -1.0, phi_l)):
        rho = spinor_inner(phi, phi).real
        safe = np.where(rho <= 0, np.inf, rho)
        out[label] = sign * sigma_expectation(phi) / safe
    return out


def truncation_deviation(
    grid: GridSpec, center: float, sigma: float, momentum: float, xi, mass: float,
    density_cut: float = 1e-3,
) -> float:
    """Max |exact chiral velocity - order-1 truncation| over the packet core."""
    chiral, pauli = positive_energy_packet(grid, center, sigma, momentum, xi, mass)
    field = PauliField(grid=grid, phi=pauli, mass=mass)
    exp = expand_currents(field)
    vel_t, _, _ = truncated_fields(exp, order=1)
    exact = exact_chiral_velocities(chiral)
    dens = field.density()
    core = dens > density_cut * dens.max()
    worst = 0.0
    for label in "RL":
        diff = np.linalg.norm((exact[label] - vel_t[label])[:, core], axis=0)
        worst = max(worst, float(diff.max()))
    return worst

"""Equilibrium sampling, ensemble statistics and master-equation checks.

Total-variation distances are computed on binned masses (half the L1
distance); the default bin count per axis is the Rice-family rule
ceil(n^(1/3)), recorded in every report.  In one dimension, sampling and bin
masses both treat the grid density as piecewise linear (exact trapezoid CDF);
in two dimensions, sampling is by rejection against a uniform envelope and
bins are aligned with grid cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import ZigzagError
from .pdmp import EnsembleRun, GuidanceProvider, run_ensemble
from .waves import GridSpec


def rice_bins(n: int) -> int:
    return int(np.ceil(n ** (1.0 / 3.0)))


# ---------------------------------------------------------------------------
# 1D piecewise-linear density machinery


def _trapezoid_cdf(density: np.ndarray, grid: GridSpec):
    """Node CDF of the periodic piecewise-linear density, plus the total."""
    dz = grid.spacing[0]
    rho = np.maximum(np.asarray(density, dtype=float), 0.0)
    closed = np.append(rho, rho[0])  # wrap the last interval
    masses = 0.5 * (closed[:-1] + closed[1:]) * dz
    cdf = np.concatenate([[0.0], np.cumsum(masses)])
    return cdf, closed, cdf[-1]


def cdf_at(density: np.ndarray, grid: GridSpec, x: np.ndarray) -> np.ndarray:
    """Normalized CDF of the piecewise-linear density at arbitrary points."""
    cdf, closed, total = _trapezoid_cdf(density, grid)
    if total <= 0:
        raise ZigzagError("density integrates to zero")
    dz = grid.spacing[0]
    x = np.mod(np.asarray(x, dtype=float), grid.extents[0])
    j = np.clip((x // dz).astype(int), 0, grid.points[0] - 1)
    s = x - j * dz
    slope = (closed[j + 1] - closed[j]) / dz
    return (cdf[j] + closed[j] * s + 0.5 * slope * s * s) / total


def sample_density_1d(density: np.ndarray, grid: GridSpec, n: int, seed: int,
                      purpose: int = rng.PURPOSE_POSITION) -> np.ndarray:
    """Inverse-CDF draws from a piecewise-linear grid density."""
    cdf, closed, total = _trapezoid_cdf(density, grid)
    if total <= 0:
        raise ZigzagError("density integrates to zero")
    dz = grid.spacing[0]
    u = rng.uniforms(seed, purpose, 0, n) * total
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, grid.points[0] - 1)
    c = u - cdf[j]
    b = closed[j]
    a = (closed[j + 1] - closed[j]) / dz
    with np.errstate(invalid="ignore"):
        s_quad = (-b + np.sqrt(np.maximum(b * b + 2.0 * a * c, 0.0))) / np.where(
            a == 0.0, 1.0, a
        )
    s_lin = c / np.where(b == 0.0, 1.0, b)
    s = np.where(np.abs(a) * dz > 1e-14 * (np.abs(b) + 1e-300), s_quad, s_lin)
    s = np.clip(s, 0.0, dz)
    return j * dz + s


def sample_density_nd(density: np.ndarray, grid: GridSpec, n: int, seed: int,
                      purpose: int = rng.PURPOSE_POSITION) -> np.ndarray:
    """Rejection sampling against a uniform envelope (max density x 1.01)."""
    rho = np.maximum(np.asarray(density, dtype=float), 0.0)
    peak = rho.max() * 1.01
    if peak <= 0:
        raise ZigzagError("density integrates to zero")
    gen = rng.stream(seed, purpose)
    dim = grid.dim
    spacing = np.asarray(grid.spacing)
    points = np.asarray(grid.points)
    extents = np.asarray(grid.extents)
    out = np.empty((n, dim))
    got = 0
    while got < n:
        m = max(2 * (n - got), 1024)
        prop = gen.random((m, dim)) * extents
        cell = np.minimum((prop // spacing).astype(int), points - 1)
        vals = rho[tuple(cell.T)]
        keep = gen.random(m) < vals / peak
        take = prop[keep][: n - got]
        out[got : got + len(take)] = take
        got += len(take)
    return out


def sample_equilibrium(densities: np.ndarray, grid: GridSpec, n: int, seed: int):
    """Draw positions from the summed density, then labels conditionally.

    densities: (n_labels, *grid).  Returns (positions (n, dim), labels (n,)).
    """
    densities = np.maximum(np.asarray(densities, dtype=float), 0.0)
    total = densities.sum(axis=0)
    if grid.dim == 1:
        x = sample_density_1d(total, grid, n, seed)[:, None]
    else:
        x = sample_density_nd(total, grid, n, seed)
    # conditional label probabilities at the drawn cell
    cell = np.minimum(
        (x // np.asarray(grid.spacing)).astype(int), np.asarray(grid.points) - 1
    )
    vals = densities[(slice(None),) + tuple(cell.T)]  # (L, n)
    tot = vals.sum(axis=0)
    tot = np.where(tot <= 0, 1.0, tot)
    pcum = np.cumsum(vals / tot, axis=0)
    u = rng.uniforms(seed, rng.PURPOSE_LABEL, 0, n)
    labels = (u[None, :] >= pcum).sum(axis=0)
    labels = np.minimum(labels, densities.shape[0] - 1)
    return x, labels.astype(np.int64)


# ---------------------------------------------------------------------------
# Histogram statistics


def _bin_edges(grid: GridSpec, bins: int, axis: int) -> np.ndarray:
    return np.linspace(0.0, grid.extents[axis], bins + 1)


def histogram_masses(samples: np.ndarray, grid: GridSpec, bins: int) -> np.ndarray:
    """Normalized bin masses of sample positions over the periodic box."""
    samples = np.atleast_2d(samples)
    if samples.shape[0] == 0:
        raise ZigzagError("no samples to histogram")
    edges = [_bin_edges(grid, bins, ax) for ax in range(grid.dim)]
    hist, _ = np.histogramdd(samples, bins=edges)
    return hist / samples.shape[0]


def density_bin_masses(density: np.ndarray, grid: GridSpec, bins: int) -> np.ndarray:
    """Normalized target masses of a grid density on the same bins.

    1D uses the exact piecewise-linear integral; in higher dimensions the
    bins must align with grid cells (bin count dividing the point count).
    """
    rho = np.maximum(np.asarray(density, dtype=float), 0.0)
    if grid.dim == 1:
        edges = _bin_edges(grid, bins, 0)
        cdf = cdf_at(rho, grid, edges[1:-1])
        cdf = np.concatenate([[0.0], cdf, [1.0]])
        return np.diff(cdf)
    for ax, npts in enumerate(grid.points):
        if npts % bins:
            raise ZigzagError(
                f"{bins} bins do not align with {npts} grid points on axis {ax}"
            )
    per = np.asarray(grid.points) // bins
    out = rho * grid.cell_volume
    for ax, p in enumerate(per):
        shape = out.shape[:ax] + (bins, p) + out.shape[ax + 1 :]
        out = out.reshape(shape).sum(axis=ax + 1)
    total = out.sum()
    if total <= 0:
        raise ZigzagError("density integrates to zero")
    return out / total


def aligned_bins(n: int, grid: GridSpec) -> int:
    """Rice-rule bin count, rounded up to a divisor of the grid for dim > 1."""
    b = rice_bins(n)
    if grid.dim == 1:
        return b
    npts = min(grid.points)
    c = 1
    while c < b and c < npts:
        c *= 2
    return min(c, npts)


def tv_distance(samples: np.ndarray, density: np.ndarray, grid: GridSpec, bins: int) -> float:
    """Half the L1 distance between sample and target bin masses."""
    p_hat = histogram_masses(samples, grid, bins)
    p = density_bin_masses(density, grid, bins)
    return 0.5 * float(np.abs(p_hat - p).sum())


def ks_statistic(samples: np.ndarray, density: np.ndarray, grid: GridSpec) -> float:
    """Kolmogorov-Smirnov distance against the piecewise-linear density (1D)."""
    if grid.dim != 1:
        raise ZigzagError("KS statistic is defined for 1D runs only")
    x = np.sort(np.asarray(samples).reshape(-1))
    n = len(x)
    target = cdf_at(density, grid, x)
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.abs(emp_hi - target).max(), np.abs(emp_lo - target).max()))


# ---------------------------------------------------------------------------
# Equivariance report


@dataclass
class EnsembleReport:
    """Equivariance statistics of one ensemble run."""

    scenario: str
    seed: int
    n: int
    bins: int
    checkpoints: list[float]
    tv_total: list[float]
    tv_R: list[float | None]
    tv_L: list[float | None]
    ks: list[float | None]
    jump_stats: dict
    violations: dict
    label_names: tuple[str, ...] = ("R", "L")
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "n": self.n,
            "bins": self.bins,
            "checkpoints": self.checkpoints,
            "tv_total": self.tv_total,
            "tv_R": self.tv_R,
            "tv_L": self.tv_L,
            "ks": self.ks,
            "jump_stats": self.jump_stats,
            "violations": self.violations,
            "labels": list(self.label_names),
            **({"extra": self.extra} if self.extra else {}),
        }

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))
        tmp.replace(path)
        return path


def equivariance_test(
    provider: GuidanceProvider,
    n: int,
    seed: int,
    checkpoints,
    dt: float,
    bins: int | None = None,
    scenario: str = "",
    t_start: float | None = None,
    initial_densities: np.ndarray | None = None,
) -> tuple[EnsembleReport, EnsembleRun]:
    """Sample equilibrium, evolve the ensemble, compare against the wave.

    With initial_densities given, the ensemble starts from that (possibly
    non-equilibrium) distribution instead of the equilibrium one; the
    comparison columns still measure distance to the *wave* densities.
    """
    record = provider.record
    t0 = record.t_start if t_start is None else t_start
    checkpoints = [float(c) for c in checkpoints]
    if not record.covers(t0, max(checkpoints)):
        raise ZigzagError("record window does not cover all checkpoints")
    grid = record.grid
    bins = aligned_bins(n, grid) if bins is None else bins

    start = provider.label_densities(t0) if initial_densities is None else initial_densities
    pos, labels = sample_equilibrium(start, grid, n, seed)

    out_times = np.array(sorted({t0, *checkpoints}))
    run = run_ensemble(
        provider, pos, labels, t0, float(out_times[-1]), seed, dt, out_times
    )

    tv_total, tv_r, tv_l, ks = [], [], [], []
    two_labels = len(provider.label_names) == 2
    for tc in checkpoints:
        i = int(np.argmin(np.abs(out_times - tc)))
        dens = provider.label_densities(tc)
        total = dens.sum(axis=0)
        x = run.positions[i]
        lab = run.labels[i]
        tv_total.append(tv_distance(x, total, grid, bins))
        if two_labels:
            tv_pair = []
            for label_value in (0, 1):
                sel = lab == label_value
                if sel.sum() and dens[label_value].max() > 0:
                    tv_pair.append(tv_distance(x[sel], dens[label_value], grid, bins))
                else:
                    tv_pair.append(None)
            tv_r.append(tv_pair[0])
            tv_l.append(tv_pair[1])
        else:
            tv_r.append(None)
            tv_l.append(None)
        ks.append(ks_statistic(x, total, grid) if grid.dim == 1 else None)

    counts = run.jump_counts
    report = EnsembleReport(
        scenario=scenario,
        seed=seed,
        n=n,
        bins=bins,
        checkpoints=checkpoints,
        tv_total=tv_total,
        tv_R=tv_r,
        tv_L=tv_l,
        ks=ks,
        jump_stats={"mean": float(counts.mean()), "var": float(counts.var())},
        violations={
            "max_speed_excess": run.max_speed_excess,
            "min_density_hit": run.min_density_hit,
        },
        label_names=provider.label_names,
    )
    return report, run


# ---------------------------------------------------------------------------
# Master-equation PDE integration


def _flux_divergence(p: np.ndarray, v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectral divergence of v p over the grid axes.

    p: (*grid,), v: (dim, *grid).
    """
    out = np.zeros_like(p)
    for ax in range(grid.dim):
        k = grid.wavenumbers()[ax]
        shape = [1] * grid.dim
        shape[ax] = grid.points[ax]
        flux = v[ax] * p
        out += np.fft.ifft(
            1j * k.reshape(shape) * np.fft.fft(flux, axis=ax), axis=ax
        ).real
    return out


def integrate_master_equation(
    grid: GridSpec,
    p0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
    velocity_of,
    transition_of,
    checkpoints=None,
):
    """RK4 integration of coupled transport + gain/loss label densities.

    p0: (L, *grid) initial densities.  velocity_of(t) -> (L, dim, *grid),
    transition_of(t) -> (L, L, *grid) with entry [a, b] the a -> b rate.
    Returns {checkpoint: p} (always includes t1).
    """
    n_steps = int(round((t1 - t0) / dt))
    if n_steps <= 0 or not np.isclose(n_steps * dt, t1 - t0, rtol=1e-9, atol=1e-12):
        raise ZigzagError("dt must evenly divide the PDE window")
    want = sorted(set(checkpoints or []) | {t1})
    want_steps = {}
    for tc in want:
        k = int(round((tc - t0) / dt))
        if not np.isclose(t0 + k * dt, tc, rtol=0, atol=1e-9):
            raise ZigzagError("checkpoints must lie on the PDE step grid")
        want_steps[k] = tc

    n_labels = p0.shape[0]

    def rhs(p, t):
        v = velocity_of(t)
        trans = transition_of(t)
        out = np.empty_like(p)
        loss = trans.sum(axis=1)  # (L, *grid): total outflow rate per label
        gain = np.einsum("ab...,a...->b...", trans, p)
        for a in range(n_labels):
            out[a] = -_flux_divergence(p[a], v[a], grid) + gain[a] - loss[a] * p[a]
        return out

    p = np.array(p0, dtype=float, copy=True)
    results = {}
    if 0 in want_steps:
        results[want_steps[0]] = p.copy()
    for k in range(n_steps):
        t = t0 + k * dt
        k1 = rhs(p, t)
        k2 = rhs(p + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(p + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(p + dt * k3, t + dt)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if k + 1 in want_steps:
            results[want_steps[k + 1]] = p.copy()
    return results


def two_label_transitions(t_ab: np.ndarray, t_ba: np.ndarray) -> np.ndarray:
    """Pack a pair of 0 -> 1 / 1 -> 0 rate fields into the (2, 2, ...) form."""
    zero = np.zeros_like(t_ab)
    return np.stack(
        [np.stack([zero, t_ab]), np.stack([t_ba, zero])]
    )


def master_equation_check(
    provider: GuidanceProvider,
    p0: np.ndarray,
    checkpoints,
    dt_pde: float,
    velocity_of,
    transition_of,
    n: int = 0,
    seed: int = 0,
    dt_traj: float | None = None,
    bins: int | None = None,
):
    """Integrate the label master equations and compare with an ensemble.

    Returns a dict with the PDE label densities at each checkpoint, the TV
    distances between PDE and ensemble histograms (when n > 0), and the
    max deviation from the record's own densities (the equivariance
    restatement when p0 equals the equilibrium densities).
    """
    record = provider.record
    grid = record.grid
    if np.any(np.asarray(p0) < 0):
        raise ZigzagError("initial densities must be nonnegative")
    checkpoints = [float(c) for c in checkpoints]
    t0 = record.t_start
    pde = integrate_master_equation(
        grid, np.asarray(p0, dtype=float), t0, max(checkpoints), dt_pde,
        velocity_of, transition_of, checkpoints=checkpoints,
    )

    equil_dev = 0.0
    for tc in checkpoints:
        rho = provider.label_densities(tc)
        dev = np.abs(pde[tc] - rho).max() / max(rho.max(), 1e-300)
        equil_dev = max(equil_dev, float(dev))

    result = {
        "pde": pde,
        "max_relative_deviation_from_wave": equil_dev,
        "tv_pde_vs_ensemble": None,
    }

    if n > 0:
        pos, labels = sample_equilibrium(np.asarray(p0), grid, n, seed)
        out_times = np.array(sorted({t0, *checkpoints}))
        run = run_ensemble(
            provider, pos, labels, t0, float(out_times[-1]), seed,
            dt_traj if dt_traj is not None else dt_pde, out_times,
        )
        use_bins = aligned_bins(n, grid) if bins is None else bins
        tvs = []
        for tc in checkpoints:
            i = int(np.argmin(np.abs(out_times - tc)))
            tvs.append(
                tv_distance(run.positions[i], pde[tc].sum(axis=0), grid, use_bins)
            )
        result["tv_pde_vs_ensemble"] = tvs
        result["run"] = run
    return result

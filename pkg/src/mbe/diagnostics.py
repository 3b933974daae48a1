"""Mass, free energy, slope statistics, coarsening length and twin-run stability."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import flux as fluxmod
from .flux import FluxModel, NoSlopeSelection
from .grid import BC, Grid, HeightField, gradient_faces, laplacian, spectral_forward

SELECTION_TOLERANCE = 0.1


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    mass: float
    energy: float
    energy_rate: float
    max_slope: float
    selected_fraction: float
    length_scale: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, name) for name in self.columns()]


def mass(h: HeightField) -> float:
    return float(h.values.sum() * h.grid.cell_area)


def energy(h: HeightField, model: FluxModel, nu: float) -> float:
    """Discrete free energy ``sum(nu/2 (lap h)^2 - Phi(grad h)) dx dy``.

    ``Phi`` is averaged over the four face-slope pairs of each cell, the
    same quadrature whose slope-derivative gives the solver's face fluxes.
    Hence ``d energy / d h = -rhs * dx dy`` exactly.
    """
    grid = h.grid
    lap = laplacian(h.values, grid)
    s = gradient_faces(h.values, grid)
    quad = model.kind in fluxmod.SIEGERT_KINDS and model.beta >= 4.0
    phi = fluxmod.pair_potential_mean(model, s.px, s.qy, quadrature=quad)
    density = 0.5 * nu * lap**2 - phi
    return float(density.sum() * grid.cell_area)


def dissipation_rate(h: HeightField, model: FluxModel, nu: float) -> float:
    """``-|div(J + nu grad lap h)|^2``: the instantaneous energy rate of the exact flow."""
    from .solver import rhs
    r = rhs(h, model, nu)
    return float(-(r**2).sum() * h.grid.cell_area)


def _interior(a: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.bc is BC.NEUMANN and a.shape[0] > 2 and a.shape[1] > 2:
        return a[1:-1, 1:-1]
    return a


@dataclass
class SlopeStatistics:
    max_slope: float
    selected_fraction: float
    bin_centers: np.ndarray
    counts: np.ndarray
    target: float

    @property
    def mode(self) -> float:
        return float(self.bin_centers[int(np.argmax(self.counts))])


def slope_statistics(h: HeightField, model: FluxModel, bin_width: float = 0.01,
                     exclude_boundary: bool = True) -> SlopeStatistics:
    """Histogram of the model's selection variables over cells.

    ``selected_fraction`` is the share of cells whose selection variables are
    all within 10% of the selected slope.  For a model without slope
    selection the histogram is of ``|grad h|`` and the fraction is NaN.
    """
    grid = h.grid
    s = gradient_faces(h.values, grid)
    pc, qc = s.pc, s.qc
    if exclude_boundary:
        pc, qc = _interior(pc, grid), _interior(qc, grid)
    mags = np.hypot(pc, qc)
    max_slope = float(mags.max()) if mags.size else 0.0
    try:
        target = fluxmod.selected_slopes(model).magnitudes[0]
        variables = fluxmod.selection_variables(model, pc, qc)
    except NoSlopeSelection:
        target = math.nan
        variables = [mags]
    if math.isnan(target):
        fraction = math.nan
    else:
        ok = np.ones(pc.shape, dtype=bool)
        for v in variables:
            ok &= np.abs(v - target) < SELECTION_TOLERANCE * target
        fraction = float(ok.mean()) if ok.size else 0.0
    pooled = np.concatenate([v.ravel() for v in variables])
    top = max(2.0 * (target if not math.isnan(target) else 1.0), float(pooled.max(initial=0.0)))
    nbins = max(1, int(math.ceil(top / bin_width)))
    counts, edges = np.histogram(pooled, bins=nbins, range=(0.0, nbins * bin_width))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return SlopeStatistics(max_slope, fraction, centers, counts, target)


def _wavenumbers(grid: Grid) -> np.ndarray:
    if grid.bc is BC.NEUMANN:
        kx = np.pi * np.arange(grid.nx) / grid.lx
        ky = np.pi * np.arange(grid.ny) / grid.ly
    else:
        kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
        ky = 2.0 * np.pi * np.fft.fftfreq(grid.ny, d=grid.dy)
    return np.hypot(kx[:, None], ky[None, :])


def power_spectrum(h: HeightField) -> tuple[np.ndarray, np.ndarray]:
    """Modal power ``|h_k|^2`` of the mean-free field and the matching ``|k|``."""
    v = h.values - h.values.mean()
    vhat = spectral_forward(v, h.grid)
    return _wavenumbers(h.grid), np.abs(vhat) ** 2


def radial_power_spectrum(h: HeightField, nbins: int | None = None):
    """Radially binned power spectrum ``(bin_center, S)``; bin width is the fundamental."""
    k, s = power_spectrum(h)
    grid = h.grid
    step = (np.pi if grid.bc is BC.NEUMANN else 2 * np.pi) / max(grid.lx, grid.ly)
    if nbins is None:
        nbins = int(math.ceil(k.max() / step)) + 1
    idx = np.minimum((k / step + 0.5).astype(int), nbins - 1)
    power = np.bincount(idx.ravel(), weights=s.ravel(), minlength=nbins)
    return np.arange(nbins) * step, power


def coarsening_length(h: HeightField) -> float:
    """``2 pi sum S / sum |k| S`` over the modes of the mean-free field."""
    k, s = power_spectrum(h)
    total = s.sum()
    first = (k * s).sum()
    if first <= 0 or total <= 1e-300:
        return math.nan
    return float(2.0 * np.pi * total / first)


def record(h: HeightField, model: FluxModel, nu: float,
           prev_energy: float | None = None, dt: float | None = None) -> DiagnosticsRecord:
    e = energy(h, model, nu)
    rate = (e - prev_energy) / dt if prev_energy is not None and dt else math.nan
    stats = slope_statistics(h, model)
    return DiagnosticsRecord(
        time=float(h.time),
        mass=mass(h),
        energy=e,
        energy_rate=float(rate),
        max_slope=stats.max_slope,
        selected_fraction=stats.selected_fraction,
        length_scale=coarsening_length(h),
    )


# stability -----------------------------------------------------------------

ENVELOPE_SLACK = 0.05


@dataclass
class StabilityReport:
    times: np.ndarray
    u_norm: np.ndarray
    c_fit: float
    c_bound: float
    bound_violated: bool
    identical: bool

    def envelope(self, c: float | None = None) -> np.ndarray:
        """``|u(0)| exp(c t / 2)``, the square root of the squared-norm envelope."""
        c = self.c_fit if c is None else c
        return self.u_norm[0] * np.exp(0.5 * c * self.times)

    def rows(self):
        env = self.envelope()
        for t, u, e in zip(self.times, self.u_norm, env):
            yield float(t), float(u), float(e)


def fit_growth_constant(times: np.ndarray, u_norm: np.ndarray) -> float:
    """Smallest ``C`` with ``|u(t)|^2 <= |u(0)|^2 exp(C t)`` at every sample.

    This is the least-squares slope of ``log(|u|^2/|u0|^2)`` against ``t``
    through the origin, constrained to lie on or above every sample.
    """
    t = np.asarray(times, dtype=float)
    u = np.asarray(u_norm, dtype=float)
    mask = t > 0
    if not mask.any() or u[0] == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        g = 2.0 * np.log(u[mask] / u[0])
    g = np.where(np.isfinite(g), g, -np.inf)
    tm = t[mask]
    c_ls = float((tm * np.where(np.isfinite(g), g, 0.0)).sum() / (tm**2).sum())
    c_min = float((g / tm).max())
    return max(c_ls, c_min)


def gronwall_constant(model: FluxModel, nu: float, slope_bound: float) -> float:
    """A-priori ``C = L^2 / (2 nu)`` from the current's Lipschitz constant ``L``.

    From ``d/dt |u|^2/2 <= -nu |lap u|^2 + L |grad u|^2`` and
    ``|grad u|^2 <= |u| |lap u|`` (Neumann or periodic), Young's inequality
    gives ``d/dt |u|^2 <= (L^2 / 2 nu) |u|^2``.
    """
    lip = fluxmod.lipschitz_estimate(model, slope_bound)
    return lip**2 / (2.0 * nu)


def stability_experiment(h0: HeightField, delta, model: FluxModel, cfg) -> StabilityReport:
    """Twin runs from ``h0`` and ``h0 + delta``; track ``|h1 - h2|`` in L2."""
    from .solver import integrate_trajectory

    delta = np.asarray(getattr(delta, "values", delta), dtype=float)
    if delta.shape != h0.grid.shape:
        raise ValueError("perturbation shape does not match the grid")
    if not np.any(delta != 0):
        raise ValueError("perturbation must be nonzero")
    twin = HeightField(h0.grid, h0.values + delta, h0.time)
    a = integrate_trajectory(h0, model, cfg)
    b = integrate_trajectory(twin, model, cfg)
    times = np.array([h0.time] + cfg.step_times(h0.time))
    u = b - a
    u_norm = np.sqrt((u**2).sum(axis=(1, 2)) * h0.grid.cell_area)
    identical = bool(np.array_equal(a, b))
    c_fit = fit_growth_constant(times - h0.time, u_norm)
    slope_bound = max(_max_face_slope(a, h0.grid), _max_face_slope(b, h0.grid), 1.0)
    c_bound = gronwall_constant(model, cfg.nu, slope_bound)
    report = StabilityReport(times, u_norm, c_fit, c_bound, False, identical)
    env = report.envelope()
    report.bound_violated = bool(np.any(u_norm > env * (1.0 + ENVELOPE_SLACK)))
    return report


def _max_face_slope(traj: np.ndarray, grid: Grid) -> float:
    out = 0.0
    for level in traj:
        s = gradient_faces(level, grid)
        out = max(out, float(np.abs(s.px).max()), float(np.abs(s.qy).max()))
    return out


def record_dict(rec: DiagnosticsRecord) -> dict:
    return asdict(rec)

"""Time integration of ``h_t + nu lap^2 h + div J(grad h) = 0``.

Three integrators share one semi-discretisation (``rhs``):

* ``imex_spectral``: bilaplacian implicit, flux divergence explicit, the
  linear solve diagonalised by a cosine (Neumann) or Fourier (Periodic)
  transform.  Optional linear stabilisation ``S lap (h^{n+1} - h^n)``.
* ``explicit_rk2``: midpoint rule, used as a cross-check.
* ``constructive_iteration``: whole-trajectory successive linearisation.  A
  frozen trajectory supplies mollified slopes to the flux, a linear
  fourth-order problem is solved for the next trajectory, and the mollifier
  radius shrinks as ``eps0 / m``.
"""
from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import flux as fluxmod
from .flux import FluxModel
from .grid import (BC, Grid, HeightField, bilaplacian, divergence_centers,
                   gradient_faces, mollify, spectral_forward,
                   spectral_inverse)

log = logging.getLogger(__name__)


class Scheme(enum.Enum):
    IMEX_SPECTRAL = "imex_spectral"
    EXPLICIT_RK2 = "explicit_rk2"
    CONSTRUCTIVE_ITERATION = "constructive_iteration"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for s in cls:
            if key in (s.value, s.value.replace("_", "")):
                return s
        raise ValueError(f"unknown scheme {value!r}")


class SolverError(RuntimeError):
    pass


class NonFiniteError(SolverError):
    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite height at step {step} (t = {time:.6g})")
        self.step = step
        self.time = time


class StabilityViolation(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, max_iter: int, residuals: list[float]):
        super().__init__(
            f"successive linearisation did not converge in {max_iter} iterations "
            f"(last residual {residuals[-1]:.3e})")
        self.max_iter = max_iter
        self.residuals = residuals


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme = Scheme.IMEX_SPECTRAL
    dt: float = 1e-3
    t_end: float = 1.0
    nu: float = 1.0
    stabilization: float = 0.0
    mollifier_eps0: float = 1.0
    max_iter: int = 50
    fp_tol: float = 1e-8
    # explicit_rk2 only: reject a step whose energy rises by more than this
    # fraction of |E|
    energy_jump: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.stabilization < 0:
            raise ValueError("stabilization must be nonnegative")
        if not self.mollifier_eps0 > 0:
            raise ValueError("mollifier_eps0 must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")

    def time_steps(self) -> list[float]:
        """Step sizes covering ``[0, t_end]``; the last one absorbs any remainder."""
        if self.t_end == 0:
            return []
        n = int(np.floor(self.t_end / self.dt + 1e-9))
        steps = [self.dt] * n
        rest = self.t_end - n * self.dt
        if rest > 1e-12 * self.t_end:
            steps.append(rest)
        return steps

    def step_times(self, t0: float = 0.0) -> list[float]:
        """End time of every step, computed as ``t0 + k dt`` to avoid summation drift."""
        steps = self.time_steps()
        times = [t0 + (k + 1) * self.dt for k in range(len(steps))]
        if times:
            times[-1] = t0 + self.t_end
        return times


def default_stabilization(model: FluxModel) -> float:
    """``alpha * sup|f|`` style constant: the small-slope current coefficient."""
    return model.linear_coefficient


def explicit_dt_limit(grid: Grid, model: FluxModel, nu: float) -> float:
    """Largest midpoint-rule step for the linearised operator, with a 0.9 safety factor."""
    lam = float(np.abs(grid.laplacian_symbol()).max())
    rate = nu * lam**2 + model.linear_coefficient * lam
    return 0.9 * 2.0 / rate


@dataclass
class SimulationState:
    h: HeightField
    step_count: int = 0
    hooks: list[Callable[["SimulationState"], None]] = field(default_factory=list)


# semi-discretisation -------------------------------------------------------

def flux_divergence(values: np.ndarray, grid: Grid, model: FluxModel) -> np.ndarray:
    s = gradient_faces(values, grid)
    fx, fy = fluxmod.face_fluxes(model, s.px, s.qy, periodic=grid.bc is BC.PERIODIC)
    return divergence_centers(fx, fy, grid)


def rhs(h: HeightField, model: FluxModel, nu: float) -> np.ndarray:
    """``-nu lap^2 h - div J(grad h)`` on the grid of ``h``."""
    grid = h.grid
    out = -nu * bilaplacian(h.values, grid) - flux_divergence(h.values, grid, model)
    if not np.isfinite(out).all():
        raise NonFiniteError(-1, h.time)
    return out


@functools.lru_cache(maxsize=32)
def _imex_symbols(grid: Grid, dt: float, nu: float, stab: float):
    lam = grid.laplacian_symbol()
    denom = 1.0 + dt * nu * lam**2 - dt * stab * lam
    return lam, 1.0 / denom


def _imex_update(values: np.ndarray, div_flux: np.ndarray, grid: Grid,
                 dt: float, nu: float, stab: float) -> np.ndarray:
    lam, inv = _imex_symbols(grid, dt, nu, stab)
    vhat = spectral_forward(values, grid)
    rhs_hat = vhat - dt * spectral_forward(div_flux, grid)
    if stab:
        rhs_hat = rhs_hat - dt * stab * lam * vhat
    return spectral_inverse(rhs_hat * inv, grid)


def _advance(state: SimulationState, values: np.ndarray, dt: float) -> SimulationState:
    h = state.h
    t_new = h.time + dt
    if not np.isfinite(values).all():
        raise NonFiniteError(state.step_count + 1, t_new)
    return SimulationState(HeightField(h.grid, values, t_new), state.step_count + 1, state.hooks)


def step_imex(state: SimulationState, model: FluxModel, cfg: SolverConfig,
              dt: float | None = None) -> SimulationState:
    """One IMEX step: ``(I + dt nu lap^2 - dt S lap) h' = h - dt div J(h) - dt S lap h``."""
    dt = cfg.dt if dt is None else dt
    h = state.h
    div_j = flux_divergence(h.values, h.grid, model)
    new = _imex_update(h.values, div_j, h.grid, dt, cfg.nu, cfg.stabilization)
    return _advance(state, new, dt)


def step_explicit_rk2(state: SimulationState, model: FluxModel, cfg: SolverConfig,
                      dt: float | None = None) -> SimulationState:
    dt = cfg.dt if dt is None else dt
    h = state.h
    k1 = rhs(h, model, cfg.nu)
    mid = HeightField(h.grid, h.values + 0.5 * dt * k1, h.time + 0.5 * dt)
    k2 = rhs(mid, model, cfg.nu)
    new_state = _advance(state, h.values + dt * k2, dt)
    if cfg.energy_jump is not None:
        from .diagnostics import energy
        e0 = energy(h, model, cfg.nu)
        e1 = energy(new_state.h, model, cfg.nu)
        if e1 - e0 > cfg.energy_jump * max(abs(e0), 1e-300):
            raise StabilityViolation(
                f"energy rose from {e0:.6g} to {e1:.6g} at step {new_state.step_count}")
    return new_state


def check_explicit_stability(grid: Grid, model: FluxModel, cfg: SolverConfig) -> None:
    limit = explicit_dt_limit(grid, model, cfg.nu)
    if cfg.dt > limit:
        raise StabilityViolation(
            f"dt = {cfg.dt:.3g} exceeds the explicit stability limit {limit:.3g}")


_STEPPERS = {
    Scheme.IMEX_SPECTRAL: step_imex,
    Scheme.EXPLICIT_RK2: step_explicit_rk2,
}


def integrate_trajectory(h0: HeightField, model: FluxModel, cfg: SolverConfig) -> np.ndarray:
    """All time levels of a direct run as an array ``(n_steps + 1, nx, ny)``."""
    scheme = cfg.scheme if cfg.scheme in _STEPPERS else Scheme.IMEX_SPECTRAL
    stepper = _STEPPERS[scheme]
    if scheme is Scheme.EXPLICIT_RK2:
        check_explicit_stability(h0.grid, model, cfg)
    steps = cfg.time_steps()
    traj = np.empty((len(steps) + 1,) + h0.grid.shape)
    traj[0] = h0.values
    state = SimulationState(h0.copy())
    for n, dt in enumerate(steps):
        state = stepper(state, model, cfg, dt)
        traj[n + 1] = state.h.values
    return traj


# constructive scheme -------------------------------------------------------

def solve_linear_smoothed(frozen: np.ndarray, h0: HeightField, model: FluxModel,
                          cfg: SolverConfig, eps: float) -> np.ndarray:
    """Solve the linear problem whose flux is evaluated on a frozen trajectory.

    ``frozen[n]`` is the height at time level ``n``; its mollified slopes
    drive the explicit flux of step ``n``.  The bilaplacian (and the optional
    stabilisation) act on the unknown.  Returns the new trajectory, same shape.
    """
    grid = h0.grid
    steps = cfg.time_steps()
    if frozen.shape != (len(steps) + 1,) + grid.shape:
        raise ValueError(
            f"frozen trajectory shape {frozen.shape} does not match the time lattice")
    out = np.empty_like(frozen)
    out[0] = h0.values
    for n, dt in enumerate(steps):
        smooth = mollify(frozen[n], eps, grid)
        div_j = flux_divergence(smooth, grid, model)
        new = _imex_update(out[n], div_j, grid, dt, cfg.nu, cfg.stabilization)
        if not np.isfinite(new).all():
            raise NonFiniteError(n + 1, sum(steps[:n + 1]))
        out[n + 1] = new
    return out


@dataclass
class IterationReport:
    residuals: list[float]
    eps: list[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def _trajectory_norm(traj: np.ndarray, grid: Grid, steps: list[float]) -> float:
    w = np.array([steps[0]] + list(steps)) if steps else np.ones(1)
    per_level = (traj**2).sum(axis=(1, 2)) * grid.cell_area
    return float(np.sqrt((w * per_level).sum()))


def run_constructive(h0: HeightField, model: FluxModel, cfg: SolverConfig,
                     initial_guess: np.ndarray | None = None,
                     raise_on_failure: bool = True) -> tuple[np.ndarray, IterationReport]:
    """Successive linearisation over the whole trajectory.

    Iterate ``h^{m+1} = solve_linear_smoothed(h^m, eps0 / m)`` starting from
    the time-constant trajectory ``h^1 = h0``, until the relative
    space-time L2 change drops below ``cfg.fp_tol``.
    """
    steps = cfg.time_steps()
    if initial_guess is None:
        current_traj = np.broadcast_to(h0.values, (len(steps) + 1,) + h0.grid.shape).copy()
    else:
        current_traj = np.array(initial_guess, dtype=float)
    residuals: list[float] = []
    eps_used: list[float] = []
    for m in range(1, cfg.max_iter + 1):
        eps = cfg.mollifier_eps0 / m
        nxt = solve_linear_smoothed(current_traj, h0, model, cfg, eps)
        change = _trajectory_norm(nxt - current_traj, h0.grid, steps)
        scale = _trajectory_norm(nxt, h0.grid, steps)
        res = change / scale if scale > 0 else change
        residuals.append(res)
        eps_used.append(eps)
        log.debug("constructive iteration %d: eps=%.3g residual=%.3e", m, eps, res)
        current_traj = nxt
        if res < cfg.fp_tol:
            return current_traj, IterationReport(residuals, eps_used, True)
    report = IterationReport(residuals, eps_used, False)
    if raise_on_failure:
        raise NoConvergence(cfg.max_iter, residuals)
    return current_traj, report


# driver --------------------------------------------------------------------

def run(h0: HeightField, model: FluxModel, cfg: SolverConfig, sample_every: int = 1,
        on_sample: Callable[[SimulationState], None] | None = None):
    """Integrate to ``cfg.t_end`` and collect diagnostics every ``sample_every`` steps.

    Returns ``(final_state, records)``.  The final time is always sampled.
    ``on_sample`` is called with each sampled state (snapshots, logging).
    Step errors are re-raised with the failing step index and time.
    """
    from .diagnostics import record

    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    state = SimulationState(h0.copy())
    records = []

    def sample(prev_energy: float | None, dt: float | None):
        rec = record(state.h, model, cfg.nu, prev_energy, dt)
        records.append(rec)
        if on_sample is not None:
            on_sample(state)
        for hook in state.hooks:
            hook(state)
        return rec

    sample(None, None)
    if cfg.scheme is Scheme.CONSTRUCTIVE_ITERATION:
        traj, report = run_constructive(h0, model, cfg)
        steps = cfg.time_steps()
        for n, (dt, t) in enumerate(zip(steps, cfg.step_times(h0.time))):
            if (n + 1) % sample_every == 0 or n + 1 == len(steps):
                from .diagnostics import energy
                prev = energy(HeightField(h0.grid, traj[n], t - dt), model, cfg.nu)
                state = SimulationState(HeightField(h0.grid, traj[n + 1], t), n + 1, state.hooks)
                sample(prev, dt)
        return state, records

    stepper = _STEPPERS[cfg.scheme]
    if cfg.scheme is Scheme.EXPLICIT_RK2:
        check_explicit_stability(h0.grid, model, cfg)
    steps = cfg.time_steps()
    times = cfg.step_times(h0.time)
    from .diagnostics import energy
    for n, dt in enumerate(steps):
        is_sample = (n + 1) % sample_every == 0 or n + 1 == len(steps)
        prev = energy(state.h, model, cfg.nu) if is_sample else None
        try:
            state = stepper(state, model, cfg, dt)
            state.h = HeightField(state.h.grid, state.h.values, times[n])
        except NonFiniteError:
            raise
        except SolverError as exc:
            raise type(exc)(f"step {n + 1} (t = {state.h.time + dt:.6g}): {exc}") from exc
        if is_sample:
            sample(prev, dt)
    return state, records


def with_scheme(cfg: SolverConfig, scheme: Scheme | str, **changes) -> SolverConfig:
    return replace(cfg, scheme=Scheme.parse(scheme), **changes)

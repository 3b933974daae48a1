"""Shared measurement helpers for the solver and acceptance tests."""
import numpy as np

from mbe.flux import FluxModel
from mbe.grid import BC, Grid, HeightField
from mbe.solver import Scheme, SolverConfig, integrate_trajectory


def measured_growth_rate(k: float, model: FluxModel, nu: float = 1.0, lx: float = 20 * np.pi,
                         nx: int = 512, amp: float = 1e-4, t_end: float = 1.0,
                         dt: float = 1e-3) -> float:
    """Exponential growth rate of a single Neumann cosine mode ``cos(k x)``."""
    m = k * lx / np.pi
    assert abs(m - round(m)) < 1e-9, "k must be a Neumann mode of the box"
    grid = Grid(nx, 4, lx, 4 * lx / nx, BC.NEUMANN)
    x, _ = grid.coords()
    mode = np.cos(k * x)
    h0 = HeightField(grid, amp * mode)
    cfg = SolverConfig(Scheme.IMEX_SPECTRAL, dt=dt, t_end=t_end, nu=nu)
    traj = integrate_trajectory(h0, model, cfg)
    a0 = (traj[0] * mode).sum() / (mode * mode).sum()
    a1 = (traj[-1] * mode).sum() / (mode * mode).sum()
    return float(np.log(a1 / a0) / t_end)


def smooth_field(grid: Grid, amp: float = 0.3) -> np.ndarray:
    x, y = grid.coords()
    return amp * (np.cos(2 * np.pi * x / grid.lx) * np.cos(np.pi * y / grid.ly)
                  + 0.5 * np.cos(np.pi * x / grid.lx) + 0.3 * np.cos(3 * np.pi * y / grid.ly))

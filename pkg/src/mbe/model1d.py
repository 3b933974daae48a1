"""One-dimensional cubic model ``h_t + nu h_xxxx + (alpha h_x (1 - h_x^2))_x = 0``.

Boundary conditions ``h_x = h_xxx = 0`` at both ends are realised by even
reflection: slopes and third derivatives vanish on the two boundary faces.
This module is self-contained (plain 1D arrays) so that the 2D solver can be
checked against it on y-independent data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, idct

from .solver import NonFiniteError

LEDGER_COLUMNS = (
    "time",
    "h_l2_sq",            # |h|^2
    "int_hxx_l2_sq",      # int_0^t |h_xx|^2
    "int_hx_l4_4",        # int_0^t int |h_x|^4
    "hx_l2_sq",           # |h_x|^2
    "int_hxxx_l2_sq",     # int_0^t |h_xxx|^2
    "int_3_hx2_hxx2",     # int_0^t int 3 |h_x|^2 |h_xx|^2
)


@dataclass(frozen=True)
class Line1D:
    n: int
    length: float

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("a 1D line needs at least 8 cells")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n

    def coords(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx

    def laplacian_symbol(self) -> np.ndarray:
        k = np.pi * np.arange(self.n) / self.n
        return -(2.0 / self.dx**2) * (1.0 - np.cos(k))


def slopes(h: np.ndarray, dx: float) -> np.ndarray:
    """Face slopes, length ``n + 1``, zero on both boundary faces."""
    s = np.zeros(h.size + 1)
    s[1:-1] = np.diff(h) / dx
    return s


def second_derivative(h: np.ndarray, dx: float) -> np.ndarray:
    return np.diff(slopes(h, dx)) / dx


def cubic_current(s: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * s * (1.0 - s * s)


def rhs_1d(h: np.ndarray, nu: float, alpha: float, dx: float) -> np.ndarray:
    """``-nu h_xxxx - (J(h_x))_x`` in conservation form; sums to zero."""
    h = np.asarray(h, dtype=float)
    hxx = second_derivative(h, dx)
    hxxxx = second_derivative(hxx, dx)
    flux = cubic_current(slopes(h, dx), alpha)
    out = -nu * hxxxx - np.diff(flux) / dx
    if not np.isfinite(out).all():
        raise NonFiniteError(-1, float("nan"))
    return out


def _ledger_rates(h: np.ndarray, dx: float):
    s = slopes(h, dx)
    hxx = np.diff(s) / dx
    hxxx = slopes(hxx, dx)
    sc = 0.5 * (s[:-1] + s[1:])
    return (
        float((hxx**2).sum() * dx),
        float((s**4).sum() * dx),
        float((s**2).sum() * dx),
        float((hxxx**2).sum() * dx),
        float((3.0 * sc**2 * hxx**2).sum() * dx),
    )


@dataclass
class Ledger:
    """Running values of the a priori estimate quantities."""

    rows: list[tuple[float, ...]]
    h0_l2_sq: float
    length: float
    nu: float
    alpha: float

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    def young_bound_slack(self) -> np.ndarray:
        """``|h0|^2 + alpha |Omega| t - (|h|^2 + 2 nu int|h_xx|^2 + alpha int int h_x^4)``.

        Multiplying the equation by ``h`` and using ``a^2 <= a^4/2 + 1/2`` gives
        a nonnegative slack for exact solutions.
        """
        a = self.as_array()
        t, h2, ixx, i4 = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
        return (self.h0_l2_sq + self.alpha * self.length * t
                - (h2 + 2.0 * self.nu * ixx + self.alpha * i4))


def run_1d(h0: np.ndarray, nu: float, alpha: float, line: Line1D, dt: float, t_end: float,
           sample_every: int = 1):
    """IMEX integration with the estimate ledger.

    Returns ``(trajectory_samples, ledger)`` where ``trajectory_samples`` is a
    list of ``(time, h)`` pairs at the sampling cadence (always including the
    initial and final states).
    """
    h = np.array(h0, dtype=float)
    if h.shape != (line.n,):
        raise ValueError("initial data does not match the line")
    dx = line.dx
    lam = line.laplacian_symbol()
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    inv = 1.0 / (1.0 + dt * nu * lam**2)
    integrals = np.zeros(4)  # hxx^2, hx^4, hxxx^2, 3 hx^2 hxx^2
    t = 0.0

    def row():
        return (t, float((h**2).sum() * dx), integrals[0], integrals[1],
                float((slopes(h, dx) ** 2).sum() * dx), integrals[2], integrals[3])

    rows = [row()]
    samples = [(t, h.copy())]
    for n in range(n_steps):
        flux_div = np.diff(cubic_current(slopes(h, dx), alpha)) / dx
        hhat = dct(h, type=2, norm="ortho") - dt * dct(flux_div, type=2, norm="ortho")
        h = idct(hhat * inv, type=2, norm="ortho")
        t = (n + 1) * dt
        if not np.isfinite(h).all():
            raise NonFiniteError(n + 1, t)
        r_xx, r_x4, _, r_xxx, r_mix = _ledger_rates(h, dx)
        integrals += dt * np.array([r_xx, r_x4, r_xxx, r_mix])
        if (n + 1) % sample_every == 0 or n + 1 == n_steps:
            rows.append(row())
            samples.append((t, h.copy()))
    ledger = Ledger(rows, float((np.asarray(h0) ** 2).sum() * dx), line.length, nu, alpha)
    return samples, ledger


def slope_selected_fraction(h: np.ndarray, dx: float, target: float = 1.0,
                            tol: float = 0.1) -> float:
    """Share of interior faces with ``| |h_x| - target | < tol * target``."""
    s = np.abs(slopes(h, dx)[1:-1])
    return float((np.abs(s - target) < tol * target).mean())

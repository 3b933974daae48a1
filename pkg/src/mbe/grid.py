"""Uniform rectangular grids and conservative finite-difference operators.

Heights live at cell centres, slopes on cell faces.  Arrays are indexed
``[i, j]`` with ``i`` running along x (``nx`` cells) and ``j`` along y.

Two boundary treatments are supported:

* ``Neumann``: even reflection through every edge.  The normal slope on a
  boundary face is exactly zero, and so is every normal flux built from it,
  which makes the cell-sum of any divergence vanish to roundoff.
* ``Periodic``: wrap-around in both directions.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage


class BC(enum.Enum):
    NEUMANN = 0
    PERIODIC = 1

    @classmethod
    def parse(cls, value: "str | BC") -> "BC":
        if isinstance(value, BC):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True)
class Grid:
    """Cell-centred rectangular grid on ``[0, lx] x [0, ly]``."""

    nx: int
    ny: int
    lx: float
    ly: float
    bc: BC = BC.NEUMANN
    # model1d reuses the 2D operators on an nx-by-1 strip
    allow_strip: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bc", BC.parse(self.bc))
        min_ny = 1 if self.allow_strip else 4
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("cell counts must be integers")
        if self.nx < 4 or self.ny < min_ny:
            raise ValueError(f"grid too small: nx={self.nx}, ny={self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("side lengths must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(nx, ny)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def laplacian_symbol(self) -> np.ndarray:
        """Eigenvalues of the 5-point Laplacian in the grid's transform basis.

        For Neumann the basis is the type-II cosine transform, for Periodic
        the full FFT.  The (0, 0) entry is always zero.
        """
        if self.bc is BC.NEUMANN:
            kx = np.pi * np.arange(self.nx) / self.nx
            ky = np.pi * np.arange(self.ny) / self.ny
        else:
            kx = 2.0 * np.pi * np.fft.fftfreq(self.nx)
            ky = 2.0 * np.pi * np.fft.fftfreq(self.ny)
        lam_x = -(2.0 / self.dx**2) * (1.0 - np.cos(kx))
        lam_y = -(2.0 / self.dy**2) * (1.0 - np.cos(ky))
        if self.ny == 1:
            lam_y = np.zeros(1)
        return lam_x[:, None] + lam_y[None, :]


@dataclass
class HeightField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    def copy(self) -> "HeightField":
        return HeightField(self.grid, self.values.copy(), self.time)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


@dataclass
class SlopeField:
    """Face slopes ``px`` (nx+1, ny) and ``qy`` (nx, ny+1) plus cell-centred copies."""

    px: np.ndarray
    qy: np.ndarray
    pc: np.ndarray
    qc: np.ndarray


def _values(h) -> np.ndarray:
    return h.values if isinstance(h, HeightField) else np.asarray(h, dtype=float)


def _grid_of(h, grid: Grid | None) -> Grid:
    if grid is not None:
        return grid
    if isinstance(h, HeightField):
        return h.grid
    raise TypeError("a Grid is required when passing a bare array")


def gradient_faces(h, grid: Grid | None = None) -> SlopeField:
    """Face-centred difference quotients of ``h``."""
    grid = _grid_of(h, grid)
    v = _values(h)
    nx, ny = grid.shape
    px = np.zeros((nx + 1, ny))
    qy = np.zeros((nx, ny + 1))
    px[1:nx] = (v[1:] - v[:-1]) / grid.dx
    qy[:, 1:ny] = (v[:, 1:] - v[:, :-1]) / grid.dy
    if grid.bc is BC.PERIODIC:
        px[0] = px[nx] = (v[0] - v[-1]) / grid.dx
        if ny > 1:
            qy[:, 0] = qy[:, ny] = (v[:, 0] - v[:, -1]) / grid.dy
    pc = 0.5 * (px[:-1] + px[1:])
    qc = 0.5 * (qy[:, :-1] + qy[:, 1:])
    return SlopeField(px, qy, pc, qc)


def divergence_centers(fx: np.ndarray, fy: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell divergence of face fluxes ``fx`` (nx+1, ny) and ``fy`` (nx, ny+1)."""
    return (fx[1:] - fx[:-1]) / grid.dx + (fy[:, 1:] - fy[:, :-1]) / grid.dy


def laplacian(h, grid: Grid | None = None) -> np.ndarray:
    grid = _grid_of(h, grid)
    s = gradient_faces(h, grid)
    return divergence_centers(s.px, s.qy, grid)


def bilaplacian(h, grid: Grid | None = None) -> np.ndarray:
    grid = _grid_of(h, grid)
    return laplacian(laplacian(h, grid), grid)


def spectral_forward(v: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.bc is BC.NEUMANN:
        from scipy.fft import dctn
        return dctn(v, type=2, norm="ortho")
    return np.fft.fft2(v)


def spectral_inverse(vhat: np.ndarray, grid: Grid) -> np.ndarray:
    if grid.bc is BC.NEUMANN:
        from scipy.fft import idctn
        return idctn(vhat, type=2, norm="ortho")
    return np.fft.ifft2(vhat).real


def mollifier_kernel(eps: float, dx: float, dy: float) -> np.ndarray:
    """Normalised smooth bump ``exp(-1/(1-r^2))`` on the offsets within radius ``eps``.

    Returns the 1x1 identity kernel when no neighbour lies inside the support.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rx = int(np.floor(eps / dx))
    ry = int(np.floor(eps / dy))
    ox = np.arange(-rx, rx + 1) * dx
    oy = np.arange(-ry, ry + 1) * dy
    r2 = (ox[:, None] ** 2 + oy[None, :] ** 2) / eps**2
    w = np.zeros_like(r2)
    inside = r2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return w / w.sum()


def mollify(values: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """Convolve a cell field with a unit-mass bump of radius ``eps``.

    Neumann grids are reflect-padded (half-sample symmetric), which together
    with the symmetric kernel preserves the discrete mass exactly.
    """
    kernel = mollifier_kernel(eps, grid.dx, grid.dy)
    kx, ky = kernel.shape
    if kx // 2 >= grid.nx or ky // 2 >= grid.ny:
        raise ValueError(
            f"mollifier radius {eps} exceeds grid extent ({grid.lx} x {grid.ly})")
    if kernel.size == 1:
        return np.array(values, dtype=float, copy=True)
    mode = "reflect" if grid.bc is BC.NEUMANN else "wrap"
    return ndimage.correlate(np.asarray(values, dtype=float), kernel, mode=mode)


# binary snapshots -----------------------------------------------------------

MAGIC = b"MBEH"
SNAPSHOT_VERSION = 1
# magic, version, nx, ny, bc + 3 pad, time, lx: 36 bytes
_HEADER = struct.Struct("<4sIIIB3xdd")


def write_snapshot(path, h: HeightField) -> None:
    """Write ``h`` as a little-endian header followed by float64 values.

    Values are stored row-major over the ``(nx, ny)`` array, so ``j`` (y)
    varies fastest.
    """
    g = h.grid
    header = _HEADER.pack(MAGIC, SNAPSHOT_VERSION, g.nx, g.ny, g.bc.value,
                          float(h.time), float(g.lx))
    body = np.ascontiguousarray(h.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body)


def read_snapshot(path, ly: float | None = None) -> HeightField:
    """Read a snapshot.  The header stores ``lx`` only; ``ly`` defaults to ``lx*ny/nx``."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, nx, ny, bc, time, lx = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx, ny)
    if ly is None:
        ly = lx * ny / nx
    grid = Grid(nx, ny, lx, ly, BC(bc), allow_strip=ny < 4)
    return HeightField(grid, values.astype(float), time)

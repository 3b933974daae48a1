"""Surface-diffusion currents J(p, q) and their scalar nonlinearities.

Every current here is the slope-gradient of a scalar density ``Phi(p, q)``::

    J(p, q) = grad_{(p, q)} Phi(p, q)

so the free energy of a height profile is ``nu/2 |lap h|^2 - Phi(grad h)``
and the evolution ``h_t = -nu lap^2 h - div J`` is its L2 gradient flow.

Kinds
-----
``siegert_rotated``
    ``j1 = a[(p+q) f((p+q)^2) + (p-q) f((p-q)^2)]``,
    ``j2 = a[(p+q) f((p+q)^2) - (p-q) f((p-q)^2)]`` with
    ``f(y) = (1-y) / ((1-y)^2 + beta*y)``.
``siegert_reduced``
    ``j1 = a p f(p^2)``, ``j2 = a q f(q^2)``; the rotated current seen in
    the coordinates ``X = A x``, ``A = [[1, 1], [1, -1]]``.
``johnson``
    ``J = a xi f(|xi|^2)`` with ``f(y) = 1 / (1 + beta*y)``.
``cubic_isotropic``
    ``J = a xi (1 - |xi|^2)``.
``cubic_anisotropic``
    ``j1 = a p (1 - p^2 - b q^2)``, ``j2 = a q (1 - q^2 - b p^2)``.

The cubic kinds carry the same ``alpha`` prefactor as the others so that the
small-slope dispersion relation is ``alpha k^2 - nu k^4`` for every kind
except ``siegert_rotated``, whose two rotated terms double it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class FluxKind(enum.Enum):
    SIEGERT_ROTATED = "siegert_rotated"
    SIEGERT_REDUCED = "siegert_reduced"
    JOHNSON = "johnson"
    CUBIC_ISOTROPIC = "cubic_isotropic"
    CUBIC_ANISOTROPIC = "cubic_anisotropic"

    @classmethod
    def parse(cls, value: "str | FluxKind") -> "FluxKind":
        if isinstance(value, FluxKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key or kind.name.lower() == key:
                return kind
        # CamelCase spellings, e.g. "SiegertRotated"
        for kind in cls:
            if kind.value.replace("_", "") == key.replace("_", ""):
                return kind
        raise ValueError(f"unknown flux kind {value!r}")


SIEGERT_KINDS = (FluxKind.SIEGERT_ROTATED, FluxKind.SIEGERT_REDUCED)
CUBIC_KINDS = (FluxKind.CUBIC_ISOTROPIC, FluxKind.CUBIC_ANISOTROPIC)


class NoSlopeSelection(ValueError):
    """The requested current has no nonzero stable slope."""


class UnsupportedParameter(ValueError):
    pass


@dataclass(frozen=True)
class FluxModel:
    kind: FluxKind = FluxKind.SIEGERT_ROTATED
    alpha: float = 1.0
    beta: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FluxKind.parse(self.kind))
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.kind in SIEGERT_KINDS + (FluxKind.JOHNSON,) and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not -1.0 < self.b < 1.0:
            raise ValueError(f"b must lie in (-1, 1), got {self.b}")

    @property
    def diffusion_length(self) -> float:
        return float(np.sqrt(self.beta))

    @property
    def linear_coefficient(self) -> float:
        """Coefficient ``c`` of the small-slope current ``J ~ c xi``."""
        if self.kind is FluxKind.SIEGERT_ROTATED:
            return 2.0 * self.alpha
        return self.alpha


@dataclass(frozen=True)
class SlopeTarget:
    magnitudes: tuple[float, ...]
    description: str


# scalar nonlinearity ------------------------------------------------------

def _check_y(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("f is defined for y >= 0 only")
    return y


def _uses_f(model: FluxModel) -> None:
    if model.kind in CUBIC_KINDS:
        raise ValueError(f"{model.kind.value} has no scalar nonlinearity f")


def f_scalar(model: FluxModel, y):
    """The nonlinearity ``f(y)``; works elementwise on arrays."""
    _uses_f(model)
    y = _check_y(y)
    return _f(model, y)


def _f(model: FluxModel, y):
    beta = model.beta
    if model.kind is FluxKind.JOHNSON:
        return 1.0 / (1.0 + beta * y)
    return (1.0 - y) / ((1.0 - y) ** 2 + beta * y)


def siegert_denominator(y, beta: float):
    """``(1-y)^2 + beta*y``; bounded below by ``beta(4-beta)/4`` for beta < 4, by 1 otherwise."""
    return (1.0 - y) ** 2 + beta * y


def f_derivatives(model: FluxModel, y, order: int = 1):
    """Closed-form first or second derivative of ``f``."""
    _uses_f(model)
    y = _check_y(y)
    if order not in (1, 2):
        raise ValueError("only derivative orders 1 and 2 are implemented")
    beta = model.beta
    if model.kind is FluxKind.JOHNSON:
        if order == 1:
            return -beta / (1.0 + beta * y) ** 2
        return 2.0 * beta**2 / (1.0 + beta * y) ** 3
    d = siegert_denominator(y, beta)
    dd = 2.0 * y + beta - 2.0
    # f' = P / D^2 with P = -D - (1-y) D'
    p = -d - (1.0 - y) * dd
    if order == 1:
        return p / d**2
    dp = -2.0 * (1.0 - y)
    return (dp * d - 2.0 * p * dd) / d**3


def potential_F(model: FluxModel, y, quadrature: bool = False):
    """Antiderivative ``F(y) = int_0^y f``, so ``F(0) = 0``.

    The Siegert closed form needs ``0 < beta < 4``; pass ``quadrature=True``
    to integrate numerically outside that range.
    """
    y = _check_y(y)
    beta = model.beta
    kind = model.kind
    if kind in CUBIC_KINDS:
        raise ValueError("cubic currents have polynomial potentials; use slope_potential")
    if kind is FluxKind.JOHNSON:
        return np.log1p(beta * y) / beta
    if beta < 4.0:
        s = np.sqrt(beta * (4.0 - beta))
        return (-0.5 * np.log(siegert_denominator(y, beta))
                + (beta / s) * (np.arctan((2.0 * y + beta - 2.0) / s)
                                - np.arctan((beta - 2.0) / s)))
    if not quadrature:
        raise UnsupportedParameter(
            f"closed-form Siegert potential requires beta < 4 (got {beta})")
    return _potential_quad(model, y)


def _potential_quad(model: FluxModel, y):
    def one(upper):
        # f changes sign at y = 1
        points = [1.0] if upper > 1.0 else None
        val, _ = integrate.quad(lambda s: _f(model, s), 0.0, upper,
                                points=points, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val
    out = np.vectorize(one, otypes=[float])(y)
    return out if out.ndim else float(out)


# currents -----------------------------------------------------------------

def current(model: FluxModel, p, q):
    """Current ``(j1, j2)`` at slope ``(p, q)``; elementwise on arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a = model.alpha
    kind = model.kind
    if kind is FluxKind.SIEGERT_ROTATED:
        u = p + q
        v = p - q
        ru = u * _f(model, u * u)
        rv = v * _f(model, v * v)
        return a * (ru + rv), a * (ru - rv)
    if kind is FluxKind.SIEGERT_REDUCED:
        return a * p * _f(model, p * p), a * q * _f(model, q * q)
    if kind is FluxKind.JOHNSON:
        g = a * _f(model, p * p + q * q)
        return g * p, g * q
    if kind is FluxKind.CUBIC_ISOTROPIC:
        g = a * (1.0 - p * p - q * q)
        return g * p, g * q
    b = model.b
    p2 = p * p
    q2 = q * q
    return a * p * (1.0 - p2 - b * q2), a * q * (1.0 - q2 - b * p2)


def slope_potential(model: FluxModel, p, q, quadrature: bool = False):
    """Scalar density ``Phi(p, q)`` whose slope-gradient is the current."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a = model.alpha
    kind = model.kind
    if kind is FluxKind.SIEGERT_ROTATED:
        return 0.5 * a * (potential_F(model, (p + q) ** 2, quadrature)
                          + potential_F(model, (p - q) ** 2, quadrature))
    if kind is FluxKind.SIEGERT_REDUCED:
        return 0.5 * a * (potential_F(model, p * p, quadrature)
                          + potential_F(model, q * q, quadrature))
    if kind is FluxKind.JOHNSON:
        return 0.5 * a * potential_F(model, p * p + q * q)
    if kind is FluxKind.CUBIC_ISOTROPIC:
        r2 = p * p + q * q
        return a * (0.5 * r2 - 0.25 * r2 * r2)
    p2 = p * p
    q2 = q * q
    return a * (0.5 * (p2 + q2) - 0.25 * (p2 * p2 + q2 * q2) - 0.5 * model.b * p2 * q2)


def current_jacobian(model: FluxModel, p, q, h: float = 1e-6):
    """Central-difference Jacobian ``dJ/d(p, q)``, shape ``(..., 2, 2)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    jp_plus = current(model, p + h, q)
    jp_minus = current(model, p - h, q)
    jq_plus = current(model, p, q + h)
    jq_minus = current(model, p, q - h)
    out = np.empty(p.shape + (2, 2))
    for r in range(2):
        out[..., r, 0] = (jp_plus[r] - jp_minus[r]) / (2 * h)
        out[..., r, 1] = (jq_plus[r] - jq_minus[r]) / (2 * h)
    return out


def lipschitz_estimate(model: FluxModel, slope_bound: float, n: int = 201) -> float:
    """Largest Jacobian spectral norm over the square ``|p|, |q| <= slope_bound``."""
    s = np.linspace(-slope_bound, slope_bound, n)
    P, Q = np.meshgrid(s, s, indexing="ij")
    jac = current_jacobian(model, P, Q)
    return float(np.linalg.norm(jac, ord=2, axis=(-2, -1)).max())


def selected_slopes(model: FluxModel) -> SlopeTarget:
    kind = model.kind
    if kind is FluxKind.JOHNSON:
        raise NoSlopeSelection("the Johnson current has no nonzero stable slope")
    if kind is FluxKind.SIEGERT_ROTATED:
        return SlopeTarget((1.0,), "|p + q| and |p - q| (facets (p, q) = (+-1, 0), (0, +-1))")
    if kind is FluxKind.SIEGERT_REDUCED:
        return SlopeTarget((1.0,), "|p| and |q|")
    if kind is FluxKind.CUBIC_ISOTROPIC:
        return SlopeTarget((1.0,), "|xi| = sqrt(p^2 + q^2)")
    return SlopeTarget((1.0 / np.sqrt(1.0 + model.b),), "|p| and |q|")


def selection_variables(model: FluxModel, p, q) -> list[np.ndarray]:
    """Slope combinations that lock onto ``selected_slopes`` when facets form.

    Returned as magnitudes (not squares) so they compare directly with the
    target; square them for the ``(p +- q)^2`` picture.
    """
    kind = model.kind
    if kind is FluxKind.SIEGERT_ROTATED:
        return [np.abs(p + q), np.abs(p - q)]
    if kind is FluxKind.CUBIC_ISOTROPIC:
        return [np.hypot(p, q)]
    if kind is FluxKind.JOHNSON:
        raise NoSlopeSelection("the Johnson current has no nonzero stable slope")
    return [np.abs(p), np.abs(q)]


# face fluxes --------------------------------------------------------------

def face_fluxes(model: FluxModel, px: np.ndarray, qy: np.ndarray, periodic: bool = False):
    """Average the current over the four (x-face, y-face) pairs around each cell.

    Each cell owns four slope pairs ``(px[i+a, j], qy[i, j+c])``.  The x-face
    flux is the mean of ``j1`` over the four pairs sharing that face, and the
    y-face flux likewise.  This is the exact slope-derivative of the
    quadrature ``mean over pairs of Phi``, which keeps the semi-discrete
    scheme a gradient flow.  Boundary normal fluxes vanish for a Neumann
    grid because ``j1(0, q) = j2(p, 0) = 0`` for every kind.
    """
    nx1, ny = px.shape
    nx = nx1 - 1
    fx = np.zeros_like(px)
    fy = np.zeros_like(qy)
    for a in (0, 1):
        p = px[a:a + nx]
        for c in (0, 1):
            q = qy[:, c:c + ny]
            j1, j2 = current(model, p, q)
            fx[a:a + nx] += 0.25 * j1
            fy[:, c:c + ny] += 0.25 * j2
    if periodic:
        fx[0] += fx[nx]
        fx[nx] = fx[0]
        fy[:, 0] += fy[:, ny]
        fy[:, ny] = fy[:, 0]
    else:
        fx[0] = fx[nx] = 0.0
        fy[:, 0] = fy[:, ny] = 0.0
    return fx, fy


def pair_potential_mean(model: FluxModel, px: np.ndarray, qy: np.ndarray,
                        quadrature: bool = False) -> np.ndarray:
    """Cellwise mean of ``Phi`` over the four face-slope pairs."""
    nx1, ny = px.shape
    nx = nx1 - 1
    out = np.zeros((nx, ny))
    for a in (0, 1):
        for c in (0, 1):
            out += 0.25 * slope_potential(model, px[a:a + nx], qy[:, c:c + ny], quadrature)
    return out

"""Line-based experiment configuration: ``section.key = value``.

Example::

    # comments start with '#'
    seed = 7
    grid.nx = 128
    grid.ny = 128
    grid.lx = 128
    grid.ly = 128
    grid.bc = neumann
    flux.kind = siegert_rotated
    flux.alpha = 1
    flux.beta = 1
    solver.dt = 0.01
    solver.t_end = 100
    init.kind = white_noise
    init.amp = 0.01
    output.sample_every = 100
    sweep.flux.b = 0, 0.25, 0.5

Initial conditions (``init.kind``):

``white_noise``  ``init.amp``, ``init.seed`` (defaults to the top-level ``seed``)
``pyramid``      ``init.slope``; one square pyramid ``-slope (|x-cx| + |y-cy|)``
``cosine``       ``init.kx``, ``init.ky``, ``init.amp``; ``amp cos(kx x) cos(ky y)``
``file``         ``init.path``; a binary snapshot

White noise is drawn from numpy's PCG64 generator (``default_rng(seed)``)
as standard normals scaled by ``amp``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .flux import FluxKind, FluxModel
from .grid import BC, Grid, HeightField, read_snapshot
from .solver import Scheme, SolverConfig


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("; ".join(f"line {n}: {msg}" for n, msg in errors))


class ValidationError(ConfigError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "white_noise"
    amp: float = 0.01
    seed: int | None = None
    slope: float = 1.0
    kx: float = 0.0
    ky: float = 0.0
    path: str = ""


@dataclass(frozen=True)
class OutputSpec:
    sample_every: int = 1
    snapshot_every: int = 0
    histogram: bool = True


@dataclass(frozen=True)
class StabilitySpec:
    amp: float = 1e-6
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    grid: Grid
    flux: FluxModel
    solver: SolverConfig
    init: InitSpec
    output: OutputSpec = OutputSpec()
    stability: StabilitySpec = StabilitySpec()
    sweep: tuple[tuple[str, tuple[str, ...]], ...] = ()
    seed: int = 0

    def expand(self) -> list[tuple[dict[str, str], "ExperimentConfig"]]:
        """Cross product of the sweep values; one config per point."""
        if not self.sweep:
            return [({}, self)]
        keys = [k for k, _ in self.sweep]
        base = _flatten(self)
        out = []
        for combo in itertools.product(*(v for _, v in self.sweep)):
            params = dict(zip(keys, combo))
            raw = {**base, **params}
            out.append((params, _build(raw, {}, ())))
        return out


# key -> (type, required)
_SCHEMA: dict[str, tuple[str, bool]] = {
    "seed": ("int", False),
    "grid.nx": ("int", True),
    "grid.ny": ("int", True),
    "grid.lx": ("float", True),
    "grid.ly": ("float", True),
    "grid.bc": ("str", False),
    "flux.kind": ("str", True),
    "flux.alpha": ("float", False),
    "flux.beta": ("float", False),
    "flux.b": ("float", False),
    "solver.scheme": ("str", False),
    "solver.dt": ("float", True),
    "solver.t_end": ("float", True),
    "solver.nu": ("float", False),
    "solver.stabilization": ("float", False),
    "solver.mollifier_eps0": ("float", False),
    "solver.max_iter": ("int", False),
    "solver.fp_tol": ("float", False),
    "init.kind": ("str", True),
    "init.amp": ("float", False),
    "init.seed": ("int", False),
    "init.slope": ("float", False),
    "init.kx": ("float", False),
    "init.ky": ("float", False),
    "init.path": ("str", False),
    "output.sample_every": ("int", False),
    "output.snapshot_every": ("int", False),
    "output.histogram": ("bool", False),
    "stability.amp": ("float", False),
    "stability.seed": ("int", False),
}

REQUIRED_SECTIONS = ("grid", "flux", "solver", "init")
INIT_KINDS = ("white_noise", "pyramid", "cosine", "file")


def _convert(key: str, text: str):
    kind = _SCHEMA[key][0]
    if kind == "str":
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(key, f"expected a boolean, got {text!r}")
    try:
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ValidationError(key, f"expected {kind}, got {text!r}") from None


def _tokenize(text: str) -> tuple[dict[str, str], dict[str, int], list[tuple[str, tuple[str, ...]]]]:
    raw: dict[str, str] = {}
    lines: dict[str, int] = {}
    sweep: list[tuple[str, tuple[str, ...]]] = []
    errors: list[tuple[int, str]] = []
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append((n, f"expected 'key = value', got {stripped!r}"))
            continue
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            errors.append((n, "empty key or value"))
            continue
        if key.startswith("sweep."):
            target = key[len("sweep."):]
            if target not in _SCHEMA:
                errors.append((n, f"cannot sweep unknown key {target!r}"))
                continue
            values = tuple(v.strip() for v in value.split(",") if v.strip())
            if not values:
                errors.append((n, f"sweep over {target!r} has no values"))
                continue
            sweep.append((target, values))
            lines[key] = n
            continue
        if key not in _SCHEMA:
            errors.append((n, f"unknown key {key!r}"))
            continue
        if key in raw:
            errors.append((n, f"duplicate key {key!r} (first on line {lines[key]})"))
            continue
        raw[key] = value
        lines[key] = n
    if errors:
        raise ParseError(errors)
    return raw, lines, sweep


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises ``ParseError`` (carrying ``(line, message)`` pairs) for malformed
    or unknown lines and ``ValidationError`` naming the offending key.
    """
    raw, lines, sweep = _tokenize(text)
    present = {k.split(".", 1)[0] for k in raw if "." in k}
    missing = [s for s in REQUIRED_SECTIONS if s not in present]
    if missing:
        raise ValidationError(missing[0], f"missing required sections: {', '.join(missing)}")
    cfg = _build(raw, lines, tuple(sweep))
    # every sweep point must validate too
    for _ in cfg.expand():
        pass
    return cfg


def _build(raw: dict[str, str], lines: dict[str, int], sweep) -> ExperimentConfig:
    for key, (_, required) in _SCHEMA.items():
        if required and key not in raw:
            raise ValidationError(key, "required key is missing")
    v = {key: _convert(key, text) for key, text in raw.items()}

    def get(key, default):
        return v.get(key, default)

    def check(key, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ValidationError(key, str(exc)) from None

    grid = check("grid", lambda: Grid(v["grid.nx"], v["grid.ny"], v["grid.lx"], v["grid.ly"],
                                      BC.parse(get("grid.bc", "neumann")),
                                      allow_strip=v["grid.ny"] == 1))
    kind = check("flux.kind", lambda: FluxKind.parse(v["flux.kind"]))
    b = get("flux.b", 0.0)
    if not -1.0 < b < 1.0:
        raise ValidationError("flux.b", f"b = {b} lies outside (-1, 1)")
    alpha = get("flux.alpha", 1.0)
    if alpha < 0:
        raise ValidationError("flux.alpha", "alpha must be nonnegative")
    beta = get("flux.beta", 1.0)
    if beta <= 0:
        raise ValidationError("flux.beta", "beta must be positive")
    model = FluxModel(kind, alpha, beta, b)
    scheme = check("solver.scheme", lambda: Scheme.parse(get("solver.scheme", "imex_spectral")))
    for key in ("solver.dt", "solver.nu"):
        if key in v and not v[key] > 0:
            raise ValidationError(key, "must be positive")
    if v["solver.t_end"] < 0:
        raise ValidationError("solver.t_end", "must be nonnegative")
    if v["solver.t_end"] > 0 and v["solver.dt"] > v["solver.t_end"]:
        raise ValidationError("solver.dt", "dt exceeds t_end")
    solver = check("solver", lambda: SolverConfig(
        scheme=scheme, dt=v["solver.dt"], t_end=v["solver.t_end"],
        nu=get("solver.nu", 1.0), stabilization=get("solver.stabilization", 0.0),
        mollifier_eps0=get("solver.mollifier_eps0", 1.0),
        max_iter=get("solver.max_iter", 50), fp_tol=get("solver.fp_tol", 1e-8)))
    init_kind = v["init.kind"].strip().lower()
    if init_kind not in INIT_KINDS:
        raise ValidationError("init.kind", f"expected one of {', '.join(INIT_KINDS)}")
    if init_kind == "file" and not get("init.path", ""):
        raise ValidationError("init.path", "required for init.kind = file")
    init = InitSpec(init_kind, get("init.amp", 0.01), get("init.seed", None),
                    get("init.slope", 1.0), get("init.kx", 0.0), get("init.ky", 0.0),
                    get("init.path", ""))
    sample_every = get("output.sample_every", 1)
    if sample_every < 1:
        raise ValidationError("output.sample_every", "must be at least 1")
    snapshot_every = get("output.snapshot_every", 0)
    if snapshot_every < 0:
        raise ValidationError("output.snapshot_every", "must be nonnegative")
    if snapshot_every and snapshot_every % sample_every:
        raise ValidationError("output.snapshot_every", "must be a multiple of output.sample_every")
    output = OutputSpec(sample_every, snapshot_every, get("output.histogram", True))
    stability = StabilitySpec(get("stability.amp", 1e-6), get("stability.seed", 1))
    if not stability.amp > 0:
        raise ValidationError("stability.amp", "must be positive")
    seed = get("seed", 0)
    if seed < 0:
        raise ValidationError("seed", "must be nonnegative")
    return ExperimentConfig(grid, model, solver, init, output, stability, tuple(sweep), seed)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (BC, FluxKind, Scheme)):
        return value.value if not isinstance(value, BC) else value.name.lower()
    return str(value)


def _flatten(cfg: ExperimentConfig) -> dict[str, str]:
    g, f, s, i, o, st = cfg.grid, cfg.flux, cfg.solver, cfg.init, cfg.output, cfg.stability
    out = {
        "seed": cfg.seed,
        "grid.nx": g.nx, "grid.ny": g.ny, "grid.lx": float(g.lx), "grid.ly": float(g.ly),
        "grid.bc": g.bc,
        "flux.kind": f.kind, "flux.alpha": float(f.alpha), "flux.beta": float(f.beta),
        "flux.b": float(f.b),
        "solver.scheme": s.scheme, "solver.dt": float(s.dt), "solver.t_end": float(s.t_end),
        "solver.nu": float(s.nu), "solver.stabilization": float(s.stabilization),
        "solver.mollifier_eps0": float(s.mollifier_eps0), "solver.max_iter": s.max_iter,
        "solver.fp_tol": float(s.fp_tol),
        "init.kind": i.kind, "init.amp": float(i.amp), "init.slope": float(i.slope),
        "init.kx": float(i.kx), "init.ky": float(i.ky),
        "output.sample_every": o.sample_every, "output.snapshot_every": o.snapshot_every,
        "output.histogram": o.histogram,
        "stability.amp": float(st.amp), "stability.seed": st.seed,
    }
    if i.seed is not None:
        out["init.seed"] = i.seed
    if i.path:
        out["init.path"] = i.path
    return {k: _fmt(v) for k, v in out.items()}


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize(c)) == c``."""
    lines = [f"{k} = {v}" for k, v in _flatten(cfg).items()]
    for key, values in cfg.sweep:
        lines.append(f"sweep.{key} = {', '.join(values)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def initial_field(cfg: ExperimentConfig, base_dir: Path | None = None) -> HeightField:
    grid = cfg.grid
    init = cfg.init
    if init.kind == "white_noise":
        seed = cfg.seed if init.seed is None else init.seed
        rng = np.random.default_rng(seed)
        return HeightField(grid, init.amp * rng.standard_normal(grid.shape))
    x, y = grid.coords()
    if init.kind == "pyramid":
        cx, cy = grid.lx / 2, grid.ly / 2
        return HeightField(grid, -init.slope * (np.abs(x - cx) + np.abs(y - cy)))
    if init.kind == "cosine":
        return HeightField(grid, init.amp * np.cos(init.kx * x) * np.cos(init.ky * y))
    path = Path(init.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    h = read_snapshot(path, ly=grid.ly)
    if h.grid.shape != grid.shape:
        raise ValidationError("init.path", f"snapshot shape {h.grid.shape} != grid {grid.shape}")
    return HeightField(grid, h.values, 0.0)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)

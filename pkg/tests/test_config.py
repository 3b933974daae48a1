import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbe.config import (ParseError, ValidationError, initial_field, parse_config, serialize)
from mbe.flux import FluxKind
from mbe.grid import BC, HeightField, write_snapshot

BASE = """\
# minimal run
seed = 5
grid.nx = 16
grid.ny = 12
grid.lx = 16
grid.ly = 12
flux.kind = cubic_anisotropic
flux.b = 0.25
solver.dt = 0.1
solver.t_end = 1
init.kind = white_noise
init.amp = 0.02
"""


def test_parse_defaults():
    cfg = parse_config(BASE)
    assert cfg.seed == 5 and cfg.grid.bc is BC.NEUMANN
    assert cfg.flux.kind is FluxKind.CUBIC_ANISOTROPIC and cfg.flux.b == 0.25
    assert cfg.solver.nu == 1.0 and cfg.output.sample_every == 1
    assert cfg.expand() == [({}, cfg)]


def test_empty_file_is_missing_sections():
    with pytest.raises(ValidationError, match="missing required sections"):
        parse_config("")


def test_b_outside_range():
    with pytest.raises(ValidationError) as info:
        parse_config(BASE.replace("flux.b = 0.25", "flux.b = 1.5"))
    assert info.value.key == "flux.b"


@pytest.mark.parametrize("line, fragment", [
    ("grid.nz = 4", "unknown key"),
    ("just words", "key = value"),
    ("grid.nx = 8", "duplicate"),
    ("sweep.grid.nope = 1, 2", "unknown key"),
])
def test_parse_errors_carry_line_numbers(line, fragment):
    with pytest.raises(ParseError) as info:
        parse_config(BASE + line + "\n")
    (lineno, msg), = info.value.errors
    assert lineno == BASE.count("\n") + 1 and fragment in msg


@pytest.mark.parametrize("old, new, key", [
    ("grid.nx = 16", "grid.nx = 2", "grid"),
    ("grid.nx = 16", "grid.nx = 1.5", "grid.nx"),
    ("solver.dt = 0.1", "solver.dt = 5", "solver.dt"),
    ("solver.dt = 0.1", "solver.dt = -1", "solver.dt"),
    ("flux.kind = cubic_anisotropic", "flux.kind = other", "flux.kind"),
    ("init.kind = white_noise", "init.kind = file", "init.path"),
    ("init.kind = white_noise", "init.kind = spiral", "init.kind"),
    ("init.amp = 0.02", "init.amp = lots", "init.amp"),
])
def test_validation_names_the_key(old, new, key):
    with pytest.raises(ValidationError) as info:
        parse_config(BASE.replace(old, new))
    assert info.value.key == key


def test_sweep_points_are_validated_and_expanded():
    cfg = parse_config(BASE + "sweep.flux.b = 0, 0.25, 0.5\nsweep.seed = 1, 2\n")
    points = cfg.expand()
    assert len(points) == 6
    assert [p for p, _ in points][:2] == [{"flux.b": "0", "seed": "1"}, {"flux.b": "0", "seed": "2"}]
    assert [c.flux.b for _, c in points[::2]] == [0.0, 0.25, 0.5]
    with pytest.raises(ValidationError):
        parse_config(BASE + "sweep.flux.b = 0, 1.5\n")


def test_round_trip():
    cfg = parse_config(BASE + "sweep.flux.b = 0, 0.5\n")
    text = serialize(cfg)
    assert parse_config(text) == cfg
    assert serialize(parse_config(text)) == text


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(1e-4, 1.0), st.integers(0, 2**31),
       st.sampled_from(["neumann", "periodic"]), st.sampled_from([k.value for k in FluxKind]))
def test_round_trip_property(b, dt, seed, bc, kind):
    text = (BASE.replace("flux.b = 0.25", f"flux.b = {b!r}")
            .replace("solver.dt = 0.1", f"solver.dt = {dt!r}")
            .replace("seed = 5", f"seed = {seed}")
            .replace("flux.kind = cubic_anisotropic", f"flux.kind = {kind}")
            + f"grid.bc = {bc}\n")
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg


def test_initial_fields(tmp_path):
    cfg = parse_config(BASE)
    a = initial_field(cfg)
    expected = 0.02 * np.random.default_rng(5).standard_normal((16, 12))
    np.testing.assert_array_equal(a.values, expected)
    seeded = parse_config(BASE + "init.seed = 9\n")
    assert not np.array_equal(initial_field(seeded).values, a.values)
    pyr = initial_field(parse_config(BASE.replace("white_noise", "pyramid") + "init.slope = 0.5\n"))
    assert pyr.values.max() == pytest.approx(-0.5)
    cos = initial_field(parse_config(BASE.replace("white_noise", "cosine") + "init.kx = 0.5\n"))
    x, _ = cfg.grid.coords()
    np.testing.assert_allclose(cos.values, 0.02 * np.cos(0.5 * x))
    write_snapshot(tmp_path / "h.bin", HeightField(cfg.grid, expected, 3.0))
    f = parse_config(BASE.replace("white_noise", "file") + "init.path = h.bin\n")
    loaded = initial_field(f, base_dir=tmp_path)
    np.testing.assert_array_equal(loaded.values, expected)
    assert loaded.time == 0.0
    small = parse_config(BASE.replace("grid.nx = 16", "grid.nx = 8").replace("white_noise", "file")
                         + "init.path = h.bin\n")
    with pytest.raises(ValidationError):
        initial_field(small, base_dir=tmp_path)


def test_shipped_configs_parse():
    from pathlib import Path
    root = Path(__file__).resolve().parent.parent / "configs"
    paths = sorted(root.glob("*.cfg"))
    assert len(paths) >= 4
    for path in paths:
        cfg = parse_config(path.read_text())
        assert parse_config(serialize(cfg)) == cfg


def test_shipped_constructive_config_converges(tmp_path):
    from pathlib import Path
    from mbe import cli
    path = Path(__file__).resolve().parent.parent / "configs" / "constructive.cfg"
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path)]) == 0

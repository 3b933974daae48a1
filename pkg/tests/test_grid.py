import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbe.grid import (BC, Grid, HeightField, bilaplacian, divergence_centers, gradient_faces,
                      laplacian, mollifier_kernel, mollify, read_snapshot, spectral_forward,
                      spectral_inverse, write_snapshot)

from conftest import random_grid


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(3, 8, 1.0, 1.0)
    with pytest.raises(ValueError):
        Grid(8, 8, 0.0, 1.0)
    g = Grid(10, 1, 5.0, 0.5, allow_strip=True)
    assert g.shape == (10, 1)
    assert BC.parse("Periodic") is BC.PERIODIC


def test_gradient_of_linear_ramp_is_exact_in_the_interior():
    g = Grid(16, 12, 8.0, 6.0, BC.NEUMANN)
    x, y = g.coords()
    s = gradient_faces(2.0 * x - 3.0 * y, g)
    assert s.px.shape == (17, 12) and s.qy.shape == (16, 13)
    np.testing.assert_allclose(s.px[1:-1], 2.0, rtol=1e-13)
    np.testing.assert_allclose(s.qy[:, 1:-1], -3.0, rtol=1e-13)
    # no-flux faces carry zero slope
    assert np.all(s.px[[0, -1]] == 0) and np.all(s.qy[:, [0, -1]] == 0)


def test_gradient_matches_hand_differences(rng):
    g = Grid(7, 5, 3.5, 2.0, BC.PERIODIC)
    h = rng.standard_normal(g.shape)
    s = gradient_faces(h, g)
    for i in range(1, g.nx):
        np.testing.assert_allclose(s.px[i], (h[i] - h[i - 1]) / g.dx)
    np.testing.assert_allclose(s.px[0], (h[0] - h[-1]) / g.dx)
    np.testing.assert_allclose(s.px[-1], s.px[0])
    np.testing.assert_allclose(s.qy[:, 0], (h[:, 0] - h[:, -1]) / g.dy)


@pytest.mark.parametrize("bc", [BC.NEUMANN, BC.PERIODIC])
def test_divergence_telescopes_to_zero(rng, bc):
    g = Grid(13, 9, 2.0, 3.0, bc)
    fx = rng.standard_normal((g.nx + 1, g.ny))
    fy = rng.standard_normal((g.nx, g.ny + 1))
    if bc is BC.NEUMANN:
        fx[[0, -1]] = 0
        fy[:, [0, -1]] = 0
    else:
        fx[-1] = fx[0]
        fy[:, -1] = fy[:, 0]
    assert abs(divergence_centers(fx, fy, g).sum()) < 1e-11


def test_laplacian_is_second_order_on_a_neumann_cosine():
    errs = []
    for n in (16, 32, 64):
        g = Grid(n, n, np.pi, np.pi, BC.NEUMANN)
        x, y = g.coords()
        h = np.cos(2 * x) * np.cos(y)
        errs.append(np.abs(laplacian(h, g) + 5 * h).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_neumann_cosine_mode_is_an_exact_eigenvector():
    g = Grid(20, 12, 4.0, 3.0, BC.NEUMANN)
    x, y = g.coords()
    mx, my = 3, 2
    h = np.cos(np.pi * mx * x / g.lx) * np.cos(np.pi * my * y / g.ly)
    lam = g.laplacian_symbol()[mx, my]
    np.testing.assert_allclose(laplacian(h, g), lam * h, atol=1e-11)


@pytest.mark.parametrize("bc", [BC.NEUMANN, BC.PERIODIC])
def test_spectral_transform_diagonalises_the_laplacian(rng, bc):
    g = Grid(11, 14, 3.0, 5.0, bc)
    h = rng.standard_normal(g.shape)
    direct = laplacian(h, g)
    spectral = spectral_inverse(g.laplacian_symbol() * spectral_forward(h, g), g)
    np.testing.assert_allclose(spectral, direct, atol=1e-10)
    np.testing.assert_allclose(spectral_inverse(spectral_forward(h, g), g), h, atol=1e-13)


def test_summation_by_parts_on_random_grids(rng):
    for _ in range(20):
        g = random_grid(rng)
        h = rng.standard_normal(g.shape)
        v = rng.standard_normal(g.shape)
        sh, sv = gradient_faces(h, g), gradient_faces(v, g)
        lhs = (v * laplacian(h, g)).sum() * g.cell_area
        # interior faces only; periodic duplicates the wrap face
        px_h, px_v = sh.px[:-1], sv.px[:-1]
        qy_h, qy_v = sh.qy[:, :-1], sv.qy[:, :-1]
        rhs = -((px_h * px_v).sum() + (qy_h * qy_v).sum()) * g.cell_area
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_bilaplacian_factorises(rng):
    for _ in range(20):
        g = random_grid(rng)
        h = rng.standard_normal(g.shape)
        a = bilaplacian(h, g)
        b = laplacian(laplacian(h, g), g)
        assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())


def test_mollifier_kernel():
    k = mollifier_kernel(0.5, 1.0, 1.0)
    assert k.shape == (1, 1) and k[0, 0] == 1.0
    k = mollifier_kernel(3.0, 1.0, 0.5)
    assert k.shape == (7, 13)
    assert k[0, 6] == 0.0 and k[3, 6] == k.max()
    assert abs(k.sum() - 1.0) < 1e-14
    np.testing.assert_allclose(k, k[::-1, ::-1])


@pytest.mark.parametrize("bc", [BC.NEUMANN, BC.PERIODIC])
def test_mollify_keeps_mass_and_constants(rng, bc):
    g = Grid(24, 20, 12.0, 10.0, bc)
    h = rng.standard_normal(g.shape)
    m = mollify(h, 2.0, g)
    assert abs(m.sum() - h.sum()) < 1e-10
    assert m.std() < h.std()
    np.testing.assert_allclose(mollify(np.full(g.shape, 3.5), 2.0, g), 3.5, rtol=1e-14)
    np.testing.assert_array_equal(mollify(h, 0.1, g), h)
    with pytest.raises(ValueError):
        mollify(h, 30.0, g)


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid(9, 6, 4.5, 3.0, BC.PERIODIC)
    h = HeightField(g, rng.standard_normal(g.shape), time=1.25)
    path = tmp_path / "h.bin"
    write_snapshot(path, h)
    data = path.read_bytes()
    assert data[:4] == b"MBEH" and len(data) == 36 + 8 * 54
    back = read_snapshot(path)
    assert back.grid == g and back.time == 1.25
    np.testing.assert_array_equal(back.values, h.values)


def test_snapshot_rejects_corruption(tmp_path):
    g = Grid(4, 4, 1.0, 1.0)
    path = tmp_path / "h.bin"
    write_snapshot(path, HeightField(g, np.zeros(g.shape)))
    data = path.read_bytes()
    (tmp_path / "short.bin").write_bytes(data[:-8])
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + data[4:])
    for name in ("short.bin", "magic.bin"):
        with pytest.raises(ValueError):
            read_snapshot(tmp_path / name)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 24), st.integers(4, 24), st.sampled_from([BC.NEUMANN, BC.PERIODIC]),
       st.integers(0, 2**32 - 1))
def test_laplacian_conserves_sum_and_is_nonpositive(nx, ny, bc, seed):
    g = Grid(nx, ny, float(nx), 0.7 * ny, bc)
    h = np.random.default_rng(seed).standard_normal(g.shape)
    lap = laplacian(h, g)
    assert abs(lap.sum()) < 1e-9 * np.abs(lap).sum()
    assert (h * lap).sum() <= 1e-12

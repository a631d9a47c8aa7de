from pathlib import Path

import numpy as np
import pytest

from surfmotion import mesh as Msh
from surfmotion import viz as V
from surfmotion.errors import IoError, ValidationError

DATA = Path(__file__).parent / "data"


def test_project_rescale():
    np.testing.assert_allclose(V.project_rescale([3, 4, 0]), [[3, 4]])
    np.testing.assert_array_equal(V.project_rescale([0, 0, 1]), [[0, 0]])
    np.testing.assert_allclose(V.project_rescale([1, 0, 1]), [[np.sqrt(2), 0]], atol=1e-15)
    X = np.random.default_rng(0).normal(size=(500, 3))
    out = V.project_rescale(X)
    assert np.abs(np.linalg.norm(out, axis=1) - np.linalg.norm(X, axis=1)).max() < 1e-12


def test_color_wheel_shape():
    w = V.color_wheel()
    assert w.shape == (55, 3)
    np.testing.assert_array_equal(w[0], [255, 0, 0])
    assert w.min() >= 0 and w.max() <= 255


def test_colorize_cases():
    assert np.all(V.colorize(np.zeros((4, 2))) == 255)
    np.testing.assert_array_equal(V.colorize([[2.0, 0.0]], R=2.0), [[255, 0, 0]])
    np.testing.assert_array_equal(V.colorize([[2.0, -0.0]], R=2.0), [[255, 0, 0]])
    # half saturation blends halfway to white
    np.testing.assert_array_equal(V.colorize([[1.0, 0.0]], R=2.0), [[255, 128, 128]])
    rng = np.random.default_rng(1)
    uv = rng.normal(size=(50, 2))
    np.testing.assert_array_equal(V.colorize(uv, 1.5), V.colorize(7.0 * uv, 10.5))
    np.testing.assert_array_equal(V.colorize(uv), V.colorize(3.0 * uv))


def test_antiparallel_vectors_are_half_a_turn_apart():
    ang = np.linspace(0.1, 6.0, 20)
    uv = np.stack([np.cos(ang), np.sin(ang)], 1)
    d = np.abs(V.wheel_position(uv) - V.wheel_position(-uv))
    np.testing.assert_allclose(d, 27.0, atol=1e-12)


def test_streamlines():
    const = lambda p: np.tile([1.0, 0.0], (len(p), 1))
    lines = V.streamlines(const, [[0.0, 0.0]], 0.1)
    assert lines.shape == (1, 51, 2)
    assert np.abs(lines[0, -1] - [5.0, 0.0]).max() < 1e-12
    still = V.streamlines(lambda p: np.zeros_like(p), [[0.3, -0.2]], 0.1)
    assert np.all(still[0] == [0.3, -0.2])
    rot = lambda p: np.stack([-p[:, 1], p[:, 0]], 1)
    r = np.linalg.norm(V.streamlines(rot, [[1.0, 0.0]], 0.1)[0], axis=1)
    assert np.all(np.diff(r) > 0)
    with pytest.raises(ValidationError):
        V.streamlines(const, [[0, 0]], 0.0)


def test_grid_sampler_in_streamlines():
    xs = ys = np.linspace(-2, 2, 41)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = np.stack([np.ones_like(X), 0.5 * np.ones_like(Y)], -1)
    lines = V.streamlines(V.grid_sampler(xs, ys, vals), [[-1.0, -1.0]], 0.02)
    np.testing.assert_allclose(lines[0, -1], [0.0, -0.5], atol=1e-12)
    assert np.all(V.grid_sampler(xs, ys, vals)([[5.0, 5.0]]) == 0)


def test_streamline_colours():
    c = V.streamline_colors()
    assert len(c) == 51
    np.testing.assert_array_equal(c[0], [255, 255, 0])
    np.testing.assert_array_equal(c[-1], [0, 255, 0])


def test_ppm_golden_files(tmp_path):
    red = np.zeros((2, 2, 3), np.uint8)
    red[..., 0] = 255
    assert V.ppm_bytes(red) == (DATA / "red_2x2.ppm").read_bytes()
    ramp = np.array([[[0, 0, 0], [128, 64, 32], [255, 255, 255]]], np.uint8)
    V.write_ppm(tmp_path / "r.ppm", ramp)
    assert (tmp_path / "r.ppm").read_bytes() == (DATA / "ramp_3x1.ppm").read_bytes()
    np.testing.assert_array_equal(V.read_ppm(DATA / "ramp_3x1.ppm"), ramp)
    assert len(V.ppm_bytes(red)) == 11 + 12


def test_ppm_errors(tmp_path):
    with pytest.raises(ValidationError):
        V.ppm_bytes(np.zeros((2, 2)))
    with pytest.raises(IoError):
        V.write_ppm(tmp_path / "missing" / "x.ppm", np.zeros((1, 1, 3), np.uint8))


def test_top_view_raster():
    m = Msh.icosphere(3)
    rgb = np.zeros((len(m.faces), 3), np.uint8)
    img = V.raster_top_view(m, rgb, size=64)
    assert img.shape == (64, 64, 3)
    assert np.all(img[32, 32] == 0)          # disc centre covered
    assert np.all(img[0, 0] == 255)          # corner is background
    white = V.raster_top_view(m, V.color_faces(m, lambda x: np.zeros_like(x)), size=16)
    assert np.all(white == 255)


def test_vtk_export(tmp_path):
    m = Msh.icosphere(0)
    txt = V.vtk_text(m, face_rgb=np.zeros((20, 3)), point_scalars=np.ones(12), point_vectors=np.zeros((12, 3)))
    lines = txt.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    assert "POINTS 12 double" in lines and "POLYGONS 20 80" in lines
    assert "CELL_DATA 20" in lines and "POINT_DATA 12" in lines and "VECTORS velocity double" in lines
    bare = V.vtk_text(m, point_vectors=np.zeros((0, 3)))
    assert "VECTORS" not in bare and "POINT_DATA" not in bare
    V.write_vtk(tmp_path / "m.vtk", m)
    assert (tmp_path / "m.vtk").read_text().count("\n3 ") == 20


def test_svg_export(tmp_path):
    lines = V.streamlines(lambda p: np.tile([1.0, 0.0], (len(p), 1)), [[0, 0], [0, 1]], 0.1)
    V.write_svg(tmp_path / "s.svg", lines)
    text = (tmp_path / "s.svg").read_text()
    assert text.count("<line") == 100 and "rgb(0,255,0)" in text

"""Flow colour coding, top-view rasters, streamlines and file exports."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.tri import Triangulation
from scipy.interpolate import RegularGridInterpolator

from .errors import IoError, ValidationError
from .mesh import TriSphereMesh, face_centroids

# Middlebury wheel segment lengths: red-yellow, yellow-green, green-cyan,
# cyan-blue, blue-magenta, magenta-red
WHEEL_SEGMENTS = (15, 6, 4, 11, 13, 6)
YELLOW = np.array([255, 255, 0], dtype=float)
GREEN = np.array([0, 255, 0], dtype=float)


def project_rescale(X):
    """Drop the third component and rescale to the original length (0 if nothing is left)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    planar = X[:, :2]
    pn = np.linalg.norm(planar, axis=1)
    full = np.linalg.norm(X, axis=1)
    scale = np.divide(full, pn, out=np.zeros_like(pn), where=pn > 0)
    return planar * scale[:, None]


def color_wheel() -> np.ndarray:
    """The 55-entry Middlebury hue wheel as float RGB in [0, 255]."""
    ry, yg, gc, cb, bm, mr = WHEEL_SEGMENTS
    ramp = lambda n: np.floor(255 * np.arange(n) / n)
    cols = []
    cols.append(np.stack([np.full(ry, 255.0), ramp(ry), np.zeros(ry)], 1))
    cols.append(np.stack([255 - ramp(yg), np.full(yg, 255.0), np.zeros(yg)], 1))
    cols.append(np.stack([np.zeros(gc), np.full(gc, 255.0), ramp(gc)], 1))
    cols.append(np.stack([np.zeros(cb), 255 - ramp(cb), np.full(cb, 255.0)], 1))
    cols.append(np.stack([ramp(bm), np.zeros(bm), np.full(bm, 255.0)], 1))
    cols.append(np.stack([np.full(mr, 255.0), np.zeros(mr), 255 - ramp(mr)], 1))
    return np.vstack(cols)


def wheel_position(uv):
    """Fractional index into :func:`color_wheel` for planar vectors."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float)) + 0.0  # -0.0 -> +0.0 keeps +x at index 0
    ncols = sum(WHEEL_SEGMENTS)
    a = np.arctan2(-uv[:, 1], -uv[:, 0]) / np.pi
    return (a + 1.0) / 2.0 * (ncols - 1)


def colorize(uv, R=None) -> np.ndarray:
    """RGB (uint8) per planar vector; hue by direction, saturation ``min(|v| / R, 1)``.

    ``R`` defaults to the longest vector. Zero vectors (and an all-zero
    field) map to white.
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    mag = np.linalg.norm(uv, axis=1)
    if R is None:
        R = float(mag.max()) if len(mag) else 0.0
    if R < 0:
        raise ValidationError("wheel radius must be non-negative")
    sat = np.zeros_like(mag) if R == 0 else np.minimum(mag / R, 1.0)
    wheel = color_wheel() / 255.0
    fk = wheel_position(uv)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % len(wheel)
    f = (fk - k0)[:, None]
    col = (1 - f) * wheel[k0] + f * wheel[k1]
    col = 1.0 - sat[:, None] * (1.0 - col)
    return np.floor(255.0 * col + 0.5).clip(0, 255).astype(np.uint8)


def raster_top_view(mesh: TriSphereMesh, face_rgb, size=256, radius=None,
                    background=(255, 255, 255)) -> np.ndarray:
    """Orthographic view along ``-e3`` of the faces with all vertices in ``z >= 0``.

    ``radius`` scales mesh vertices (per-vertex array or scalar); pixel rows
    run from ``+y`` (top) to ``-y``.
    """
    face_rgb = np.asarray(face_rgb, dtype=np.uint8)
    verts = mesh.vertices * (1.0 if radius is None else np.asarray(radius, dtype=float).reshape(-1, 1))
    upper = np.all(mesh.vertices[mesh.faces, 2] >= -1e-12, axis=1)
    faces = mesh.faces[upper]
    tri = Triangulation(verts[:, 0], verts[:, 1], faces)
    ext = np.abs(verts[np.unique(faces), :2]).max() * (1 + 1e-9)
    c = (np.arange(size) + 0.5) / size * 2 * ext - ext
    px, py = np.meshgrid(c, -c)
    idx = tri.get_trifinder()(px.ravel(), py.ravel())
    img = np.empty((size * size, 3), dtype=np.uint8)
    img[:] = background
    hit = idx >= 0
    img[hit] = face_rgb[np.flatnonzero(upper)[idx[hit]]]
    return img.reshape(size, size, 3)


def color_faces(mesh: TriSphereMesh, field_at, R=None):
    """Colour each face from ``field_at(centroids) -> (F, 3)`` ambient vectors."""
    vec = field_at(face_centroids(mesh))
    return colorize(project_rescale(vec), R)


def grid_sampler(xs, ys, values):
    """Bilinear sampler of a planar field on a grid ``values[i, j] = v(xs[i], ys[j])``; zero outside."""
    interp = RegularGridInterpolator((np.asarray(xs), np.asarray(ys)), np.asarray(values, dtype=float),
                                     method="linear", bounds_error=False, fill_value=0.0)
    return interp


def streamlines(sampler, seeds, kappa, steps=50):
    """Explicit Euler paths ``p <- p + kappa v(p)``; returns ``(S, steps + 1, 2)``."""
    if kappa <= 0:
        raise ValidationError("step size kappa must be positive")
    p = np.atleast_2d(np.asarray(seeds, dtype=float)).copy()
    out = np.empty((len(p), steps + 1, 2))
    out[:, 0] = p
    for k in range(steps):
        p = p + kappa * np.asarray(sampler(p), dtype=float).reshape(p.shape)
        out[:, k + 1] = p
    return out


def streamline_colors(steps=50):
    """Yellow to green ramp over ``steps + 1`` points."""
    s = np.linspace(0.0, 1.0, steps + 1)[:, None]
    return np.rint((1 - s) * YELLOW + s * GREEN).astype(np.uint8)


def _write_bytes(path, data):
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def ppm_bytes(rgb) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValidationError("raster must have shape (height, width, 3)")
    h, w = rgb.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_ppm(path, rgb):
    _write_bytes(path, ppm_bytes(rgb))


def read_ppm(path):
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValidationError("not an 8-bit binary PPM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(data[-3 * w * h:], dtype=np.uint8).reshape(h, w, 3)


def vtk_text(mesh: TriSphereMesh, radius=None, point_scalars=None, point_vectors=None,
             face_rgb=None, title="surface") -> str:
    """Legacy ASCII VTK 3.0 PolyData."""
    pts = mesh.vertices * (1.0 if radius is None else np.asarray(radius, dtype=float).reshape(-1, 1))
    nv, nf = len(pts), len(mesh.faces)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA", f"POINTS {nv} double"]
    out += [f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for p in pts]
    out.append(f"POLYGONS {nf} {4 * nf}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    if face_rgb is not None:
        rgb = np.asarray(face_rgb, dtype=float) / 255.0
        out += [f"CELL_DATA {nf}", "COLOR_SCALARS rgb 3"]
        out += [f"{r:.6g} {g:.6g} {b:.6g}" for r, g, b in rgb]
    if point_scalars is not None or (point_vectors is not None and len(point_vectors)):
        out.append(f"POINT_DATA {nv}")
        if point_scalars is not None:
            out += ["SCALARS intensity double 1", "LOOKUP_TABLE default"]
            out += [f"{v:.17g}" for v in np.asarray(point_scalars, dtype=float)]
        if point_vectors is not None and len(point_vectors):
            out.append("VECTORS velocity double")
            out += [f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in np.asarray(point_vectors, dtype=float)]
    return "\n".join(out) + "\n"


def write_vtk(path, mesh, **kw):
    _write_bytes(path, vtk_text(mesh, **kw).encode("ascii"))


def svg_text(lines, size=512, extent=None, stroke=1.0) -> str:
    """Streamlines as SVG segments coloured along their parameter."""
    lines = np.asarray(lines, dtype=float)
    if extent is None:
        extent = float(np.abs(lines).max()) if lines.size else 1.0
        extent = extent or 1.0
    cols = streamline_colors(lines.shape[1] - 1) if lines.size else np.zeros((0, 3), np.uint8)
    sx = lambda v: (v / extent + 1) * size / 2
    sy = lambda v: (1 - v / extent) * size / 2
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">', f'<rect width="{size}" height="{size}" fill="black"/>']
    for line in lines:
        for k in range(len(line) - 1):
            (x0, y0), (x1, y1) = line[k], line[k + 1]
            r, g, b = cols[k + 1]
            out.append(f'<line x1="{sx(x0):.3f}" y1="{sy(y0):.3f}" x2="{sx(x1):.3f}" y2="{sy(y1):.3f}" '
                       f'stroke="rgb({r},{g},{b})" stroke-width="{stroke}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, lines, **kw):
    _write_bytes(path, svg_text(lines, **kw).encode("utf-8"))

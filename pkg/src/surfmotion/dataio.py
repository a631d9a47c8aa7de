"""Volumetric time series: loading, interpolation, cell detection, centring and
narrow-band projection of intensities onto a fitted surface.

Volume files are a raw little-endian payload (``u8`` or ``f32``) next to a JSON
sidecar with keys ``dims``, ``dtype``, ``spacing_um``, ``origin_um``,
``frames``, ``frame_interval_s`` and ``max_value``. The payload holds
``frames * nx * ny * nz`` values in C order of ``(frame, ix, iy, iz)``.
Voxel ``(i, j, k)`` has its centre at ``origin + spacing * (i, j, k)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (DegenerateConfiguration, DimensionMismatch, FormatError,
                     FrameOutOfRange, ValidationError)
from .geometry import eval_frame_auto

DTYPES = {"u8": np.dtype("<u1"), "f32": np.dtype("<f4")}
BAND_SAMPLES = 21


@dataclass
class VolumetricSequence:
    data: np.ndarray                  # (frames, nx, ny, nz) in [0, 1]
    spacing: np.ndarray = field(default_factory=lambda: np.ones(3))
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame_interval: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 4:
            raise ValidationError("volume data must have shape (frames, nx, ny, nz)")
        self.spacing = np.broadcast_to(np.asarray(self.spacing, dtype=float), (3,)).copy()
        self.origin = np.broadcast_to(np.asarray(self.origin, dtype=float), (3,)).copy()
        if np.any(self.spacing <= 0):
            raise ValidationError("voxel spacing must be positive")

    @property
    def n_frames(self):
        return self.data.shape[0]

    @property
    def dims(self):
        return tuple(self.data.shape[1:])

    def frame(self, t):
        if int(t) != t or not 0 <= t < self.n_frames:
            raise FrameOutOfRange(f"frame {t} outside 0..{self.n_frames - 1}")
        return self.data[int(t)]

    def to_voxel(self, p):
        return (np.asarray(p, dtype=float) - self.origin) / self.spacing

    def to_um(self, idx):
        return self.origin + np.asarray(idx, dtype=float) * self.spacing


def _sidecar_path(path):
    path = Path(path)
    return path.with_suffix(".json") if path.suffix != ".json" else path


def _payload_path(path):
    path = Path(path)
    return path.with_suffix(".raw") if path.suffix == ".json" else path


def save_sequence(path, seq: VolumetricSequence, dtype: str = "f32", max_value=None):
    """Write ``seq`` as ``<stem>.raw`` + ``<stem>.json``; returns the sidecar path."""
    if dtype not in DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}")
    if max_value is None:
        max_value = 255.0 if dtype == "u8" else 1.0
    raw = seq.data * max_value
    if dtype == "u8":
        raw = np.clip(np.rint(raw), 0, 255)
    payload = _payload_path(path)
    payload.write_bytes(raw.astype(DTYPES[dtype]).tobytes(order="C"))
    header = {
        "dims": list(seq.dims),
        "dtype": dtype,
        "spacing_um": seq.spacing.tolist(),
        "origin_um": seq.origin.tolist(),
        "frames": seq.n_frames,
        "frame_interval_s": float(seq.frame_interval),
        "max_value": float(max_value),
        "payload": payload.name,
    }
    side = _sidecar_path(path)
    side.write_text(json.dumps(header, indent=1))
    return side


def load_sequence(path) -> VolumetricSequence:
    """Load a raw+JSON volume sequence; intensities are divided by ``max_value``."""
    side = _sidecar_path(path)
    try:
        header = json.loads(side.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"unreadable sidecar {side}") from exc
    try:
        dims = [int(d) for d in header["dims"]]
        dtype = DTYPES[header["dtype"]]
        frames = int(header["frames"])
        max_value = float(header["max_value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"incomplete or invalid sidecar: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1 or frames < 1 or max_value <= 0:
        raise FormatError("sidecar dims/frames/max_value out of range")
    payload = side.parent / header.get("payload", side.with_suffix(".raw").name)
    raw = payload.read_bytes()
    expected = frames * int(np.prod(dims)) * dtype.itemsize
    if len(raw) != expected:
        raise DimensionMismatch(f"payload has {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype=dtype).astype(float).reshape([frames] + dims) / max_value
    return VolumetricSequence(np.clip(data, 0.0, 1.0), header.get("spacing_um", [1, 1, 1]),
                              header.get("origin_um", [0, 0, 0]),
                              float(header.get("frame_interval_s", 1.0)))


def trilinear_sample(seq: VolumetricSequence, t, p):
    """Piecewise linear interpolation at µm positions ``p``; zero outside the grid."""
    p = np.asarray(p, dtype=float)
    idx = seq.to_voxel(p.reshape(-1, 3)).T
    vals = ndimage.map_coordinates(seq.frame(t), idx, order=1, mode="constant", cval=0.0)
    return vals.reshape(p.shape[:-1])


def volume_gradient(seq: VolumetricSequence, t):
    """Per-voxel gradient in µm⁻¹, central inside and one-sided at the faces."""
    return np.stack(np.gradient(seq.frame(t), *seq.spacing, edge_order=1), axis=-1)


def _sample_gradient(grad, seq, p):
    idx = seq.to_voxel(p.reshape(-1, 3)).T
    comps = [ndimage.map_coordinates(grad[..., a], idx, order=1, mode="constant", cval=0.0)
             for a in range(3)]
    return np.stack(comps, axis=-1).reshape(p.shape)


def detect_cell_centres(seq: VolumetricSequence, t, sigma=5.0, threshold=0.3):
    """Local maxima of the Gaussian-smoothed frame at or above ``threshold`` (µm)."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    if not 0 < threshold < 1:
        raise ValidationError("threshold must lie in (0, 1)")
    smooth = ndimage.gaussian_filter(seq.frame(t), sigma / seq.spacing, truncate=3.0,
                                     mode="constant")
    peaks = (smooth == ndimage.maximum_filter(smooth, size=3, mode="constant")) & (smooth >= threshold)
    return seq.to_um(np.argwhere(peaks))


def fit_sphere(points):
    """Algebraic least-squares sphere ``|x|^2 = 2 c.x + d``; returns ``(centre, radius)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateConfiguration("need at least four points to fit a sphere")
    A = np.hstack([2.0 * pts, np.ones((len(pts), 1))])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("points are coplanar or otherwise degenerate")
    sol, *_ = np.linalg.lstsq(A, np.sum(pts**2, axis=1), rcond=None)
    c = sol[:3]
    return c, float(np.sqrt(sol[3] + c @ c))


def centre_points(frames):
    """Fit one sphere to the union of all frames and subtract its centre."""
    frames = [np.asarray(f, dtype=float).reshape(-1, 3) for f in frames]
    allp = np.vstack(frames) if frames else np.zeros((0, 3))
    c, _ = fit_sphere(allp)
    shifted = [f - c for f in frames]
    if any(np.any(np.linalg.norm(f, axis=1) == 0) for f in shifted):
        raise DegenerateConfiguration("a point coincides with the fitted centre")
    return c, shifted


def band_factors(eps, n=BAND_SAMPLES):
    if eps <= 0:
        raise ValidationError("band half-width must be positive")
    return np.linspace(1.0 - eps, 1.0 + eps, n)


def _band_points(rho, t_geom, nodes, eps, centre):
    r = rho(nodes, t_geom)
    y = r[:, None] * nodes
    return y, centre + band_factors(eps)[None, :, None] * y[:, None, :]


def radial_max_projection(seq, t, rho, eps, nodes, centre=(0, 0, 0), t_geom=0.0):
    """Maximum intensity along ``c * rho(x) x`` for ``c`` in ``[1-eps, 1+eps]``.

    ``rho`` is a radius evaluator (its time argument is ``t_geom``) in the
    centred frame; ``centre`` maps back to volume coordinates.
    """
    nodes = np.atleast_2d(nodes)
    _, pts = _band_points(rho, t_geom, nodes, eps, np.asarray(centre, dtype=float))
    return trilinear_sample(seq, t, pts).max(axis=1)


def surface_gradient(seq, t, rho, eps, nodes, centre=(0, 0, 0), t_geom=0.0, normals=None,
                     grad=None):
    """Tangential projection of the band-averaged volume gradient at ``rho(x) x``."""
    nodes = np.atleast_2d(nodes)
    _, pts = _band_points(rho, t_geom, nodes, eps, np.asarray(centre, dtype=float))
    if grad is None:
        grad = volume_gradient(seq, t)
    mean = _sample_gradient(grad, seq, pts).mean(axis=1)
    if normals is None:
        normals = eval_frame_auto(rho, t_geom, nodes).N
    return mean - np.sum(mean * normals, axis=1)[:, None] * normals


def zero_band_fraction(seq, t, rho, eps, nodes, centre=(0, 0, 0), t_geom=0.0):
    """Fraction of in-band samples with zero intensity (large values bias the projection)."""
    _, pts = _band_points(rho, t_geom, np.atleast_2d(nodes), eps, np.asarray(centre, dtype=float))
    return float(np.mean(trilinear_sample(seq, t, pts) == 0.0))


@dataclass
class SurfaceData:
    """Surface intensities ``values[t]`` and gradients ``grads[t]`` at fixed sphere nodes."""
    nodes: np.ndarray        # (M, 3) unit vectors
    values: np.ndarray       # (F, M)
    grads: np.ndarray        # (F, M, 3)
    eps: float = 0.1
    zero_fraction: float = 0.0
    truth: np.ndarray = None  # optional (F, M, 3) ground-truth tangential velocity

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.grads = np.asarray(self.grads, dtype=float).reshape(self.values.shape + (3,))
        if self.values.shape[1] != len(self.nodes):
            raise ValidationError("surface values do not match the node count")

    @property
    def n_frames(self):
        return len(self.values)

    def dt(self, t):
        return temporal_difference(self, t)

    def save(self, path):
        """Binary float64 payload ``<stem>.bin`` with a JSON manifest ``<stem>.json``."""
        side = _sidecar_path(path)
        arrays = {"nodes": self.nodes, "values": self.values, "grads": self.grads}
        if self.truth is not None:
            arrays["truth"] = self.truth
        layout, blobs, offset = {}, [], 0
        for name, arr in arrays.items():
            b = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            layout[name] = {"shape": list(arr.shape), "offset": offset}
            offset += len(b)
            blobs.append(b)
        side.with_suffix(".bin").write_bytes(b"".join(blobs))
        side.write_text(json.dumps({"format": "surface-data", "payload": side.with_suffix(".bin").name,
                                    "eps": self.eps, "zero_fraction": self.zero_fraction,
                                    "arrays": layout}, indent=1))
        return side

    @classmethod
    def load(cls, path):
        side = _sidecar_path(path)
        try:
            doc = json.loads(side.read_text())
            if doc.get("format") != "surface-data":
                raise FormatError("not a surface-data manifest")
            raw = (side.parent / doc["payload"]).read_bytes()
            arrays = {}
            for name, spec in doc["arrays"].items():
                n = int(np.prod(spec["shape"]))
                if spec["offset"] + 8 * n > len(raw):
                    raise DimensionMismatch(f"payload too short for array {name!r}")
                arrays[name] = np.frombuffer(raw, "<f8", n, spec["offset"]).reshape(spec["shape"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"invalid surface-data manifest: {exc}") from exc
        return cls(arrays["nodes"], arrays["values"], arrays["grads"], float(doc.get("eps", 0.1)),
                   float(doc.get("zero_fraction", 0.0)), arrays.get("truth"))


def temporal_difference(data: SurfaceData, t):
    """Forward difference ``f(t+1) - f(t)`` at matching sphere directions."""
    if int(t) != t or not 0 <= t < data.n_frames - 1:
        raise FrameOutOfRange(f"forward difference needs 0 <= t < {data.n_frames - 1}")
    return data.values[int(t) + 1] - data.values[int(t)]


def project_sequence(seq: VolumetricSequence, radius_for_frame, nodes, eps=0.1, centre=(0, 0, 0),
                     frames=None) -> SurfaceData:
    """Surface data at ``nodes`` for the given frames.

    ``radius_for_frame(t)`` returns the radius evaluator of frame ``t``.
    """
    frames = range(seq.n_frames) if frames is None else list(frames)
    nodes = np.atleast_2d(nodes)
    vals, grads, zeros = [], [], []
    for t in frames:
        rho = radius_for_frame(t)
        vals.append(radial_max_projection(seq, t, rho, eps, nodes, centre))
        grads.append(surface_gradient(seq, t, rho, eps, nodes, centre))
        zeros.append(zero_band_fraction(seq, t, rho, eps, nodes, centre))
    return SurfaceData(nodes, np.array(vals), np.array(grads), eps, float(np.mean(zeros)))

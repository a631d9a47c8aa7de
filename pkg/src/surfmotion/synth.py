"""Synthetic phantoms with known geometry and motion.

Surface phantoms are sums of geodesic Gaussian blobs ``a exp(-theta^2 / 2 sigma^2)``
on the sphere, optionally rotated rigidly about an axis by ``omega`` radians per
frame. Under the ``brightness`` law values are transported unchanged; under the
``mass`` law they are additionally scaled by the inverse area growth
``rho(0)^2 / rho(t)^2`` (round surfaces only).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from . import geometry
from .dataio import SurfaceData, VolumetricSequence
from .errors import ValidationError
from .harmonics import num_coeffs


@dataclass
class Blob:
    centre: np.ndarray
    sigma: float = 0.15
    amplitude: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.centre, dtype=float)
        n = np.linalg.norm(c)
        if n == 0:
            raise ValidationError("blob centre must be non-zero")
        self.centre = c / n
        if self.sigma <= 0:
            raise ValidationError("blob width must be positive")
        if not 0 < self.amplitude <= 1:
            raise ValidationError("blob amplitude must lie in (0, 1]")


@dataclass
class PhantomSpec:
    radius: dict = field(default_factory=lambda: {"kind": "constant", "r0": 1.0})
    blobs: list = field(default_factory=list)
    omega: float = 0.0
    axis: tuple = (0.0, 0.0, 1.0)
    law: str = "brightness"
    frames: int = 2
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.blobs = [b if isinstance(b, Blob) else Blob(**b) for b in self.blobs]
        if self.law not in ("brightness", "mass"):
            raise ValidationError("law must be 'brightness' or 'mass'")
        if self.frames < 1:
            raise ValidationError("at least one frame is required")
        if self.noise < 0:
            raise ValidationError("noise level must be non-negative")
        kind = self.radius.get("kind")
        if kind not in ("constant", "linear", "sh"):
            raise ValidationError("radius kind must be constant, linear or sh")
        if kind == "sh" and (self.omega != 0 or self.law == "mass"):
            raise ValidationError("rotating or mass phantoms need a round radius")
        a = np.asarray(self.axis, dtype=float)
        if np.linalg.norm(a) == 0:
            raise ValidationError("rotation axis must be non-zero")
        self.axis = tuple(a / np.linalg.norm(a))

    @classmethod
    def from_json(cls, doc):
        return cls(**doc)

    def to_json(self):
        return {"radius": self.radius,
                "blobs": [{"centre": b.centre.tolist(), "sigma": b.sigma, "amplitude": b.amplitude}
                          for b in self.blobs],
                "omega": self.omega, "axis": list(self.axis), "law": self.law,
                "frames": self.frames, "noise": self.noise, "seed": self.seed}

    def radius_evaluator(self, frame=None):
        """Continuous-time radius, or the radius frozen at ``frame`` with its exact rate."""
        kind = self.radius["kind"]
        if kind == "sh":
            c = np.asarray(self.radius["coeffs"], dtype=float)
            n = int(round(np.sqrt(c.size))) - 1
            if num_coeffs(n) != c.size:
                raise ValidationError("SH radius needs (n+1)^2 coefficients")
            return geometry.SHRadius(c)
        r0 = float(self.radius.get("r0", 1.0))
        c = float(self.radius.get("c", 0.0)) if kind == "linear" else 0.0
        if frame is None:
            return geometry.ConstantRadius(r0, c)
        return geometry.ConstantRadius(r0 + c * frame, c)

    def radius_at(self, t):
        kind = self.radius["kind"]
        if kind == "sh":
            raise ValidationError("radius_at is only defined for round phantoms")
        return float(self.radius.get("r0", 1.0)) + (float(self.radius.get("c", 0.0)) * t
                                                     if kind == "linear" else 0.0)

    def rotation(self, t):
        return Rotation.from_rotvec(np.asarray(self.axis) * self.omega * t)

    def blob_centres(self, t):
        if not self.blobs:
            return np.zeros((0, 3))
        return self.rotation(t).apply(np.array([b.centre for b in self.blobs]))


def _geodesic_blob(centre, sigma, amp, x):
    """Values and sphere gradients of ``amp * exp(-theta^2 / 2 sigma^2)``."""
    tau = np.clip(x @ centre, -1.0, 1.0)
    theta = np.arccos(tau)
    val = amp * np.exp(-theta**2 / (2 * sigma**2))
    sin = np.sqrt(np.maximum(1.0 - tau**2, 0.0))
    ratio = np.where(sin > 1e-12, theta / np.where(sin > 1e-12, sin, 1.0), 1.0)
    tangent = centre[None, :] - tau[:, None] * x
    return val, (val * ratio / sigma**2)[:, None] * tangent


def blob_field(blobs, centres, x):
    """Sum of geodesic blobs at the given (rotated) centres: values and sphere gradients."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    val = np.zeros(len(x))
    grad = np.zeros((len(x), 3))
    for b, c in zip(blobs, centres):
        v, g = _geodesic_blob(c, b.sigma, b.amplitude, x)
        val += v
        grad += g
    return val, grad


def surface_values(spec: PhantomSpec, t, x):
    """Exact surface intensity and its sphere gradient at frame ``t``."""
    val, grad = blob_field(spec.blobs, spec.blob_centres(t), x)
    if spec.law == "mass":
        scale = (spec.radius_at(0) / spec.radius_at(t)) ** 2
        val, grad = val * scale, grad * scale
    return val, grad


def true_tangential_velocity(spec: PhantomSpec, t, x):
    """Rigid rotation velocity ``omega a x y`` on the frame-``t`` surface (per frame)."""
    x = np.atleast_2d(x)
    rho = spec.radius_evaluator(t)(x)
    return spec.omega * np.cross(np.asarray(spec.axis)[None, :], rho[:, None] * x)


def generate_surface_phantom(spec: PhantomSpec, nodes) -> SurfaceData:
    """Surface data at sphere ``nodes`` for all frames, with ground-truth tangential velocity."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    vals, grads, truth = [], [], []
    for t in range(spec.frames):
        rho = spec.radius_evaluator(t)
        sample = geometry.eval_frame_auto(rho, 0.0, nodes)
        v, gs = surface_values(spec, t, nodes)
        vals.append(v)
        grads.append(geometry.surface_gradient_from_sphere(sample, gs))
        truth.append(true_tangential_velocity(spec, t, nodes))
    return SurfaceData(nodes, np.array(vals), np.array(grads), eps=0.0, zero_fraction=0.0,
                       truth=np.array(truth))


def generate_volume_phantom(spec: PhantomSpec, dims, spacing, origin=None, centre=None,
                            frame_interval=1.0) -> VolumetricSequence:
    """Voxelised 3-D Gaussians at ``rho(t, c) c`` for every blob centre ``c``.

    A blob of angular width ``sigma`` becomes an isotropic Gaussian of width
    ``sigma * rho`` µm. Additive noise is drawn from a seeded generator and the
    result is clipped to ``[0, 1]``.
    """
    dims = tuple(int(d) for d in dims)
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (3,))
    extent = spacing * (np.array(dims) - 1)
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    centre = origin + extent / 2 if centre is None else np.asarray(centre, dtype=float)
    rng = np.random.default_rng(spec.seed)
    data = np.zeros((spec.frames,) + dims)
    for t in range(spec.frames):
        cs = spec.blob_centres(t)
        if len(cs):
            r = spec.radius_evaluator(t)(cs)
        for b, c, rc in zip(spec.blobs, cs, r if len(cs) else []):
            _splat(data[t], centre + rc * c, b.sigma * rc, b.amplitude, origin, spacing)
        if spec.noise > 0:
            data[t] += rng.normal(0.0, spec.noise, dims)
    np.clip(data, 0.0, 1.0, out=data)
    return VolumetricSequence(data, spacing, origin, frame_interval)


def _splat(vol, p, sigma, amp, origin, spacing):
    """Add ``amp * exp(-|x - p|^2 / 2 sigma^2)`` within a 4 sigma box."""
    lo = np.maximum(np.floor((p - 4 * sigma - origin) / spacing).astype(int), 0)
    hi = np.minimum(np.ceil((p + 4 * sigma - origin) / spacing).astype(int) + 1, vol.shape)
    if np.any(hi <= lo):
        return
    axes = [origin[a] + spacing[a] * np.arange(lo[a], hi[a]) - p[a] for a in range(3)]
    g = [np.exp(-ax**2 / (2 * sigma**2)) for ax in axes]
    vol[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] += amp * g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :]


def fibonacci_sphere(n, z_min=-1.0):
    """``n`` well-spread unit vectors with ``z >= z_min`` on a Fibonacci spiral."""
    if n < 1:
        raise ValidationError("need at least one point")
    k = np.arange(n) + 0.5
    z = 1.0 - (1.0 - z_min) * k / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    s = np.sqrt(1.0 - z**2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def save_spec(path, spec: PhantomSpec):
    Path(path).write_text(json.dumps(spec.to_json(), indent=1))


def load_spec(path) -> PhantomSpec:
    return PhantomSpec.from_json(json.loads(Path(path).read_text()))

"""Compactly supported zonal functions and their tangent vector fields.

For a centre ``x_j`` and parameters ``(h, k)`` the zonal function is
``b(x_j . x)`` with ``b(tau) = ((tau - h) / (1 - h))**k`` above ``h`` and zero
below. Each centre spawns two tangent fields on the sphere,
``grad b`` and ``grad b x N``, which are pushed forward to ``M_t``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import geometry
from .errors import InvalidIndex, ValidationError


@dataclass(frozen=True)
class ZonalParams:
    h: float = 0.99
    k: int = 3

    def __post_init__(self):
        if not 0.0 < self.h < 1.0:
            raise ValidationError("support parameter h must lie in (0, 1)")
        if self.k < 0 or int(self.k) != self.k:
            raise ValidationError("degree k must be a non-negative integer")

    def profile(self, tau, order=0):
        """``b``, ``b'`` or ``b''`` evaluated at ``tau``."""
        tau = np.asarray(tau, dtype=float)
        h, k = self.h, int(self.k)
        s = (tau - h) / (1.0 - h)
        inside = tau > h
        if order > k:
            return np.zeros_like(tau)
        coef = 1.0
        for i in range(order):
            coef *= (k - i)
        out = np.zeros_like(tau)
        out[inside] = coef * s[inside] ** (k - order) / (1.0 - h) ** order
        return out

    @property
    def chord(self) -> float:
        """Euclidean radius of the support cap."""
        return float(np.sqrt(2.0 - 2.0 * self.h))


class NonSmoothEdge(UserWarning):
    """Zonal profile with k < 2 has a derivative kink at the support edge."""


@dataclass(frozen=True)
class BasisAtlas:
    centres: np.ndarray
    params: ZonalParams

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centres, dtype=float))
        if c.shape[1] != 3 or np.any(np.abs(np.linalg.norm(c, axis=1) - 1) > 1e-10):
            raise ValidationError("centres must be unit vectors")
        if len(c) > 1:
            d, _ = cKDTree(c).query(c, k=2)
            if np.min(d[:, 1]) <= 0.0:
                raise ValidationError("centres must be pairwise distinct")
        object.__setattr__(self, "centres", c)

    def __len__(self):
        """Number of tangent basis fields (two per centre)."""
        return 2 * len(self.centres)

    @staticmethod
    def index(j, i):
        """Flat basis index for centre ``j`` and field kind ``i`` in {1, 2}."""
        return 2 * j + (i - 1)

    @staticmethod
    def unindex(p):
        return p // 2, p % 2 + 1

    def pairs(self, nodes):
        """All ``(node, centre)`` pairs with ``x_j . x > h``, sorted by node."""
        tree = cKDTree(self.centres)
        hits = tree.query_ball_point(nodes, r=self.params.chord * (1 + 1e-12))
        counts = np.fromiter((len(hh) for hh in hits), dtype=int, count=len(hits))
        node_idx = np.repeat(np.arange(len(nodes)), counts)
        centre_idx = np.fromiter((c for hh in hits for c in sorted(hh)), dtype=int,
                                 count=int(counts.sum()))
        tau = np.einsum("ij,ij->i", nodes[node_idx], self.centres[centre_idx])
        keep = tau > self.params.h
        return node_idx[keep], centre_idx[keep]

    def to_json(self) -> dict:
        return {"h": self.params.h, "k": int(self.params.k), "centres": self.centres.tolist()}

    @classmethod
    def from_json(cls, doc) -> "BasisAtlas":
        return cls(np.asarray(doc["centres"], dtype=float), ZonalParams(float(doc["h"]), int(doc["k"])))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def hemisphere_atlas(level: int, params: ZonalParams = ZonalParams()) -> BasisAtlas:
    """Centres at icosphere vertices with ``x^3 >= 0``."""
    from .mesh import cap_vertices, icosphere

    return BasisAtlas(cap_vertices(icosphere(level), np.pi / 2), params)


def zonal_eval(params: ZonalParams, centre, x):
    tau = np.sum(np.asarray(centre) * np.asarray(x), axis=-1)
    return params.profile(tau)


def zonal_gradient(params: ZonalParams, centre, x):
    """``b'(x_j . x) (x_j - (x_j . x) x)``, tangent to the sphere."""
    centre = np.asarray(centre, dtype=float)
    x = np.asarray(x, dtype=float)
    tau = np.sum(centre * x, axis=-1)
    if params.k < 2 and np.any(np.isclose(tau, params.h, rtol=0, atol=1e-12)):
        warnings.warn("zonal derivative is discontinuous at the support edge", NonSmoothEdge)
    return params.profile(tau, 1)[..., None] * (centre - tau[..., None] * x)


def _cross_matrix(a):
    m = np.zeros(a.shape[:-1] + (3, 3))
    m[..., 0, 1], m[..., 0, 2] = -a[..., 2], a[..., 1]
    m[..., 1, 0], m[..., 1, 2] = a[..., 2], -a[..., 0]
    m[..., 2, 0], m[..., 2, 1] = -a[..., 1], a[..., 0]
    return m


def sphere_fields(params: ZonalParams, centres, x):
    """Both sphere basis fields and ambient Jacobians of their extensions.

    Returns ``fields`` (M,2,3) and ``jacs`` (M,2,3,3) for paired rows of
    ``centres`` and ``x``.
    """
    c = np.atleast_2d(np.asarray(centres, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tau = np.einsum("ij,ij->i", c, x)
    b1 = params.profile(tau, 1)
    b2 = params.profile(tau, 2)
    d = c - tau[:, None] * x
    y1 = b1[:, None] * d
    # d/dx [b'(c.x) (c - (c.x) x)]
    j1 = (b2[:, None, None] * d[:, :, None] * c[:, None, :]
          - b1[:, None, None] * (x[:, :, None] * c[:, None, :] + tau[:, None, None] * np.eye(3)))
    y2 = np.cross(y1, x)
    # d(y1 x x) = (J1 dx) x x + y1 x dx
    j2 = -_cross_matrix(x) @ j1 + _cross_matrix(y1)
    return np.stack([y1, y2], axis=1), np.stack([j1, j2], axis=1)


def basis_pair_on_sphere(atlas: BasisAtlas, j: int, x):
    if not 0 <= j < len(atlas.centres):
        raise InvalidIndex(f"centre index {j} out of range")
    x = np.atleast_2d(x)
    fields, _ = sphere_fields(atlas.params, np.broadcast_to(atlas.centres[j], x.shape), x)
    return fields[:, 0], fields[:, 1]


@dataclass
class SurfaceBasis:
    """Basis field ``i`` of centre ``j`` on ``M_t`` at a batch of points."""
    v: np.ndarray        # (M,2) components w.r.t. d_i y
    dv: np.ndarray       # (M,2,2) chart partials, dv[m, k, i] = d_k v^i
    vector: np.ndarray   # (M,3) ambient representative


def basis_on_surface(atlas: BasisAtlas, j: int, i: int, sample: geometry.SurfaceFrameSample):
    if i not in (1, 2):
        raise InvalidIndex("field kind must be 1 or 2")
    if not 0 <= j < len(atlas.centres):
        raise InvalidIndex(f"centre index {j} out of range")
    centres = np.broadcast_to(atlas.centres[j], sample.x.shape)
    fields, jacs = sphere_fields(atlas.params, centres, sample.x)
    v, dv = geometry.sphere_components(sample, fields[:, i - 1], jacs[:, i - 1])
    return SurfaceBasis(v, dv, geometry.ambient(sample, v))

"""Icosphere meshes by repeated midpoint refinement of a pole-aligned icosahedron."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelTooLarge, ValidationError

MAX_LEVEL = 9


@dataclass(frozen=True)
class TriSphereMesh:
    vertices: np.ndarray  # (V, 3), unit norm
    faces: np.ndarray     # (F, 3) int, counter-clockwise seen from outside
    level: int

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def icosahedron() -> TriSphereMesh:
    """Regular icosahedron with two vertices at +-e3."""
    z = 1.0 / np.sqrt(5.0)
    r = 2.0 / np.sqrt(5.0)
    verts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        a = 2.0 * np.pi * k / 5.0
        verts.append((r * np.cos(a), r * np.sin(a), z))
    for k in range(5):
        a = 2.0 * np.pi * k / 5.0 + np.pi / 5.0
        verts.append((r * np.cos(a), r * np.sin(a), -z))
    verts.append((0.0, 0.0, -1.0))
    faces = []
    for k in range(5):
        u0, u1 = 1 + k, 1 + (k + 1) % 5
        l0, l1 = 6 + k, 6 + (k + 1) % 5
        faces.append((0, u0, u1))
        faces.append((u0, l0, u1))
        faces.append((u1, l0, l1))
        faces.append((11, l1, l0))
    return TriSphereMesh(np.array(verts), _orient(np.array(verts), np.array(faces)), 0)


def _orient(verts, faces):
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    faces = faces.copy()
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def refine(mesh: TriSphereMesh) -> TriSphereMesh:
    """Split every face into four via projected edge midpoints."""
    verts, faces = mesh.vertices, mesh.faces
    nv = len(verts)
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    nf = len(faces)
    m01, m12, m20 = (nv + inv[k * nf:(k + 1) * nf] for k in range(3))
    v0, v1, v2 = faces[:, 0], faces[:, 1], faces[:, 2]
    new_faces = np.concatenate([
        np.stack([v0, m01, m20], axis=1),
        np.stack([m01, v1, m12], axis=1),
        np.stack([m20, m12, v2], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    return TriSphereMesh(np.vstack([verts, mid]), new_faces, mesh.level + 1)


def icosphere(level: int) -> TriSphereMesh:
    if level < 0:
        raise ValidationError("refinement level must be >= 0")
    if level > MAX_LEVEL:
        raise LevelTooLarge(f"level {level} exceeds the limit {MAX_LEVEL}")
    mesh = icosahedron()
    for _ in range(level):
        mesh = refine(mesh)
    return mesh


def cap_vertices(mesh: TriSphereMesh, theta_max: float = np.pi / 2) -> np.ndarray:
    """Vertices with ``arccos(x . e3) <= theta_max``."""
    z = np.clip(mesh.vertices[:, 2], -1.0, 1.0)
    return mesh.vertices[np.arccos(z) <= theta_max]


def face_centroids(mesh: TriSphereMesh) -> np.ndarray:
    c = mesh.vertices[mesh.faces].mean(axis=1)
    return c / np.linalg.norm(c, axis=1)[:, None]

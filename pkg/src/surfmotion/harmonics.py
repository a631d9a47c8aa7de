"""Real, fully normalised scalar spherical harmonics.

Degree ``n`` has ``2n + 1`` members indexed by ``j = 1, ..., 2n + 1``. The
order ``m = j - n - 1`` runs from ``-n`` to ``n``; negative orders carry the
``sin(|m| phi)`` factor, positive orders ``cos(m phi)``. The flattened index is
``p = n**2 + j - 1``.

Internally every harmonic is evaluated through the polynomial extension

    F(x, y, z) = c * Qbar_n^m(z) * Re/Im (x + i y)^m

which agrees with ``Y_{n,j}`` on the unit sphere. Because it is a plain
polynomial, its ambient gradient and Hessian are cheap, and those are all the
chart machinery in :mod:`surfmotion.geometry` needs. ``Qbar`` follows the
normalised three-term recurrence, stable well beyond degree 50.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidIndex, NegativeOrderOnConstant, ValidationError

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class ShIndex:
    n: int
    j: int

    def __post_init__(self):
        if self.n < 0 or not 1 <= self.j <= 2 * self.n + 1:
            raise InvalidIndex(f"invalid spherical harmonic index (n={self.n}, j={self.j})")

    @property
    def p(self) -> int:
        return self.n * self.n + self.j - 1

    @property
    def m(self) -> int:
        return self.j - self.n - 1

    @classmethod
    def from_flat(cls, p: int) -> "ShIndex":
        if p < 0:
            raise InvalidIndex(f"negative flat index {p}")
        n = int(np.floor(np.sqrt(p)))
        return cls(n, p - n * n + 1)


def num_coeffs(n_max: int) -> int:
    return (n_max + 1) ** 2


def degree_of(p):
    """Degree ``n`` of flat index/indices ``p``."""
    return np.floor(np.sqrt(np.asarray(p))).astype(int)


def eigenvalue(n):
    """Laplace-Beltrami eigenvalue ``n (n + 1)``."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise InvalidIndex("degree must be non-negative")
    return n * (n + 1)


def eigenvalues(n_max: int) -> np.ndarray:
    """Eigenvalue per flat index, length ``(n_max + 1)**2``."""
    return eigenvalue(degree_of(np.arange(num_coeffs(n_max)))).astype(float)


def _check_points(x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != 3:
        raise ValidationError("points must have shape (..., 3)")
    if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > 1e-10):
        raise ValidationError("points must lie on the unit sphere")
    return x, single


def _legendre_columns(n_max, z, order):
    """Yield ``(n, m, Q, dQ, d2Q)`` for all ``0 <= m <= n <= n_max``.

    ``Q`` is the normalised associated Legendre function divided by
    ``sin(theta)**m``; derivatives are with respect to ``z``.
    """
    zeros = np.zeros_like(z)
    qmm = np.full_like(z, 1.0 / np.sqrt(FOUR_PI))
    for m in range(n_max + 1):
        if m > 0:
            qmm = qmm * np.sqrt((2 * m + 1) / (2.0 * m))
        q2, d2, dd2 = qmm, zeros, zeros
        yield m, m, q2, d2, dd2
        if m == n_max:
            break
        a = np.sqrt(2 * m + 3.0)
        q1 = a * z * q2
        d1 = a * q2 if order >= 1 else zeros
        dd1 = zeros
        yield m + 1, m, q1, d1, dd1
        for n in range(m + 2, n_max + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt((2 * n + 1.0) * ((n - 1) ** 2 - m * m) / ((2 * n - 3.0) * (n * n - m * m)))
            q = a * z * q1 - b * q2
            if order >= 1:
                d = a * (q1 + z * d1) - b * d2
            else:
                d = zeros
            if order >= 2:
                dd = a * (2.0 * d1 + z * dd1) - b * dd2
            else:
                dd = zeros
            q2, d2, dd2 = q1, d1, dd1
            q1, d1, dd1 = q, d, dd
            yield n, m, q, d, dd


def _trig_tables(n_max, x, y):
    """Real and imaginary parts of ``(x + i y)**m`` for ``m = 0..n_max``."""
    c = np.empty((n_max + 1,) + x.shape)
    s = np.empty_like(c)
    c[0], s[0] = 1.0, 0.0
    for m in range(1, n_max + 1):
        c[m] = x * c[m - 1] - y * s[m - 1]
        s[m] = y * c[m - 1] + x * s[m - 1]
    return c, s


def _terms(n_max, pts, order):
    """Yield ``(p, F, gradF, hessF)`` of the polynomial extension per harmonic."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    c, s = _trig_tables(n_max, x, y)
    mpts = len(pts)
    sqrt2 = np.sqrt(2.0)
    for n, m, q, dq, ddq in _legendre_columns(n_max, z, order):
        variants = [(m, c)] if m == 0 else [(m, c), (-m, s)]
        for signed_m, table in variants:
            p = n * n + n + signed_m
            scale = 1.0 if m == 0 else sqrt2
            t = table[m]
            val = scale * q * t
            grad = hess = None
            if order >= 1:
                # d/dx, d/dy of Re/Im (x+iy)^m
                if m == 0:
                    tx = ty = np.zeros(mpts)
                elif signed_m > 0:
                    tx, ty = m * c[m - 1], -m * s[m - 1]
                else:
                    tx, ty = m * s[m - 1], m * c[m - 1]
                grad = scale * np.stack([q * tx, q * ty, dq * t], axis=-1)
            if order >= 2:
                if m < 2:
                    txx = txy = tyy = np.zeros(mpts)
                elif signed_m > 0:
                    k = m * (m - 1)
                    txx, txy, tyy = k * c[m - 2], -k * s[m - 2], -k * c[m - 2]
                else:
                    k = m * (m - 1)
                    txx, txy, tyy = k * s[m - 2], k * c[m - 2], -k * s[m - 2]
                hess = np.empty((mpts, 3, 3))
                hess[:, 0, 0] = q * txx
                hess[:, 0, 1] = hess[:, 1, 0] = q * txy
                hess[:, 1, 1] = q * tyy
                hess[:, 0, 2] = hess[:, 2, 0] = dq * tx
                hess[:, 1, 2] = hess[:, 2, 1] = dq * ty
                hess[:, 2, 2] = ddq * t
                hess *= scale
            yield p, val, grad, hess


def sh_values(n_max: int, x) -> np.ndarray:
    """Design matrix ``Y[i, p] = Y_p(x_i)`` of shape ``(M, (n_max+1)**2)``."""
    pts, single = _check_points(x)
    out = np.empty((len(pts), num_coeffs(n_max)))
    for p, val, _, _ in _terms(n_max, pts, 0):
        out[:, p] = val
    return out[0] if single else out


def sh_surface_gradients(n_max: int, x) -> np.ndarray:
    """Surface gradients of every harmonic, shape ``(M, P, 3)``."""
    pts, single = _check_points(x)
    out = np.empty((len(pts), num_coeffs(n_max), 3))
    for p, _, grad, _ in _terms(n_max, pts, 1):
        out[:, p] = grad - np.sum(grad * pts, axis=1)[:, None] * pts
    return out[0] if single else out


def eval_sh(idx: ShIndex, x):
    """Value of a single harmonic ``Y_{n,j}`` at ``x``."""
    return sh_values(idx.n, x)[..., idx.p]


def eval_sh_gradient(idx: ShIndex, x):
    """Surface gradient of ``Y_{n,j}`` at ``x`` (tangent to the sphere)."""
    return sh_surface_gradients(idx.n, x)[..., idx.p, :]


def sh_synthesis(coeffs, x, order: int = 2):
    """Evaluate ``sum_p c_p Y_p`` and ambient derivatives of its extension.

    Returns ``(value, grad, hess)`` with shapes ``(M,)``, ``(M, 3)`` and
    ``(M, 3, 3)``. ``grad``/``hess`` belong to the polynomial extension, so
    only their action on tangent vectors is meaningful; the surface gradient is
    ``grad`` with its radial part removed.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n_max = int(round(np.sqrt(coeffs.size))) - 1
    if num_coeffs(n_max) != coeffs.size:
        raise ValidationError(f"coefficient length {coeffs.size} is not a square")
    pts, _ = _check_points(x)
    mpts = len(pts)
    val = np.zeros(mpts)
    grad = np.zeros((mpts, 3)) if order >= 1 else None
    hess = np.zeros((mpts, 3, 3)) if order >= 2 else None
    for p, v, g, h in _terms(n_max, pts, order):
        cp = coeffs[p]
        if cp == 0.0:
            continue
        val += cp * v
        if order >= 1:
            grad += cp * g
        if order >= 2:
            hess += cp * h
    return val, grad, hess


def seminorm_sq(coeffs, r: float) -> float:
    """Sobolev seminorm ``sum lambda_n**r c_{n,j}**2`` with ``0**r := 0`` for ``r > 0``."""
    coeffs = np.asarray(coeffs, dtype=float)
    n_max = int(round(np.sqrt(coeffs.size))) - 1
    lam = eigenvalues(n_max)
    if r < 0 and coeffs[0] != 0.0:
        raise NegativeOrderOnConstant("lambda_0**r is undefined for r < 0")
    weights = sobolev_weights(lam, r)
    return float(np.sum(weights * coeffs**2))


def sobolev_weights(lam, r):
    lam = np.asarray(lam, dtype=float)
    w = np.zeros_like(lam)
    pos = lam > 0
    w[pos] = lam[pos] ** r
    if r == 0:
        w[~pos] = 1.0
    return w


@dataclass
class ShExpansion:
    n_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (num_coeffs(self.n_max),):
            raise ValidationError("coefficient array must have length (n_max + 1)**2")

    def __call__(self, x):
        return sh_values(self.n_max, x) @ self.coeffs


def dump_frames(path, n_max, frames, **meta):
    """Write ``{"n_max": ..., "frames": [[...], ...]}`` plus extra metadata."""
    frames = np.asarray(frames, dtype=float)
    doc = {"n_max": int(n_max), "frames": frames.tolist()}
    doc.update(meta)
    Path(path).write_text(json.dumps(doc, indent=1))


def load_frames(path):
    doc = json.loads(Path(path).read_text())
    frames = np.asarray(doc["frames"], dtype=float)
    n_max = int(doc["n_max"])
    if frames.ndim != 2 or frames.shape[1] != num_coeffs(n_max):
        raise ValidationError("frames do not match n_max")
    return n_max, frames, doc

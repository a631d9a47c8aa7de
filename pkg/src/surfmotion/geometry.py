"""Differential geometry of sphere-like surfaces ``y = rho(t, x) x``.

Points of the unit sphere are addressed through a longitude/colatitude chart
``xi = (phi, theta)``, optionally rotated. All routines are vectorised over a
leading batch axis of length ``M``.

Index conventions for stored arrays:

* ``Dy[m, :, i]``            = d_i y
* ``d2y[m, i, j, :]``        = d_i d_j y
* ``christoffel[m, k, i, j]`` = Gamma^k_{ij}
* covariant coefficients ``D[m, i, j]`` = D_i v^j
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, NotTangent, PoleProximity, ValidationError
from .harmonics import num_coeffs, sh_synthesis

POLE_MARGIN = 1e-3
DET_MIN = 1e-14


def tangent_projector(normal):
    n = np.asarray(normal, dtype=float)
    return np.eye(3) - n[..., :, None] * n[..., None, :]


def sphere_projector(x):
    return tangent_projector(x)


# --------------------------------------------------------------------------- charts

@dataclass(frozen=True)
class Chart:
    """Longitude/colatitude chart of the unit sphere, rotated by ``rotation``.

    ``x(xi) = R @ (sin(theta) cos(phi), sin(theta) sin(phi), cos(theta))``.
    """
    rotation: np.ndarray = None
    margin: float = POLE_MARGIN

    def __post_init__(self):
        r = np.eye(3) if self.rotation is None else np.asarray(self.rotation, dtype=float)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-12):
            raise ValidationError("chart rotation must be orthogonal")
        object.__setattr__(self, "rotation", r)

    def coords(self, x) -> np.ndarray:
        """Chart coordinates ``(phi, theta)`` of sphere points."""
        x = np.atleast_2d(np.asarray(x, dtype=float)) @ self.rotation
        phi = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2.0 * np.pi)
        theta = np.arccos(np.clip(x[:, 2], -1.0, 1.0))
        return np.stack([phi, theta], axis=1)

    def check(self, xi):
        theta = np.asarray(xi)[..., 1]
        if np.any((theta < self.margin) | (theta > np.pi - self.margin)):
            raise PoleProximity("chart coordinates inside the pole margin")

    def embed(self, xi):
        """Return ``x``, ``Dx`` (M,3,2) and ``d2x`` (M,2,2,3) at chart coordinates."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        self.check(xi)
        phi, th = xi[:, 0], xi[:, 1]
        cp, sp, ct, st = np.cos(phi), np.sin(phi), np.cos(th), np.sin(th)
        zero = np.zeros_like(phi)
        x = np.stack([st * cp, st * sp, ct], axis=-1)
        dphi = np.stack([-st * sp, st * cp, zero], axis=-1)
        dth = np.stack([ct * cp, ct * sp, -st], axis=-1)
        dpp = np.stack([-st * cp, -st * sp, zero], axis=-1)
        dpt = np.stack([-ct * sp, ct * cp, zero], axis=-1)
        dtt = -x
        R = self.rotation
        x = x @ R.T
        Dx = np.stack([dphi @ R.T, dth @ R.T], axis=-1)
        d2x = np.empty((len(phi), 2, 2, 3))
        d2x[:, 0, 0] = dpp @ R.T
        d2x[:, 0, 1] = d2x[:, 1, 0] = dpt @ R.T
        d2x[:, 1, 1] = dtt @ R.T
        return x, Dx, d2x


STANDARD_CHART = Chart()


# ------------------------------------------------------------------ radius functions

@dataclass
class RadiusSample:
    """Radius data at sphere points: value, extension gradient/Hessian, time rate.

    ``grad``/``hess`` are ambient derivatives of *some* smooth extension of
    ``rho(t, .)`` off the sphere; only their tangential action matters.
    """
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    rate: np.ndarray

    def surface_grad(self, x):
        g = self.grad
        return g - np.sum(g * x, axis=-1)[..., None] * x


class RadiusEvaluator:
    """Interface: ``evaluate(x, t) -> RadiusSample`` for points ``x`` on the sphere."""

    def evaluate(self, x, t=0.0) -> RadiusSample:
        raise NotImplementedError

    def __call__(self, x, t=0.0):
        return self.evaluate(x, t).value


class ConstantRadius(RadiusEvaluator):
    """Round sphere of radius ``r0 + rate * t``."""

    def __init__(self, r0=1.0, rate=0.0):
        self.r0 = float(r0)
        self.rate = float(rate)

    def evaluate(self, x, t=0.0):
        x = np.atleast_2d(x)
        m = len(x)
        return RadiusSample(np.full(m, self.r0 + self.rate * t), np.zeros((m, 3)),
                            np.zeros((m, 3, 3)), np.full(m, self.rate))


class SHRadius(RadiusEvaluator):
    """Radius given by spherical-harmonic coefficients, frozen in time.

    ``rate_coeffs`` gives the temporal derivative in the same basis.
    """

    def __init__(self, coeffs, rate_coeffs=None):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.n_max = int(round(np.sqrt(self.coeffs.size))) - 1
        if num_coeffs(self.n_max) != self.coeffs.size:
            raise ValidationError("coefficient length must be (n_max + 1)**2")
        self.rate_coeffs = None if rate_coeffs is None else np.asarray(rate_coeffs, dtype=float)

    def evaluate(self, x, t=0.0):
        x = np.atleast_2d(x)
        val, grad, hess = sh_synthesis(self.coeffs, x, 2)
        if self.rate_coeffs is None:
            rate = np.zeros(len(x))
        else:
            rate = sh_synthesis(self.rate_coeffs, x, 0)[0]
        return RadiusSample(val, grad, hess, rate)


class LinearInTimeRadius(RadiusEvaluator):
    """``rho(t, x) = base(x) + t * slope(x)`` for two SH expansions."""

    def __init__(self, base, slope):
        self.base = np.asarray(base, dtype=float)
        self.slope = np.asarray(slope, dtype=float)

    def evaluate(self, x, t=0.0):
        x = np.atleast_2d(x)
        v0, g0, h0 = sh_synthesis(self.base, x, 2)
        v1, g1, h1 = sh_synthesis(self.slope, x, 2)
        return RadiusSample(v0 + t * v1, g0 + t * g1, h0 + t * h1, v1)


class CallableRadius(RadiusEvaluator):
    """Radius from a plain function ``f(x, t)``; derivatives by central differences.

    Uses the radially constant extension with step 1e-5, so expect roughly
    1e-5 relative accuracy in second derivatives.
    """

    def __init__(self, func, step=1e-5):
        self.func = func
        self.step = step

    def _ext(self, y, t):
        return self.func(y / np.linalg.norm(y, axis=-1)[..., None], t)

    def evaluate(self, x, t=0.0):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = self.step
        eye = np.eye(3)
        f0 = self._ext(x, t)
        grad = np.empty((len(x), 3))
        hess = np.empty((len(x), 3, 3))
        for a in range(3):
            fp, fm = self._ext(x + h * eye[a], t), self._ext(x - h * eye[a], t)
            grad[:, a] = (fp - fm) / (2 * h)
            hess[:, a, a] = (fp - 2 * f0 + fm) / h**2
            for b in range(a):
                fpp = self._ext(x + h * (eye[a] + eye[b]), t)
                fpm = self._ext(x + h * (eye[a] - eye[b]), t)
                fmp = self._ext(x - h * (eye[a] - eye[b]), t)
                fmm = self._ext(x - h * (eye[a] + eye[b]), t)
                hess[:, a, b] = hess[:, b, a] = (fpp - fpm - fmp + fmm) / (4 * h * h)
        rate = (self.func(x, t + h) - self.func(x, t - h)) / (2 * h)
        return RadiusSample(f0, grad, hess, rate)


# ---------------------------------------------------------------------- frame sample

@dataclass
class SurfaceFrameSample:
    """Geometry of ``M_t`` at a batch of chart points (see module docstring)."""
    xi: np.ndarray
    x: np.ndarray
    Dx: np.ndarray
    d2x: np.ndarray
    rho: np.ndarray
    grad_rho: np.ndarray       # surface gradient on S^2
    y: np.ndarray
    Dy: np.ndarray
    d2y: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    J: np.ndarray
    christoffel: np.ndarray
    N: np.ndarray
    P: np.ndarray
    K: np.ndarray
    Vhat: np.ndarray
    V: np.ndarray
    vtan: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def sphere_metric(self):
        return np.einsum("mai,maj->mij", self.Dx, self.Dx)

    def take(self, idx) -> "SurfaceFrameSample":
        return SurfaceFrameSample(**{k: getattr(self, k)[idx] for k in self.__dataclass_fields__})


def eval_frame(chart: Chart, rho: RadiusEvaluator, t, xi) -> SurfaceFrameSample:
    """Evaluate all geometric quantities of ``M_t`` at chart coordinates ``xi``."""
    x, Dx, d2x = chart.embed(xi)
    rs = rho.evaluate(x, t)
    r = rs.value
    if np.any(r <= 0):
        raise DegenerateMetric("radius function must be positive")
    # chart partials of rho(x(xi)) via any smooth extension
    drho = np.einsum("ma,mai->mi", rs.grad, Dx)
    d2rho = (np.einsum("mai,mab,mbj->mij", Dx, rs.hess, Dx)
             + np.einsum("ma,mija->mij", rs.grad, d2x))
    y = r[:, None] * x
    Dy = x[:, :, None] * drho[:, None, :] + r[:, None, None] * Dx
    d2y = (d2rho[:, :, :, None] * x[:, None, None, :]
           + drho[:, :, None, None] * np.swapaxes(Dx, 1, 2)[:, None, :, :]
           + drho[:, None, :, None] * np.swapaxes(Dx, 1, 2)[:, :, None, :]
           + r[:, None, None, None] * d2x)
    g = np.einsum("mai,maj->mij", Dy, Dy)
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    if np.any(det < DET_MIN):
        raise DegenerateMetric(f"det g below {DET_MIN}")
    ginv = np.empty_like(g)
    ginv[:, 0, 0] = g[:, 1, 1] / det
    ginv[:, 1, 1] = g[:, 0, 0] / det
    ginv[:, 0, 1] = ginv[:, 1, 0] = -g[:, 0, 1] / det
    J = np.sqrt(det)
    n = np.cross(Dy[:, :, 0], Dy[:, :, 1])
    n /= np.linalg.norm(n, axis=1)[:, None]
    n *= np.sign(np.sum(n * x, axis=1))[:, None]
    # Gamma^k_ij = (d_ij y . d_l y) g^{lk}
    christ = np.einsum("mija,mal,mlk->mkij", d2y, Dy, ginv)
    second = np.einsum("mija,ma->mij", d2y, n)
    K = np.einsum("mij,mji->m", second, ginv)
    Vhat = rs.rate[:, None] * x
    V = np.sum(Vhat * n, axis=1)
    vtan = Vhat - V[:, None] * n
    return SurfaceFrameSample(
        xi=np.atleast_2d(np.asarray(xi, dtype=float)), x=x, Dx=Dx, d2x=d2x, rho=r,
        grad_rho=rs.surface_grad(x), y=y, Dy=Dy, d2y=d2y, g=g, ginv=ginv, J=J,
        christoffel=christ, N=n, P=tangent_projector(n), K=K, Vhat=Vhat, V=V, vtan=vtan)


def eval_frame_at(rho: RadiusEvaluator, t, x, chart: Chart = STANDARD_CHART):
    """:func:`eval_frame` addressed by sphere points instead of chart coordinates."""
    return eval_frame(chart, rho, t, chart.coords(x))


# --------------------------------------------------------------- tangent fields

def sphere_components(sample: SurfaceFrameSample, field, jac):
    """Chart components of a sphere tangent field and their chart partials.

    ``field`` (M,3) is tangent to S^2 and ``jac`` (M,3,3) is the ambient
    Jacobian of any smooth extension. Returns ``v`` (M,2) with
    ``field = v^i d_i x`` and ``dv`` (M,2,2) with ``dv[m, k, i] = d_k v^i``.
    Since the pushforward acts on the tangent basis only, the same components
    describe the pushed-forward field on ``M_t`` w.r.t. ``d_i y``.
    """
    Dx, d2x = sample.Dx, sample.d2x
    gs = np.einsum("mai,maj->mij", Dx, Dx)
    gsinv = np.linalg.inv(gs)
    proj = np.einsum("mij,maj->mia", gsinv, Dx)          # g~^{-1} Dx^T
    v = np.einsum("mia,ma->mi", proj, field)
    # d_k g~_ij = d_ki x . d_j x + d_i x . d_kj x
    dgs = np.einsum("mkia,maj->mkij", d2x, Dx)
    dgs = dgs + np.swapaxes(dgs, 2, 3)
    dgsinv = -np.einsum("mij,mkjl,mln->mkin", gsinv, dgs, gsinv)
    dproj = (np.einsum("mkij,maj->mkia", dgsinv, Dx)
             + np.einsum("mij,mkja->mkia", gsinv, d2x))
    dfield = np.einsum("mab,mbk->mka", jac, Dx)            # d_k field
    dv = np.einsum("mkia,ma->mki", dproj, field) + np.einsum("mia,mka->mki", proj, dfield)
    return v, dv


def ambient(sample: SurfaceFrameSample, v):
    """Ambient vector ``v^i d_i y`` on ``M_t``."""
    return np.einsum("mai,mi->ma", sample.Dy, v)


def covariant_coefficients(sample: SurfaceFrameSample, v, dv):
    """``D_i v^j = d_i v^j + v^k Gamma^j_{ik}``; returns (M,2,2) indexed [i, j]."""
    return dv + np.einsum("mk,mjik->mij", v, sample.christoffel)


def hs_norm_sq(sample: SurfaceFrameSample, D):
    """Squared Hilbert-Schmidt norm ``g_kl g^ij D_i v^k D_j v^l``."""
    return np.einsum("mkl,mij,mik,mjl->m", sample.g, sample.ginv, D, D)


def hs_factor(sample: SurfaceFrameSample, D):
    """``L^{-1} D L`` with ``g = L L^T``; its Frobenius product equals the HS inner product."""
    L = np.linalg.cholesky(sample.g)
    Linv = np.linalg.inv(L)
    return Linv @ D @ L


def surface_divergence(sample: SurfaceFrameSample, D):
    return D[:, 0, 0] + D[:, 1, 1]


def pushforward(rho: RadiusEvaluator, t, x, v, tol=1e-8):
    """Apply ``D phi = rho Id + x grad(rho)^T`` to sphere tangent vectors ``v``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if np.any(np.abs(np.sum(x * v, axis=1)) > tol):
        raise NotTangent("input vector is not tangent to the sphere")
    rs = rho.evaluate(x, t)
    gr = rs.surface_grad(x)
    return rs.value[:, None] * v + x * np.sum(gr * v, axis=1)[:, None]


def surface_gradient_from_sphere(sample: SurfaceFrameSample, grad_sphere):
    """Surface gradient on ``M_t`` of ``f^ = f~ o phi^{-1}`` given ``grad_{S^2} f~``.

    Uses ``d_i f = grad f~ . d_i x`` and ``grad_M f^ = Dy g^{-1} (d_i f)``.
    """
    df = np.einsum("ma,mai->mi", grad_sphere, sample.Dx)
    return np.einsum("mai,mij,mj->ma", sample.Dy, sample.ginv, df)


def chart_partials(sample: SurfaceFrameSample, grad_M):
    """Chart partials ``d_i f = grad_M f . d_i y``."""
    return np.einsum("ma,mai->mi", grad_M, sample.Dy)


_POLAR_SWAP = Chart(np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]))


def eval_frame_auto(rho: RadiusEvaluator, t, x, switch: float = 0.5):
    """Evaluate at arbitrary sphere points, switching to a chart with poles on
    the x-axis where ``|x^3| > cos(switch)``. Only chart-independent outputs
    (vectors, HS products, divergence, curvature) are comparable across rows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    polar = np.abs(x[:, 2]) > np.cos(switch)
    if not polar.any():
        return eval_frame_at(rho, t, x)
    if polar.all():
        return eval_frame_at(rho, t, x, _POLAR_SWAP)
    a = eval_frame_at(rho, t, x[~polar])
    b = eval_frame_at(rho, t, x[polar], _POLAR_SWAP)
    out = {}
    for k in SurfaceFrameSample.__dataclass_fields__:
        va, vb = getattr(a, k), getattr(b, k)
        arr = np.empty((len(x),) + va.shape[1:])
        arr[~polar], arr[polar] = va, vb
        out[k] = arr
    return SurfaceFrameSample(**out)

"""Galerkin estimation of tangential motion on an evolving surface.

Two data models are supported. ``brightness`` penalises the linearised
constancy residual ``d_t f + grad f . w`` and ``mass`` penalises the
continuity residual ``d_t f - f K V - grad f . v + div(f u)``. Both are
regularised by ``alpha0 * int s |grad w|_HS^2 + alpha1 * int (1 - s) |w|^2``;
the mass model adds ``alpha2 * int (1 - s) (div u)^2``.

Every matrix is ``F^T diag(weight) F`` for a sparse "feature" matrix ``F``
whose rows are cubature nodes and columns basis fields. Only (node, centre)
pairs within the support of the centre's zonal function contribute.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import geometry
from .basisfield import BasisAtlas, sphere_fields
from .errors import IndefiniteSystem, NodeMismatch, ValidationError, ZeroGradient
from .quadrature import CubatureRule, area_element

log = logging.getLogger(__name__)

LAWS = ("brightness", "mass")
S_MODES = ("clamp", "one")
PAIR_CHUNK = 200_000


@dataclass
class RegularizationConfig:
    alpha0: float = 0.1
    alpha1: float = 1e-3
    alpha2: float = 1e-3
    s_mode: str = "clamp"
    eta: float = 1e-4

    def validate(self):
        if min(self.alpha0, self.alpha1, self.alpha2) <= 0:
            raise ValidationError("regularisation weights must be positive")
        if not 0 < self.eta < 0.5:
            raise ValidationError("eta must lie in (0, 1/2)")
        if self.s_mode not in S_MODES:
            raise ValidationError(f"s_mode must be one of {S_MODES}")


def clamp_s(f, eta=1e-4):
    """Clamp surface data into ``[eta, 1 - eta]``."""
    if not 0 < eta < 0.5:
        raise ValidationError("eta must lie in (0, 1/2)")
    return np.minimum(np.maximum(f, eta), 1.0 - eta)


def s_weights(values, reg: RegularizationConfig):
    if reg.s_mode == "one":
        return np.ones_like(np.asarray(values, dtype=float))
    return clamp_s(np.asarray(values, dtype=float), reg.eta)


@dataclass
class FrameInputs:
    """Data of one frame pair at the cubature nodes."""
    values: np.ndarray   # f at frame t
    grads: np.ndarray    # surface gradient of f at frame t, (M, 3)
    dt: np.ndarray       # f(t + 1) - f(t) at the same sphere directions

    @classmethod
    def from_surface_data(cls, data, t):
        from .dataio import temporal_difference

        return cls(data.values[t], data.grads[t], temporal_difference(data, t))


@dataclass
class GalerkinSystem:
    A: sparse.csr_matrix
    C: sparse.csr_matrix
    D: sparse.csr_matrix
    E: sparse.csr_matrix
    b: np.ndarray
    law: str
    reg: RegularizationConfig
    atlas: BasisAtlas
    assembly_seconds: float = 0.0

    @property
    def matrix(self):
        r = self.reg
        M = self.A + r.alpha0 * self.C + r.alpha1 * self.D
        if self.law == "mass":
            M = M + r.alpha2 * self.E
        return _symmetrize(M.tocsc())


@dataclass
class VelocityField:
    coeffs: np.ndarray
    atlas: BasisAtlas
    frame: int
    law: str
    residual: float = 0.0
    timings: dict = field(default_factory=dict)

    def to_json(self):
        return {"law": self.law, "frame": int(self.frame), "coeffs": self.coeffs.tolist(),
                "residual": self.residual, "atlas": self.atlas.to_json()}

    @classmethod
    def from_json(cls, doc):
        if doc.get("law") not in LAWS:
            raise ValidationError("velocity file has no valid law tag")
        atlas = BasisAtlas.from_json(doc["atlas"])
        coeffs = np.asarray(doc["coeffs"], dtype=float)
        if coeffs.shape != (len(atlas),):
            raise ValidationError("coefficient count does not match the atlas")
        return cls(coeffs, atlas, int(doc["frame"]), doc["law"], float(doc.get("residual", 0.0)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def _symmetrize(M):
    # fl(a + b) == fl(b + a), so this is exactly symmetric
    return ((M + M.T) * 0.5).tocsc()


def _node_features(atlas: BasisAtlas, sample, node_idx, centre_idx):
    """Per-pair ambient vectors (K,2,3), HS factors (K,2,4) and divergences (K,2)."""
    sub = sample.take(node_idx)
    fields, jacs = sphere_fields(atlas.params, atlas.centres[centre_idx], sub.x)
    vec = np.empty((len(node_idx), 2, 3))
    hs = np.empty((len(node_idx), 2, 4))
    div = np.empty((len(node_idx), 2))
    for i in range(2):
        v, dv = geometry.sphere_components(sub, fields[:, i], jacs[:, i])
        D = geometry.covariant_coefficients(sub, v, dv)
        vec[:, i] = geometry.ambient(sub, v)
        hs[:, i] = geometry.hs_factor(sub, D).reshape(-1, 4)
        div[:, i] = geometry.surface_divergence(sub, D)
    return vec, hs, div


def _feature_matrix(rows, cols, vals, shape):
    return sparse.csr_matrix((vals, (rows, cols)), shape=shape)


def _check_inputs(rule, inputs, law):
    if law not in LAWS:
        raise ValidationError(f"law must be one of {LAWS}")
    m = len(rule.nodes)
    if not (len(inputs.values) == len(inputs.dt) == len(inputs.grads) == m):
        raise NodeMismatch("surface data does not match the cubature nodes")


def assemble(inputs: FrameInputs, rho, t, atlas: BasisAtlas, rule: CubatureRule,
             reg: RegularizationConfig, law: str = "brightness", literal_rhs: bool = False,
             nodes=None) -> GalerkinSystem:
    """Assemble the Galerkin system of one frame pair.

    ``rho`` is the radius evaluator of frame ``t`` (its ``rate`` is the
    surface speed used by the mass model). ``nodes`` may be passed to assert
    that the data were sampled at the rule's nodes. With ``literal_rhs`` the
    mass right side omits the ``f div y_p`` part of the test function, which
    makes it inconsistent with the matrix; it exists only for comparison.
    """
    reg.validate()
    _check_inputs(rule, inputs, law)
    if nodes is not None and (np.shape(nodes) != rule.nodes.shape
                              or not np.allclose(nodes, rule.nodes, rtol=0, atol=1e-12)):
        raise NodeMismatch("surface data nodes differ from the cubature nodes")
    t0 = time.perf_counter()
    M, P = len(rule.nodes), len(atlas)
    sample = geometry.eval_frame_auto(rho, t, rule.nodes)
    w = rule.weights * area_element(sample.rho, sample.grad_rho)
    s = s_weights(inputs.values, reg)
    f, gf, dtf = (np.asarray(a, dtype=float) for a in (inputs.values, inputs.grads, inputs.dt))
    r_mass = dtf - f * sample.K * sample.V - np.sum(gf * sample.vtan, axis=1)
    weights = {"data": w, "C": w * s, "D": w * (1.0 - s)}

    A = C = D = E = sparse.csr_matrix((P, P))
    b = np.zeros(P)
    node_idx, centre_idx = atlas.pairs(rule.nodes)
    # chunk boundaries on node changes keep each node's rows in one chunk
    bounds = np.searchsorted(node_idx, np.arange(0, M, max(1, M * PAIR_CHUNK // max(len(node_idx), 1))))
    bounds = np.unique(np.append(bounds, len(node_idx)))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        ni, ci = node_idx[lo:hi], centre_idx[lo:hi]
        if len(ni) == 0:
            continue
        vec, hs, div = _node_features(atlas, sample, ni, ci)
        rows = np.repeat(ni, 2)
        cols = (2 * ci[:, None] + np.arange(2)[None, :]).ravel()
        feat = lambda vals: _feature_matrix(rows, cols, vals.ravel(), (M, P))
        G = feat(np.einsum("ka,kia->ki", gf[ni], vec))
        Dv = feat(div)
        Y = [feat(vec[:, :, a]) for a in range(3)]
        H = [feat(hs[:, :, c]) for c in range(4)]
        data_op = G + sparse.diags(f) @ Dv if law == "mass" else G
        Wd = sparse.diags(weights["data"])
        A = A + data_op.T @ Wd @ data_op
        if law == "brightness":
            b -= G.T @ (weights["data"] * dtf)
        else:
            test = G if literal_rhs else data_op
            b -= test.T @ (weights["data"] * r_mass)
        Wc = sparse.diags(weights["C"])
        for Hc in H:
            C = C + Hc.T @ Wc @ Hc
        Wl = sparse.diags(weights["D"])
        for Ya in Y:
            D = D + Ya.T @ Wl @ Ya
        E = E + Dv.T @ Wl @ Dv
    elapsed = time.perf_counter() - t0
    log.info("assembled %s system: %d fields, %d node/centre pairs, %.2f s",
             law, P, len(node_idx), elapsed)
    return GalerkinSystem(_symmetrize(A), _symmetrize(C), _symmetrize(D), _symmetrize(E), b,
                          law, reg, atlas, elapsed)


def assemble_brightness(inputs, rho, t, atlas, rule, reg, **kw):
    return assemble(inputs, rho, t, atlas, rule, reg, "brightness", **kw)


def assemble_mass(inputs, rho, t, atlas, rule, reg, **kw):
    return assemble(inputs, rho, t, atlas, rule, reg, "mass", **kw)


def solve_spd(M, b, tol=1e-10):
    """Sparse LU without pivoting off the diagonal; a non-positive pivot means ``M`` is not PD."""
    M = sparse.csc_matrix(M)
    b = np.asarray(b, dtype=float)
    try:
        lu = splinalg.splu(M, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise IndefiniteSystem(f"factorization failed: {exc}") from exc
    if np.any(lu.U.diagonal() <= 0) or not np.array_equal(lu.perm_r, lu.perm_c):
        raise IndefiniteSystem("system matrix is not positive definite")
    x = lu.solve(b)
    res = float(np.linalg.norm(M @ x - b) / max(np.linalg.norm(b), np.finfo(float).eps))
    if not res < tol:
        raise IndefiniteSystem(f"relative residual {res:.2e} exceeds {tol:.0e}")
    return x, res


def solve(system: GalerkinSystem, frame: int = 0) -> VelocityField:
    t0 = time.perf_counter()
    coeffs, res = solve_spd(system.matrix, system.b)
    elapsed = time.perf_counter() - t0
    log.info("solved %d unknowns in %.2f s, relative residual %.2e", len(coeffs), elapsed, res)
    return VelocityField(coeffs, system.atlas, frame, system.law, res,
                         {"assembly_s": system.assembly_seconds, "solve_s": elapsed})


def reconstruct(vf: VelocityField, rho, t, x):
    """Ambient vectors of ``sum_p c_p y_p`` at sphere points ``x`` (tangent to ``M_t``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros((len(x), 3))
    ni, ci = vf.atlas.pairs(x)
    if len(ni) == 0:
        return out
    fields, _ = sphere_fields(vf.atlas.params, vf.atlas.centres[ci], x[ni])
    sphere_vec = np.einsum("ki,kia->ka", vf.coeffs[2 * ci[:, None] + np.arange(2)], fields)
    tang = np.zeros((len(x), 3))
    np.add.at(tang, ni, sphere_vec)
    rs = rho.evaluate(x, t)
    gr = rs.surface_grad(x)
    return rs.value[:, None] * tang + x * np.sum(gr * tang, axis=1)[:, None]


def total_velocity(vf: VelocityField, sample: geometry.SurfaceFrameSample, tangential):
    """``V_hat + w`` for brightness fields, ``V N + u`` for mass fields."""
    if vf.law == "brightness":
        return sample.Vhat + tangential
    return sample.V[:, None] * sample.N + tangential


def linear_independence_diagnostic(grads, rho, t, x, weights=None, chart=geometry.STANDARD_CHART):
    """``|<d1 f, d2 f>| / (|d1 f| |d2 f|)`` over a region, with chart partials ``d_i f``.

    Values close to one mean the two partials are nearly parallel over the
    whole region, so motion along the level sets cannot be resolved.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if len(x) == 0:
        raise ValidationError("diagnostic region is empty")
    q = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float)
    sample = geometry.eval_frame_at(rho, t, x, chart)
    d = geometry.chart_partials(sample, np.asarray(grads, dtype=float))
    n1 = np.sqrt(np.sum(q * d[:, 0] ** 2))
    n2 = np.sqrt(np.sum(q * d[:, 1] ** 2))
    if n1 < 1e-14 or n2 < 1e-14:
        raise ZeroGradient("a chart partial of the data vanishes on the region")
    return float(abs(np.sum(q * d[:, 0] * d[:, 1])) / (n1 * n2))


def estimate(inputs: FrameInputs, rho, t, atlas, rule, reg, law="brightness", frame=0, **kw):
    """Assemble and solve one frame pair."""
    system = assemble(inputs, rho, t, atlas, rule, reg, law, **kw)
    return solve(system, frame)


def config_dict(reg: RegularizationConfig):
    return asdict(reg)

"""Spatio-temporal fitting of the radius function from scattered points.

Each frame's radius is a spherical-harmonic expansion. Coefficients of all
frames solve a block-tridiagonal system coupling the per-frame data Gram
matrix, a Sobolev seminorm penalty and a backward-difference temporal penalty
with zero Neumann conditions at both ends.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import (FrameOutOfRange, NonPositiveRadius, SingularSystem, ValidationError)
from .geometry import SHRadius
from .harmonics import eigenvalues, num_coeffs, sh_values, sobolev_weights

MACHINE_EPS = float(np.finfo(float).eps)


@dataclass
class FitConfig:
    n_max: int = 10
    r: float = 3.0 + MACHINE_EPS
    beta0: float = 1e-4
    beta1: float = 100.0

    def validate(self):
        if self.n_max < 0:
            raise ValidationError("n_max must be >= 0")
        if self.beta0 < 0 or self.beta1 < 0:
            raise ValidationError("regularisation weights must be non-negative")


@dataclass
class FrameSamples:
    """Scattered points per frame, already centred at the origin."""
    frames: list

    def __post_init__(self):
        self.frames = [np.asarray(f, dtype=float).reshape(-1, 3) for f in self.frames]
        for f in self.frames:
            if np.any(np.linalg.norm(f, axis=1) == 0):
                raise ValidationError("sample points must be non-zero")

    def __len__(self):
        return len(self.frames)

    @property
    def total(self):
        return sum(len(f) for f in self.frames)

    @classmethod
    def from_rows(cls, frame_idx, points, n_frames=None):
        frame_idx = np.asarray(frame_idx, dtype=int)
        points = np.asarray(points, dtype=float)
        if n_frames is None:
            n_frames = int(frame_idx.max()) + 1 if len(frame_idx) else 0
        return cls([points[frame_idx == t] for t in range(n_frames)])


@dataclass
class RadiusExpansionSeries:
    n_max: int
    coeffs: np.ndarray            # (T+1, P)
    config: FitConfig = field(default_factory=FitConfig)
    centre: np.ndarray = field(default_factory=lambda: np.zeros(3))
    residual: float = 0.0

    @property
    def n_frames(self):
        return len(self.coeffs)

    def to_json(self):
        return {
            "n_max": int(self.n_max),
            "frames": np.asarray(self.coeffs).tolist(),
            "T": int(self.n_frames - 1),
            "r": float(self.config.r),
            "beta0": float(self.config.beta0),
            "beta1": float(self.config.beta1),
            "centre": np.asarray(self.centre, dtype=float).tolist(),
        }

    @classmethod
    def from_json(cls, doc):
        n_max = int(doc["n_max"])
        coeffs = np.asarray(doc["frames"], dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[1] != num_coeffs(n_max):
            raise ValidationError("frame coefficients do not match n_max")
        cfg = FitConfig(n_max, float(doc.get("r", 3.0)), float(doc.get("beta0", 0.0)),
                        float(doc.get("beta1", 0.0)))
        return cls(n_max, coeffs, cfg, np.asarray(doc.get("centre", [0, 0, 0]), dtype=float))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def data_gram(points, n_max):
    """Per-frame data Gram ``sum_i Y_p(x_i) Y_q(x_i)`` and right side ``sum_i |x_i| Y_p(x_i)``."""
    P = num_coeffs(n_max)
    if len(points) == 0:
        return np.zeros((P, P)), np.zeros(P)
    r = np.linalg.norm(points, axis=1)
    Y = sh_values(n_max, points / r[:, None])
    return Y.T @ Y, Y.T @ r


def system_blocks(samples: FrameSamples, cfg: FitConfig):
    """Diagonal blocks, off-diagonal coupling weight and right sides of the system."""
    penalty = cfg.beta0 * sobolev_weights(eigenvalues(cfg.n_max), cfg.r)
    nf = len(samples)
    diag, rhs = [], []
    for t, pts in enumerate(samples.frames):
        B, b = data_gram(pts, cfg.n_max)
        neighbours = (t > 0) + (t < nf - 1)
        diag.append(B + np.diag(penalty + neighbours * cfg.beta1))
        rhs.append(b)
    return diag, cfg.beta1, rhs


def assemble_dense(samples: FrameSamples, cfg: FitConfig):
    """Full system matrix and right side (for checks; the solver never forms it)."""
    diag, off, rhs = system_blocks(samples, cfg)
    P = num_coeffs(cfg.n_max)
    nf = len(diag)
    A = np.zeros((nf * P, nf * P))
    for t in range(nf):
        A[t * P:(t + 1) * P, t * P:(t + 1) * P] = diag[t]
        if t + 1 < nf:
            idx = np.arange(P)
            A[t * P + idx, (t + 1) * P + idx] = -off
            A[(t + 1) * P + idx, t * P + idx] = -off
    return A, np.concatenate(rhs)


def _block_thomas(diag, off, rhs):
    """Symmetric block-tridiagonal solve with constant coupling ``-off * I``."""
    nf = len(diag)
    P = len(rhs[0])
    facs, g = [], []
    for t in range(nf):
        S = diag[t].copy()
        r = rhs[t].copy()
        if t > 0:
            S -= off**2 * linalg.cho_solve(facs[-1], np.eye(P))
            r += off * linalg.cho_solve(facs[-1], g[-1])
        try:
            facs.append(linalg.cho_factor(S))
        except linalg.LinAlgError as exc:
            raise SingularSystem("surface fitting system is singular") from exc
        g.append(r)
    x = [None] * nf
    x[-1] = linalg.cho_solve(facs[-1], g[-1])
    for t in range(nf - 2, -1, -1):
        x[t] = linalg.cho_solve(facs[t], g[t] + off * x[t + 1])
    return np.array(x)


def assemble_and_solve(samples: FrameSamples, cfg: FitConfig, check_positive=None,
                       tol: float = 1e-12) -> RadiusExpansionSeries:
    """Minimise the spatio-temporal fitting functional.

    ``check_positive`` may be an array of sphere points at which the fitted
    radius must be positive in every frame.
    """
    cfg.validate()
    if len(samples) == 0 or samples.total == 0:
        raise ValidationError("at least one sample point is required")
    diag, off, rhs = system_blocks(samples, cfg)
    if cfg.beta0 == 0 and cfg.beta1 == 0:
        for B in diag:
            if np.linalg.matrix_rank(B) < len(B):
                raise SingularSystem("data Gram is rank deficient and no regularisation is set")
    coeffs = _block_thomas(diag, off, rhs)
    residual = _relative_residual(diag, off, rhs, coeffs)
    if not residual < tol:
        raise SingularSystem(f"solver residual {residual:.3e} exceeds {tol:.0e}")
    series = RadiusExpansionSeries(cfg.n_max, coeffs, cfg, residual=residual)
    if check_positive is not None:
        Y = sh_values(cfg.n_max, check_positive)
        if np.any(Y @ coeffs.T <= 0):
            raise NonPositiveRadius("fitted radius is not positive at all check points")
    return series


def _relative_residual(diag, off, rhs, x):
    res = []
    for t in range(len(diag)):
        r = diag[t] @ x[t] - rhs[t]
        if t > 0:
            r -= off * x[t - 1]
        if t + 1 < len(diag):
            r -= off * x[t + 1]
        res.append(r)
    bnorm = np.linalg.norm(np.concatenate(rhs))
    return float(np.linalg.norm(np.concatenate(res)) / max(bnorm, MACHINE_EPS))


def make_radius_evaluator(series: RadiusExpansionSeries, t: int) -> SHRadius:
    """Radius at frame ``t``; its time rate is the forward difference (backward at the last frame)."""
    if int(t) != t or not 0 <= t < series.n_frames:
        raise FrameOutOfRange(f"frame {t} outside 0..{series.n_frames - 1}")
    t = int(t)
    c = series.coeffs
    if series.n_frames == 1:
        rate = np.zeros_like(c[0])
    elif t < series.n_frames - 1:
        rate = c[t + 1] - c[t]
    else:
        rate = c[t] - c[t - 1]
    return SHRadius(c[t], rate)


def read_points_csv(path):
    """Read ``frame,x,y,z`` rows (header optional) into :class:`FrameSamples`."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec[:4]])
            except ValueError:
                if rows:
                    raise ValidationError(f"malformed row {rec!r}") from None
                continue  # header
    if not rows:
        return FrameSamples([])
    arr = np.asarray(rows)
    if arr.shape[1] != 4:
        raise ValidationError("expected columns frame,x,y,z")
    return FrameSamples.from_rows(arr[:, 0].astype(int), arr[:, 1:])


def read_points_json(path):
    """Read ``{"frames": [[[x, y, z], ...], ...]}``."""
    doc = json.loads(Path(path).read_text())
    return FrameSamples([np.asarray(f, dtype=float).reshape(-1, 3) for f in doc["frames"]])


def write_points_csv(path, samples: FrameSamples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "x", "y", "z"])
        for t, pts in enumerate(samples.frames):
            for p in pts:
                w.writerow([t, repr(float(p[0])), repr(float(p[1])), repr(float(p[2]))])

"""Acceptance criteria 1-13, one test each; each records a pass/fail line."""
import dataclasses
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from surfmotion import basisfield as B
from surfmotion import dataio as D
from surfmotion import geometry as G
from surfmotion import harmonics as H
from surfmotion import mesh as Msh
from surfmotion import motion as Mo
from surfmotion import quadrature as Q
from surfmotion import surfacefit as F
from surfmotion import synth as S
from surfmotion import viz as V

SQ4PI = np.sqrt(4 * np.pi)
DATA = Path(__file__).parent / "data"


def sh_radius(terms, n_max=3):
    c = np.zeros(H.num_coeffs(n_max))
    c[0] = SQ4PI
    for (n, j), a in terms.items():
        c[H.ShIndex(n, j).p] = a
    return c


def random_dirs(n, seed):
    x = np.random.default_rng(seed).normal(size=(n, 3))
    return x / np.linalg.norm(x, axis=1)[:, None]


def test_c01_chart_invariance(criterion):
    t0 = time.perf_counter()
    rho = G.SHRadius(sh_radius({(2, 1): 0.1}))
    rot = G.Chart(Rotation.random(random_state=11).as_matrix())
    x = random_dirs(400, 1)
    # keep points away from the poles of both charts
    x = x[(np.abs(x[:, 2]) < 0.95) & (np.abs(x @ rot.rotation.T)[:, 2] < 0.95)][:200]
    assert len(x) == 200
    atlas = B.BasisAtlas(random_dirs(3, 2), B.ZonalParams(0.05, 3))
    err_hs = err_div = 0.0
    for j in range(len(atlas.centres)):
        for i in (1, 2):
            out = []
            for chart in (G.STANDARD_CHART, rot):
                s = G.eval_frame_at(rho, 0.0, x, chart)
                sb = B.basis_on_surface(atlas, j, i, s)
                Dc = G.covariant_coefficients(s, sb.v, sb.dv)
                out.append((G.hs_norm_sq(s, Dc), G.surface_divergence(s, Dc)))
            err_hs = max(err_hs, np.abs(out[0][0] - out[1][0]).max())
            err_div = max(err_div, np.abs(out[0][1] - out[1][1]).max())
    elapsed = time.perf_counter() - t0
    ok = err_hs < 1e-8 and err_div < 1e-8 and elapsed < 5
    criterion("HS norm and divergence agree across charts",
              ok, f"hs {err_hs:.1e}, div {err_div:.1e}, {elapsed:.2f} s")
    assert ok


INTEGRANDS = [
    lambda y: np.ones(len(y)),
    lambda y: y[:, 0] ** 2,
    lambda y: np.exp(y[:, 2]),
    lambda y: np.cos(y[:, 0] + 2 * y[:, 1]),
    lambda y: 1 + y[:, 0] * y[:, 1] * y[:, 2],
]


def test_c02_surface_integral_identity(criterion):
    rng = np.random.default_rng(2)
    u, wu = np.polynomial.legendre.leggauss(80)
    th = 0.5 * np.pi * (u + 1)
    ph = (np.arange(160) + 0.5) * 2 * np.pi / 160
    T, P = np.meshgrid(th, ph, indexing="ij")
    xi = np.stack([P.ravel(), T.ravel()], 1)
    wq = np.repeat(0.5 * np.pi * wu, 160) * 2 * np.pi / 160
    chart = G.Chart(margin=1e-5)
    rule = Q.sphere_rule(120)
    worst = 0.0
    for _ in range(5):
        c = np.zeros(16)
        c[0] = SQ4PI
        c[1:] = 0.05 * rng.normal(size=15)
        rho = G.SHRadius(c)
        s = G.eval_frame(chart, rho, 0.0, xi)
        y_nodes = rho(rule.nodes)[:, None] * rule.nodes
        for f in INTEGRANDS:
            pull = Q.surface_integral(rule, rho, 0.0, f(y_nodes))
            coord = np.sum(f(s.y) * s.J * wq)
            worst = max(worst, abs(pull - coord) / abs(coord))
    ok = worst < 1e-8
    criterion("pullback integral equals coordinate integral", ok, f"max rel err {worst:.1e}")
    assert ok


def test_c03_curvature_of_spheres(criterion):
    rule = Q.cap_rule(100)
    nodes = np.vstack([rule.nodes, Q.sphere_rule(40).nodes])
    worst = 0.0
    for r in (0.5, 1.0, 2.0):
        K = G.eval_frame_auto(G.ConstantRadius(r), 0.0, nodes).K
        worst = max(worst, np.abs(K + 2 / r).max())
    ok = worst < 1e-6
    criterion("mean curvature -2/r on spheres", ok, f"max err {worst:.1e}")
    assert ok


def chart_laplacian(values, x, h=1e-3):
    """Fourth-order finite differences of the Laplace-Beltrami operator in longitude/colatitude."""
    phi = np.arctan2(x[:, 1], x[:, 0])
    th = np.arccos(x[:, 2])
    emb = lambda p, t: np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], 1)
    w = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)
    d1 = np.array([1, -8, 0, 8, -1]) / (12 * h)
    off = np.arange(-2, 3) * h
    f_t = [values(emb(phi, th + o)) for o in off]
    f_p = [values(emb(phi + o, th)) for o in off]
    ftt = sum(a * f for a, f in zip(w, f_t))
    ft = sum(a * f for a, f in zip(d1, f_t))
    fpp = sum(a * f for a, f in zip(w, f_p))
    cot, inv2 = (np.cos(th) / np.sin(th))[:, None], (1 / np.sin(th) ** 2)[:, None]
    return ftt + cot * ft + inv2 * fpp


def test_c04_harmonics(criterion):
    n_max = 10
    rule = Q.sphere_rule(2 * n_max)
    Y = H.sh_values(n_max, rule.nodes)
    gram_err = np.abs(Y.T @ (rule.weights[:, None] * Y) - np.eye(Y.shape[1])).max()
    x = random_dirs(60, 4)
    x = x[np.abs(x[:, 2]) < 0.9]
    lap = chart_laplacian(lambda pts: H.sh_values(n_max, pts), x)
    lam = H.eigenvalues(n_max)
    eig_err = np.abs(lap + lam[None, :] * H.sh_values(n_max, x)).max()
    ok = gram_err < 1e-10 and eig_err < 1e-5
    criterion("SH Gram identity and Laplace eigen-relation", ok, f"gram {gram_err:.1e}, eigen {eig_err:.1e}")
    assert ok


def test_c05_mesh_counts(criterion):
    counts = [len(Msh.icosphere(level).vertices) for level in range(8)]
    ok = counts == [2 + 10 * 4**level for level in range(8)]
    criterion("icosphere vertex counts for levels 0-7", ok, f"{counts}")
    assert ok


def test_c06_surface_fit_recovery(criterion):
    c = sh_radius({(2, 1): 0.1, (3, 2): 0.05})
    dirs = S.fibonacci_sphere(500)
    r = H.sh_values(3, dirs) @ c
    fit = F.assemble_and_solve(F.FrameSamples([r[:, None] * dirs]), F.FitConfig(3, beta0=1e-8, beta1=0))
    coeff_err = np.abs(fit.coeffs[0] - c).max()
    rng = np.random.default_rng(6)
    frames = [(r * (1 + 0.01 * rng.normal(size=len(r))))[:, None] * dirs for _ in range(10)]
    samples = F.FrameSamples(frames)
    rms = lambda out: np.sqrt(np.mean((out.coeffs - c) ** 2, axis=1))
    free = rms(F.assemble_and_solve(samples, F.FitConfig(3, beta0=1e-8, beta1=0.0)))
    coupled = rms(F.assemble_and_solve(samples, F.FitConfig(3, beta0=1e-8, beta1=100.0)))
    ok = coeff_err < 1e-4 and bool(np.all(coupled < free))
    criterion("radius fit recovery and temporal denoising", ok,
              f"coeff err {coeff_err:.1e}, rms {free.mean():.2e} -> {coupled.mean():.2e}")
    assert ok


BLOB = [{"centre": [1, 0, 1], "sigma": 0.15}]


@pytest.fixture(scope="module")
def rotation_problem():
    spec = S.PhantomSpec(blobs=BLOB, omega=0.02)
    rule = Q.cap_rule(100)
    data = S.generate_surface_phantom(spec, rule.nodes)
    atlas = B.hemisphere_atlas(4, B.ZonalParams(0.99, 3))
    rho = spec.radius_evaluator(0)
    reg = Mo.RegularizationConfig(alpha0=0.1, alpha1=1e-3, s_mode="clamp")
    t0 = time.perf_counter()
    system = Mo.assemble(Mo.FrameInputs.from_surface_data(data, 0), rho, 0.0, atlas, rule, reg)
    vf = Mo.solve(system)
    elapsed = time.perf_counter() - t0
    return dict(spec=spec, rule=rule, data=data, atlas=atlas, rho=rho, system=system, vf=vf, elapsed=elapsed)


def l2_norm(rule, rho, u):
    return np.sqrt(Q.surface_integral(rule, rho, 0.0, np.sum(u * u, 1)))


def test_c07_brightness_rotation(criterion, rotation_problem):
    p = rotation_problem
    nodes = p["rule"].nodes
    w = Mo.reconstruct(p["vf"], p["rho"], 0.0, nodes)
    truth = np.cross([0, 0, 1.0], nodes)
    mask = p["data"].values[0] > 0.2
    cos = np.sum(w * truth, 1)[mask] / (np.linalg.norm(w[mask], axis=1) * np.linalg.norm(truth[mask], axis=1))
    ok = cos.mean() > 0.95 and p["elapsed"] < 120
    criterion("rotating blob recovered by the brightness model", ok,
              f"alignment {cos.mean():.4f} over {mask.sum()} nodes, {p['elapsed']:.1f} s")
    assert ok


def test_c08_mass_conservation_phantom(criterion, rotation_problem):
    p = rotation_problem
    rule, atlas = p["rule"], p["atlas"]
    spec = S.PhantomSpec(radius={"kind": "linear", "r0": 1.0, "c": 0.01}, blobs=BLOB, law="mass")
    data = S.generate_surface_phantom(spec, rule.nodes)
    rho = spec.radius_evaluator(0)
    inputs = Mo.FrameInputs.from_surface_data(data, 0)
    vf = Mo.estimate(inputs, rho, 0.0, atlas, rule, Mo.RegularizationConfig(alpha0=0.1), law="mass")
    u = Mo.reconstruct(vf, rho, 0.0, rule.nodes)
    w = Mo.reconstruct(p["vf"], p["rho"], 0.0, rule.nodes)
    ratio = l2_norm(rule, rho, u) / l2_norm(rule, p["rho"], w)
    s = G.eval_frame_auto(rho, 0.0, rule.nodes)
    resid = np.abs(inputs.dt - inputs.values * s.K * s.V - np.sum(inputs.grads * s.vtan, 1)).max()
    ok = ratio < 0.05 and resid < 1e-3
    criterion("growing sphere explained without tangential motion", ok,
              f"norm ratio {ratio:.4f}, residual at u=0 {resid:.1e}")
    assert ok


def random_phantom(rng):
    kind = rng.choice(["constant", "linear", "sh"])
    blobs = [{"centre": rng.normal(size=3) * [1, 1, 0.4] + [0, 0, 1], "sigma": rng.uniform(0.1, 0.3),
              "amplitude": rng.uniform(0.3, 1.0)} for _ in range(rng.integers(1, 5))]
    if kind == "sh":
        c = np.zeros(9)
        c[0] = SQ4PI * rng.uniform(0.5, 2)
        c[1:] = 0.05 * rng.normal(size=8)
        return S.PhantomSpec(radius={"kind": "sh", "coeffs": c.tolist()}, blobs=blobs, law="brightness")
    radius = {"kind": kind, "r0": rng.uniform(0.5, 2), "c": rng.uniform(-0.02, 0.02)}
    return S.PhantomSpec(radius=radius, blobs=blobs, omega=rng.uniform(-0.05, 0.05),
                         axis=rng.normal(size=3), law=str(rng.choice(["brightness", "mass"])))


def test_c09_system_properties(criterion):
    rng = np.random.default_rng(9)
    rule = Q.cap_rule(40)
    atlas = B.hemisphere_atlas(2, B.ZonalParams(0.8, 3))
    worst_sym = worst_res = 0.0
    for _ in range(20):
        spec = random_phantom(rng)
        data = S.generate_surface_phantom(spec, rule.nodes)
        reg = Mo.RegularizationConfig(alpha0=10 ** rng.uniform(-2, 0), alpha1=10 ** rng.uniform(-4, -2))
        system = Mo.assemble(Mo.FrameInputs.from_surface_data(data, 0), spec.radius_evaluator(0), 0.0,
                             atlas, rule, reg, spec.law)
        M = system.matrix
        worst_sym = max(worst_sym, abs(M - M.T).max())
        worst_res = max(worst_res, Mo.solve(system).residual)   # raises IndefiniteSystem unless PD
    ok = worst_sym < 1e-12 and worst_res < 1e-10
    criterion("symmetric positive definite systems solved accurately", ok,
              f"asymmetry {worst_sym:.1e}, residual {worst_res:.1e}")
    assert ok


def test_c10_s_one_reduction(criterion, rotation_problem):
    p = rotation_problem
    spec = S.PhantomSpec(radius={"kind": "linear", "r0": 1.0, "c": 0.01}, blobs=BLOB, law="mass")
    rule = Q.cap_rule(40)
    data = S.generate_surface_phantom(spec, rule.nodes)
    reg = Mo.RegularizationConfig(s_mode="one")
    system = Mo.assemble(Mo.FrameInputs.from_surface_data(data, 0), spec.radius_evaluator(0), 0.0,
                         p["atlas"], rule, reg, "mass")
    dmax, emax = abs(system.D).max(), abs(system.E).max()
    ok = dmax == 0 and emax == 0 and abs(system.C).max() > 0
    criterion("constant-one s removes the (1 - s) terms", ok, f"max|D| {dmax}, max|E| {emax}")
    assert ok


def test_c11_regularisation_monotone(criterion, rotation_problem):
    system = rotation_problem["system"]
    norms = []
    for a0 in (1e-2, 1e-1, 1.0):
        sys_a = dataclasses.replace(system, reg=dataclasses.replace(system.reg, alpha0=a0))
        norms.append(float(np.linalg.norm(Mo.solve(sys_a).coeffs)))
    ok = norms[1] <= norms[0] and norms[2] <= norms[1]
    criterion("solution norm non-increasing in alpha0", ok, ", ".join(f"{n:.4g}" for n in norms))
    assert ok


def test_c12_pipeline_round_trip(criterion):
    t0 = time.perf_counter()
    R = 50.0
    d = S.fibonacci_sphere(200)
    th = np.arccos(d[:, 2])
    # cells on the northern band move visibly; southern cells support the centre fit
    d = d[((th > 0.3) & (th < 1.3)) | (d[:, 2] < -0.2)]
    spec = S.PhantomSpec(radius={"kind": "constant", "r0": R},
                         blobs=[{"centre": c, "sigma": 0.05, "amplitude": 0.9} for c in d],
                         omega=0.02, frames=2, noise=0.02, seed=1)
    spacing = 1.5
    seq = S.generate_volume_phantom(spec, (int(135 / spacing),) * 3, spacing, centre=np.array([67.0, 66.0, 68.0]))
    pts = [D.detect_cell_centres(seq, t, 2.0, 0.3) for t in range(2)]
    centre, shifted = D.centre_points(pts)
    series = F.assemble_and_solve(F.FrameSamples(shifted), F.FitConfig())
    series.centre = centre
    rule = Q.cap_rule(100)
    data = D.project_sequence(seq, lambda t: F.make_radius_evaluator(series, t), rule.nodes, 0.1, centre)
    rho = F.make_radius_evaluator(series, 0)
    vf = Mo.estimate(Mo.FrameInputs.from_surface_data(data, 0), rho, 0.0, B.hemisphere_atlas(4), rule,
                     Mo.RegularizationConfig(alpha0=0.1))
    w = Mo.reconstruct(vf, rho, 0.0, rule.nodes)
    truth = np.cross([0, 0, 1.0], rule.nodes)
    mask = data.values[0] > 0.2
    cos = np.sum(w * truth, 1)[mask] / (np.linalg.norm(w[mask], axis=1) * np.linalg.norm(truth[mask], axis=1))
    elapsed = time.perf_counter() - t0
    ok = cos.mean() > 0.9 and elapsed < 600
    criterion("volume to velocity pipeline recovers the rotation", ok,
              f"{len(d)} cells, detected {[len(p) for p in pts]}, alignment {cos.mean():.4f}, {elapsed:.1f} s")
    assert ok


def test_c13_viz_exactness(criterion):
    v = np.array([0.7, -0.3])
    x0 = np.array([[0.25, 1.5]])
    lines = V.streamlines(lambda p: np.tile(v, (len(p), 1)), x0, 0.1)
    end_err = np.abs(lines[0, -1] - (x0[0] + 50 * 0.1 * v)).max()
    X = np.random.default_rng(13).normal(size=(1000, 3))
    len_err = np.abs(np.linalg.norm(V.project_rescale(X), axis=1) - np.linalg.norm(X, axis=1)).max()
    red = np.zeros((2, 2, 3), np.uint8)
    red[..., 0] = 255
    ramp = np.array([[[0, 0, 0], [128, 64, 32], [255, 255, 255]]], np.uint8)
    golden = (V.ppm_bytes(red) == (DATA / "red_2x2.ppm").read_bytes()
              and V.ppm_bytes(ramp) == (DATA / "ramp_3x1.ppm").read_bytes())
    ok = end_err < 1e-12 and len_err < 1e-12 and golden
    criterion("streamline closed form, length-preserving projection, golden PPM", ok,
              f"endpoint {end_err:.1e}, length {len_err:.1e}, golden {golden}")
    assert ok

"""Command line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Every command
writes ``<output>.manifest.json`` with the resolved configuration, input
hashes and timings.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, basisfield, dataio, geometry, motion, quadrature, surfacefit, synth, viz
from .errors import NumericalError, SurfMotionError, ValidationError, ZeroGradient
from .mesh import face_centroids, icosphere

log = logging.getLogger("surfmotion")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


@dataclasses.dataclass
class RunConfig:
    n_max: int = 10
    r: float = 3.0 + float(np.finfo(float).eps)
    beta0: float = 1e-4
    beta1: float = 100.0
    atlas_level: int = 5
    h: float = 0.99
    k: int = 3
    degree: int = 400
    eps: float = 0.1
    eta: float = 1e-4
    alpha0: float = 0.1
    alpha1: float = 1e-3
    alpha2: float = 1e-3
    s_mode: str = "clamp"
    sigma: float = 5.0
    theta: float = 0.3
    frames: str = None
    mesh_level: int = 5
    threads: int = None

    def validate(self):
        surfacefit.FitConfig(self.n_max, self.r, self.beta0, self.beta1).validate()
        motion.RegularizationConfig(self.alpha0, self.alpha1, self.alpha2, self.s_mode, self.eta).validate()
        basisfield.ZonalParams(self.h, self.k)
        if self.degree < 1:
            raise ValidationError("cubature degree must be >= 1")
        if self.eps <= 0:
            raise ValidationError("band half-width eps must be positive")
        if self.sigma <= 0 or not 0 < self.theta < 1:
            raise ValidationError("detection needs sigma > 0 and theta in (0, 1)")
        if self.atlas_level < 0 or self.mesh_level < 0:
            raise ValidationError("mesh levels must be non-negative")
        if self.frames is not None:
            parse_frames(self.frames)

    def fit_config(self):
        return surfacefit.FitConfig(self.n_max, self.r, self.beta0, self.beta1)

    def reg(self):
        return motion.RegularizationConfig(self.alpha0, self.alpha1, self.alpha2, self.s_mode, self.eta)


def parse_frames(text):
    """``"t0..t1"`` (inclusive) or a single ``"t"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            t0, t1 = int(a), int(b)
        else:
            t0 = t1 = int(text)
    except ValueError:
        raise ValidationError(f"invalid frame range {text!r}; expected t0..t1") from None
    if t0 < 0 or t1 < t0:
        raise ValidationError(f"invalid frame range {text!r}")
    return t0, t1


def resolve_config(args) -> RunConfig:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        unknown = set(cfg) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            cfg[f.name] = val
    rc = RunConfig(**cfg)
    if rc.threads is None:
        rc.threads = os.cpu_count() or 1
    rc.validate()
    return rc


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_hashes(paths):
    out = {}
    for p in paths:
        p = Path(p)
        out[str(p)] = sha256(p)
        if p.suffix == ".json":
            try:
                payload = json.loads(p.read_text()).get("payload")
            except (json.JSONDecodeError, AttributeError, UnicodeDecodeError):
                payload = None
            if payload and (p.parent / payload).exists():
                out[str(p.parent / payload)] = sha256(p.parent / payload)
    return out


def write_manifest(out_path, command, cfg, inputs, outputs, timings=None, extra=None):
    doc = {"command": command, "version": __version__, "python": platform.python_version(),
           "config": dataclasses.asdict(cfg), "inputs": _input_hashes(inputs),
           "outputs": [str(o) for o in outputs], "timings_s": timings or {}}
    if extra:
        doc.update(extra)
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return path


def _is_volume(path):
    p = Path(path)
    if p.suffix != ".json":
        return False
    try:
        return "dims" in json.loads(p.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError):
        return False


def _frame_pair(cfg, n_frames):
    t0, t1 = parse_frames(cfg.frames) if cfg.frames else (0, 1)
    if t1 != t0 + 1:
        raise ValidationError("motion estimation needs a consecutive frame pair t..t+1")
    if t1 >= n_frames:
        raise ValidationError(f"frame pair {t0}..{t1} outside the {n_frames} available frames")
    return t0


# ---------------------------------------------------------------- commands

def cmd_synth(args, cfg):
    doc = json.loads(Path(args.spec).read_text())
    outputs_cfg = doc.pop("outputs", {})
    spec = synth.PhantomSpec.from_json(doc)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rule = quadrature.cap_rule(int(outputs_cfg.get("degree", cfg.degree)))
    data = synth.generate_surface_phantom(spec, rule.nodes)
    written.append(data.save(out / "surface.json"))
    if spec.radius["kind"] != "sh":
        n_max = int(outputs_cfg.get("n_max", cfg.n_max))
        coeffs = np.zeros((spec.frames, (n_max + 1) ** 2))
        coeffs[:, 0] = [spec.radius_at(t) * np.sqrt(4 * np.pi) for t in range(spec.frames)]
    else:
        c = np.asarray(spec.radius["coeffs"], dtype=float)
        n_max = int(round(np.sqrt(c.size))) - 1
        coeffs = np.tile(c, (spec.frames, 1))
    series = surfacefit.RadiusExpansionSeries(n_max, coeffs, cfg.fit_config())
    series.save(out / "radius.json")
    written.append(out / "radius.json")
    if "volume" in outputs_cfg:
        v = outputs_cfg["volume"]
        seq = synth.generate_volume_phantom(spec, v["dims"], v["spacing"], v.get("origin"), v.get("centre"))
        written.append(dataio.save_sequence(out / "volume.json", seq, v.get("dtype", "f32")))
    if "points" in outputs_cfg:
        dirs = synth.fibonacci_sphere(int(outputs_cfg["points"]))
        frames = [spec.radius_evaluator(t)(dirs)[:, None] * dirs for t in range(spec.frames)]
        surfacefit.write_points_csv(out / "points.csv", surfacefit.FrameSamples(frames))
        written.append(out / "points.csv")
    synth.save_spec(out / "spec.json", spec)
    written.append(out / "spec.json")
    print(f"wrote {len(written)} files to {out}")
    return out / "surface.json", [args.spec], written, {}


def cmd_fit_surface(args, cfg):
    t_start = time.perf_counter()
    centre = np.zeros(3)
    extra = {}
    if _is_volume(args.points):
        seq = dataio.load_sequence(args.points)
        frames = range(seq.n_frames)
        if cfg.frames:
            t0, t1 = parse_frames(cfg.frames)
            if t1 >= seq.n_frames:
                raise ValidationError("frame range exceeds the volume")
            frames = range(t0, t1 + 1)
        pts = [dataio.detect_cell_centres(seq, t, cfg.sigma, cfg.theta) for t in frames]
        centre, pts = dataio.centre_points(pts)
        samples = surfacefit.FrameSamples(pts)
        extra["detections_per_frame"] = [len(p) for p in pts]
    else:
        path = Path(args.points)
        samples = (surfacefit.read_points_json(path) if path.suffix == ".json"
                   else surfacefit.read_points_csv(path))
        if cfg.frames:
            t0, t1 = parse_frames(cfg.frames)
            samples = surfacefit.FrameSamples(samples.frames[t0:t1 + 1])
    if samples.total == 0:
        raise ValidationError("at least one sample point is required")
    check = quadrature.sphere_rule(max(2 * cfg.n_max, 2)).nodes
    series = surfacefit.assemble_and_solve(samples, cfg.fit_config(), check_positive=check)
    series.centre = centre
    series.save(args.out)
    elapsed = time.perf_counter() - t_start
    print(f"fitted {series.n_frames} frames, n_max={cfg.n_max}, residual {series.residual:.2e}, "
          f"mean radius {series.coeffs[:, 0].mean() / np.sqrt(4 * np.pi):.6g}")
    return args.out, [args.points], [args.out], {"total": elapsed}, extra


def _surface_inputs(args, cfg, series, rule):
    """Surface data at the rule's nodes, from a surface-data cache or a volume."""
    if _is_volume(args.input):
        seq = dataio.load_sequence(args.input)
        if seq.n_frames != series.n_frames:
            raise ValidationError(f"volume has {seq.n_frames} frames but the radius series {series.n_frames}")
        t = _frame_pair(cfg, seq.n_frames)
        data = dataio.project_sequence(seq, lambda s: surfacefit.make_radius_evaluator(series, s),
                                       rule.nodes, cfg.eps, series.centre, frames=[t, t + 1])
        if data.zero_fraction > 0.5:
            log.warning("%.0f%% of in-band samples are zero; consider a different eps",
                        100 * data.zero_fraction)
        print(f"zero in-band fraction {data.zero_fraction:.3f}")
        return data, t, 0
    data = dataio.SurfaceData.load(args.input)
    if data.n_frames != series.n_frames:
        raise ValidationError(f"surface data has {data.n_frames} frames but the radius series {series.n_frames}")
    t = _frame_pair(cfg, data.n_frames)
    if data.nodes.shape != rule.nodes.shape or not np.allclose(data.nodes, rule.nodes, atol=1e-12, rtol=0):
        raise ValidationError("surface data nodes do not match the cubature of the requested degree")
    return data, t, t


def _estimate(args, cfg, law):
    series = surfacefit.RadiusExpansionSeries.load(args.radius)
    rule = quadrature.cap_rule(cfg.degree)
    data, t, local = _surface_inputs(args, cfg, series, rule)
    rho = surfacefit.make_radius_evaluator(series, t)
    atlas = basisfield.hemisphere_atlas(cfg.atlas_level, basisfield.ZonalParams(cfg.h, cfg.k))
    inputs = motion.FrameInputs.from_surface_data(data, local)
    system = motion.assemble(inputs, rho, 0.0, atlas, rule, cfg.reg(), law, nodes=data.nodes)
    vf = motion.solve(system, frame=t)
    vf.save(args.out)
    print(f"assembly {vf.timings['assembly_s']:.2f} s, solve {vf.timings['solve_s']:.2f} s, "
          f"relative residual {vf.residual:.2e}, |coeffs| {np.linalg.norm(vf.coeffs):.6g}")
    extra = {"residual": vf.residual, "coeff_norm": float(np.linalg.norm(vf.coeffs))}
    if data.truth is not None:
        est = motion.reconstruct(vf, rho, 0.0, rule.nodes)
        mask = data.values[local] > 0.2
        truth = data.truth[local]
        ok = mask & (np.linalg.norm(est, axis=1) > 0) & (np.linalg.norm(truth, axis=1) > 0)
        if ok.any():
            cos = np.sum(est * truth, 1)[ok] / (np.linalg.norm(est[ok], axis=1) * np.linalg.norm(truth[ok], axis=1))
            extra["alignment"] = float(cos.mean())
            print(f"alignment with ground truth over f > 0.2: {cos.mean():.4f}")
    written = [args.out]
    csv_path = Path(str(args.out)).with_suffix(".csv")
    mesh = icosphere(cfg.mesh_level)
    cents = face_centroids(mesh)
    cents = cents[cents[:, 2] >= 0]
    vec = motion.reconstruct(vf, rho, 0.0, cents)
    pos = rho(cents)[:, None] * cents
    np.savetxt(csv_path, np.hstack([pos, vec]), delimiter=",", header="x,y,z,vx,vy,vz",
               comments="", fmt="%.17g")
    written.append(csv_path)
    return args.out, [args.input, args.radius], written, vf.timings, extra


def cmd_estimate_of(args, cfg):
    return _estimate(args, cfg, "brightness")


def cmd_estimate_cm(args, cfg):
    return _estimate(args, cfg, "mass")


def cmd_render(args, cfg):
    vf = motion.VelocityField.load(args.velocity)
    series = surfacefit.RadiusExpansionSeries.load(args.radius)
    rho = surfacefit.make_radius_evaluator(series, vf.frame)
    level = cfg.mesh_level if args.level is None else args.level
    mesh = icosphere(level)
    widen = 1.01 if args.widen else 1.0
    if args.mode == "color":
        rgb = viz.color_faces(mesh, lambda x: motion.reconstruct(vf, rho, 0.0, x))
        img = viz.raster_top_view(mesh, rgb, args.size, widen * rho(mesh.vertices))
        viz.write_ppm(args.out, img)
    elif args.mode == "streamline":
        r0 = float(np.max(rho(mesh.vertices)))
        n = 64
        g = np.linspace(-r0, r0, n)
        px, py = np.meshgrid(g, g, indexing="ij")
        inside = px**2 + py**2 < r0**2 * (1 - 1e-9)
        planar = np.zeros((n, n, 2))
        if inside.any():
            d = np.stack([px[inside], py[inside], np.sqrt(r0**2 - px[inside]**2 - py[inside]**2)], 1) / r0
            planar[inside] = viz.project_rescale(motion.reconstruct(vf, rho, 0.0, d))
        sampler = viz.grid_sampler(g, g, planar)
        vmax = float(np.abs(planar).max())
        kappa = args.kappa or (0.02 * r0 / vmax if vmax > 0 else 1.0)
        s = np.linspace(-0.8 * r0, 0.8 * r0, args.seeds)
        sx, sy = np.meshgrid(s, s)
        seeds = np.stack([sx.ravel(), sy.ravel()], 1)
        seeds = seeds[np.linalg.norm(seeds, axis=1) < 0.8 * r0]
        lines = viz.streamlines(sampler, seeds, kappa, 50)
        viz.write_svg(args.out, lines, extent=r0)
    else:
        vec = motion.reconstruct(vf, rho, 0.0, mesh.vertices)
        rgb = viz.color_faces(mesh, lambda x: motion.reconstruct(vf, rho, 0.0, x))
        viz.write_vtk(args.out, mesh, radius=widen * rho(mesh.vertices), point_vectors=vec, face_rgb=rgb)
    print(f"wrote {args.mode} rendering to {args.out}")
    return args.out, [args.velocity, args.radius], [args.out], {}, {}


def cmd_diagnose(args, cfg):
    data = dataio.SurfaceData.load(args.input)
    series = surfacefit.RadiusExpansionSeries.load(args.radius)
    t0 = parse_frames(cfg.frames)[0] if cfg.frames else 0
    if t0 >= min(data.n_frames, series.n_frames):
        raise ValidationError("frame outside the data")
    rho = surfacefit.make_radius_evaluator(series, t0)
    region = data.values[t0] > args.region_threshold
    x = data.nodes[region]
    report = {"frame": t0, "zero_band_fraction": data.zero_fraction, "region_nodes": int(region.sum())}
    if len(x):
        sample = geometry.eval_frame_auto(rho, 0.0, x)
        report["max_metric_condition"] = float(np.max(np.linalg.cond(sample.g)))
    status = EXIT_OK
    try:
        if not len(x):
            raise ZeroGradient("no data above the region threshold")
        ratio = motion.linear_independence_diagnostic(data.grads[t0][region], rho, 0.0, x)
        report["linear_independence_ratio"] = ratio
        report["warning"] = ratio > args.warn
    except ZeroGradient as exc:
        report["error"] = f"ZeroGradient: {exc}"
        status = EXIT_NUMERICAL
    text = json.dumps(report, indent=1)
    print(text)
    if report.get("warning"):
        log.warning("data partials are nearly parallel (ratio %.3f); tangential motion is poorly determined",
                    report["linear_independence_ratio"])
    if args.out:
        Path(args.out).write_text(text + "\n")
    out = args.out or args.input
    return out, [args.input, args.radius], [args.out] if args.out else [], {}, {"report": report,
                                                                             "exit_status": status}


# ------------------------------------------------------------------ parser

def _add_common(p):
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--frames", help="frame range t0..t1")
    p.add_argument("--threads", type=int, help="thread budget recorded in the manifest")
    p.add_argument("--log-level", default="INFO")


def _add_fit_flags(p):
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--r", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--sigma", type=float, help="detection Gaussian width (µm)")
    p.add_argument("--theta", type=float, help="detection threshold in (0, 1)")


def _add_motion_flags(p):
    p.add_argument("--atlas-level", dest="atlas_level", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--degree", type=int, help="cubature degree")
    p.add_argument("--eps", type=float, help="radial band half-width")
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha0", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--s-mode", dest="s_mode", choices=motion.S_MODES)
    p.add_argument("--mesh-level", dest="mesh_level", type=int)


def build_parser():
    ap = argparse.ArgumentParser(prog="surfmotion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a phantom from a JSON spec")
    p.add_argument("spec")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--degree", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit-surface", help="fit radius series to points or a volume")
    p.add_argument("points", help="CSV frame,x,y,z, points JSON, or volume sidecar")
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit_surface)

    for name, func, helptext in (("estimate-of", cmd_estimate_of, "brightness-constancy motion"),
                                 ("estimate-cm", cmd_estimate_cm, "mass-conservation motion")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("input", help="surface-data manifest or volume sidecar")
        p.add_argument("radius", help="radius series JSON")
        p.add_argument("--out", required=True)
        _add_motion_flags(p)
        _add_common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("render", help="render a velocity field")
    p.add_argument("velocity")
    p.add_argument("radius")
    p.add_argument("--mode", choices=("color", "streamline", "mesh"), default="color")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--level", type=int, help="sampling mesh level (default: mesh_level)")
    p.add_argument("--seeds", type=int, default=12)
    p.add_argument("--kappa", type=float)
    p.add_argument("--widen", action="store_true", help="scale the mesh radially by 1%%")
    p.add_argument("--mesh-level", dest="mesh_level", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("diagnose", help="data quality report")
    p.add_argument("input")
    p.add_argument("radius")
    p.add_argument("--out")
    p.add_argument("--region-threshold", type=float, default=0.2)
    p.add_argument("--warn", type=float, default=0.9)
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        result = args.func(args, cfg)
        out, inputs, outputs, timings = result[:4]
        extra = result[4] if len(result) > 4 else {}
        write_manifest(out, args.command, cfg, inputs, outputs, timings, extra)
        return int(extra.get("exit_status", EXIT_OK))
    except (ValidationError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SurfMotionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

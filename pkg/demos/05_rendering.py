"""Colour-coded top views, streamlines and a VTK mesh of an estimated field.

Writes flow.ppm, streamlines.svg and surface.vtk into ``demo_out/``.
"""
from pathlib import Path

import numpy as np

from surfmotion import basisfield as B
from surfmotion import mesh as Msh
from surfmotion import motion as Mo
from surfmotion import quadrature as Q
from surfmotion import synth as S
from surfmotion import viz as V

out = Path("demo_out")
out.mkdir(exist_ok=True)

rule = Q.cap_rule(100)
spec = S.PhantomSpec(blobs=[{"centre": [1, 0, 1], "sigma": 0.15}, {"centre": [-0.5, 0.6, 1], "sigma": 0.2}],
                     omega=0.02)
data = S.generate_surface_phantom(spec, rule.nodes)
rho = spec.radius_evaluator(0)
vf = Mo.estimate(Mo.FrameInputs.from_surface_data(data, 0), rho, 0.0, B.hemisphere_atlas(4), rule,
                 Mo.RegularizationConfig())

mesh = Msh.icosphere(5)
rgb = V.color_faces(mesh, lambda x: Mo.reconstruct(vf, rho, 0.0, x))
V.write_ppm(out / "flow.ppm", V.raster_top_view(mesh, rgb, size=256))

xs = np.linspace(-1, 1, 101)
X, Y = np.meshgrid(xs, xs, indexing="ij")
inside = X**2 + Y**2 < 1
pts = np.stack([X, Y, np.sqrt(np.clip(1 - X**2 - Y**2, 0, None))], -1).reshape(-1, 3)
planar = np.zeros((len(pts), 2))
planar[inside.ravel()] = V.project_rescale(Mo.reconstruct(vf, rho, 0.0, pts[inside.ravel()]))
sampler = V.grid_sampler(xs, xs, planar.reshape(101, 101, 2))
seeds = np.stack(np.meshgrid(np.linspace(-0.8, 0.8, 9), np.linspace(-0.8, 0.8, 9)), -1).reshape(-1, 2)
seeds = seeds[np.linalg.norm(seeds, axis=1) < 0.9]
speed = np.abs(planar).max()
V.write_svg(out / "streamlines.svg", V.streamlines(sampler, seeds, 0.2 / (50 * speed)), extent=1.0)

coarse = Msh.icosphere(3)
upper = coarse.vertices[:, 2] >= 0
vec = np.zeros_like(coarse.vertices)
vec[upper] = Mo.reconstruct(vf, rho, 0.0, coarse.vertices[upper])
values, _ = S.surface_values(spec, 0, coarse.vertices)
V.write_vtk(out / "surface.vtk", coarse, point_scalars=values, point_vectors=vec)
print("wrote", ", ".join(str(p) for p in sorted(out.iterdir())))

"""Geometry of a star-shaped surface, step by step.

Builds a slightly deformed sphere from two spherical harmonics, evaluates the
metric and curvature at a few points and integrates over the surface through
the sphere pullback.
"""
import numpy as np

from surfmotion import geometry as G
from surfmotion import harmonics as H
from surfmotion import quadrature as Q

c = np.zeros(H.num_coeffs(3))
c[0] = np.sqrt(4 * np.pi)              # mean radius 1
c[H.ShIndex(2, 1).p] = 0.1
c[H.ShIndex(3, 2).p] = 0.05
rho = G.SHRadius(c)

x = np.array([[0.0, 0.6, 0.8], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
s = G.eval_frame_auto(rho, 0.0, x)
for xi, r, K in zip(x, s.rho, s.K):
    print(f"direction {xi}: radius {r:.5f}, mean curvature {K:+.5f}")

rule = Q.sphere_rule(60)
area = Q.surface_integral(rule, rho, 0.0, np.ones(len(rule)))
print(f"surface area {area:.10f} (unit sphere: {4 * np.pi:.10f})")

sphere = G.eval_frame_auto(G.ConstantRadius(2.0), 0.0, rule.nodes)
print(f"sphere of radius 2: K ranges over [{sphere.K.min():.12f}, {sphere.K.max():.12f}]")

"""Cubature on spherical caps and surface integrals over sphere-like surfaces."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class CubatureRule:
    nodes: np.ndarray     # (M, 3) points on the unit sphere
    weights: np.ndarray   # (M,) positive
    degree: int
    theta_max: float      # pi/2 for the hemisphere cap, pi for the full sphere

    @property
    def domain(self) -> str:
        return "sphere" if self.theta_max >= np.pi else "cap"

    @property
    def area(self) -> float:
        return 2.0 * np.pi * (1.0 - np.cos(self.theta_max))

    def __len__(self):
        return len(self.weights)


def cap_rule(degree: int, theta_max: float = np.pi / 2) -> CubatureRule:
    """Product Gauss rule exact for polynomials of total degree ``degree`` on a polar cap.

    Gauss-Legendre with ``m = ceil((degree + 1) / 2)`` nodes in ``cos(theta)``
    over ``[cos(theta_max), 1]`` times ``2m + 1`` equispaced azimuths. Pass
    ``theta_max = pi`` for the full sphere.
    """
    if degree < 1:
        raise ValidationError("cubature degree must be >= 1")
    if not 0.0 < theta_max <= np.pi:
        raise ValidationError("theta_max must lie in (0, pi]")
    m = math.ceil((degree + 1) / 2)
    u, wu = np.polynomial.legendre.leggauss(m)
    lo = np.cos(theta_max)
    u = 0.5 * (1.0 - lo) * u + 0.5 * (1.0 + lo)
    wu = 0.5 * (1.0 - lo) * wu
    nphi = 2 * m + 1
    phi = (np.arange(nphi) + 0.5) * (2.0 * np.pi / nphi)
    uu, pp = np.meshgrid(u, phi, indexing="ij")
    s = np.sqrt(1.0 - uu**2)
    nodes = np.stack([s * np.cos(pp), s * np.sin(pp), uu], axis=-1).reshape(-1, 3)
    weights = np.repeat(wu, nphi) * (2.0 * np.pi / nphi)
    return CubatureRule(nodes, weights, degree, float(theta_max))


def sphere_rule(degree: int) -> CubatureRule:
    return cap_rule(degree, np.pi)


def area_element(rho, grad_rho):
    """Pullback density ``rho * sqrt(|grad rho|**2 + rho**2)`` relating dM_t to dS^2."""
    rho = np.asarray(rho, dtype=float)
    return rho * np.sqrt(np.sum(np.asarray(grad_rho) ** 2, axis=-1) + rho**2)


def surface_weights(rule: CubatureRule, rho, t=0.0) -> np.ndarray:
    """Cubature weights for integrating over ``M_t`` at the rule's nodes."""
    ev = rho.evaluate(rule.nodes, t)
    return rule.weights * area_element(ev.value, ev.surface_grad(rule.nodes))


def surface_integral(rule: CubatureRule, rho, t, integrand) -> float:
    """Approximate ``int_{M_t} f dM_t`` through the sphere pullback.

    ``integrand`` is either an array of values at the nodes or a callable
    taking the node array.
    """
    vals = integrand(rule.nodes) if callable(integrand) else np.asarray(integrand, dtype=float)
    w = surface_weights(rule, rho, t)
    return float(np.sum(vals * w))

"""Quadrature rules on spheres, balls and intervals.

The sphere rule is a product Gauss rule in nested polar coordinates: a Gauss-Gegenbauer
rule in the first coordinate times a rule on the lower sphere, closed by an equispaced
rule on the circle. A rule of degree d integrates every polynomial of degree <= d
exactly on S^(p-1).
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ndtri, roots_jacobi, roots_legendre
from scipy.stats import qmc


def sphere_area(p: int) -> float:
    """Surface measure of S^(p-1) in R^p."""
    return 2.0 * math.pi ** (p / 2) / math.exp(gammaln(p / 2))


def ball_volume_euclidean(p: int) -> float:
    return sphere_area(p) / p


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=None)
def sphere_rule(p: int, degree: int = 7):
    """Nodes (N, p) and weights (N,) on the unit sphere S^(p-1), exact to ``degree``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return _frozen(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]))
    if p == 2:
        m = degree + 1
        phi = 2 * math.pi * np.arange(m) / m
        return _frozen(np.stack([np.cos(phi), np.sin(phi)], 1), np.full(m, 2 * math.pi / m))
    k = degree // 2 + 1
    a = (p - 3) / 2
    t, w = roots_jacobi(k, a, a)
    low_x, low_w = sphere_rule(p - 1, degree)
    pts = [np.hstack([np.full((len(low_x), 1), ti), math.sqrt(1 - ti * ti) * low_x]) for ti in t]
    wts = [wi * low_w for wi in w]
    return _frozen(np.vstack(pts), np.concatenate(wts))


@lru_cache(maxsize=None)
def radial_rule(p: int, n: int):
    """Gauss rule for int_0^1 rho^(p-1) g(rho) d rho (Gauss-Jacobi after s = 2 rho - 1)."""
    s, w = roots_jacobi(n, 0.0, p - 1.0)
    return _frozen(0.5 * (1.0 + s), w / 2.0**p)


@lru_cache(maxsize=None)
def ball_product_rule(p: int, degree: int = 7, radial: int = 8):
    """Product rule on the closed unit ball B^p: sphere rule times radial Gauss-Jacobi."""
    sx, sw = sphere_rule(p, degree)
    rho, rw = radial_rule(p, radial)
    pts = (rho[:, None, None] * sx[None]).reshape(-1, p)
    wts = (rw[:, None] * sw[None]).reshape(-1)
    return _frozen(pts, wts)


def qmc_ball_points(p: int, n: int, seed) -> np.ndarray:
    """n scrambled Sobol points mapped to the unit ball (uniform density).

    Direction from p Gaussianized coordinates, radius u^(1/p) from one more.
    """
    m = max(1, math.ceil(math.log2(n)))
    u = qmc.Sobol(d=p + 1, scramble=True, seed=seed).random_base2(m)[:n]
    u = np.clip(u, 1e-15, 1 - 1e-15)
    g = ndtri(u[:, :p])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * u[:, p:] ** (1.0 / p)


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return _frozen(0.5 * (x + 1.0), 0.5 * w)

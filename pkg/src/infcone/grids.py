"""Deterministic unit-sphere direction grids.

S^1 uses a uniform angular grid; S^2 a Fibonacci sphere; higher spheres a
fixed-seed Gaussian cloud (seedless from the caller's point of view: the
seed is a module constant, so grids are bit-identical across runs).

Each grid comes with a covering step (radians): roughly the largest angle
from an arbitrary unit vector to its nearest grid point, used as slack in
polar computations.
"""

import functools
import math

import numpy as np

_HIGHDIM_SEED = 0xD1FC01


@functools.lru_cache(maxsize=32)
def circle_grid(n=3600):
    """n uniformly spaced unit vectors on S^1, starting at (1, 0)."""
    th = 2.0 * math.pi * np.arange(n) / n
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    pts.setflags(write=False)
    return pts


@functools.lru_cache(maxsize=32)
def fibonacci_sphere(n=20000):
    """Fibonacci lattice on S^2; near-uniform covering."""
    i = np.arange(n, dtype=float)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    pts.setflags(write=False)
    return pts


@functools.lru_cache(maxsize=32)
def _gaussian_sphere(dim, n):
    rng = np.random.default_rng(_HIGHDIM_SEED + dim)
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g.setflags(write=False)
    return g


def sphere_grid(dim, sizes=None):
    """Return (points, covering_step) for the unit sphere in R^dim.

    sizes: optional dict-like with keys 2, 3, 4 overriding point counts.
    """
    sizes = sizes or {}
    if dim == 1:
        pts = np.array([[1.0], [-1.0]])
        return pts, 1e-9
    if dim == 2:
        n = sizes.get(2, 3600)
        return circle_grid(n), 2.0 * math.pi / n
    if dim == 3:
        n = sizes.get(3, 20000)
        # nearest-neighbour spacing of the Fibonacci lattice ~ 3.81/sqrt(n)
        return fibonacci_sphere(n), 3.81 / math.sqrt(n)
    n = sizes.get(4, 40000)
    # covering step for a random cloud on S^{dim-1}: (area/n)^{1/(dim-1)}
    # up to a packing constant; 2x safety margin
    area = 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
    step = 2.0 * (area / n) ** (1.0 / (dim - 1))
    return _gaussian_sphere(dim, n), step


def grid_sizes_from_config(cfg):
    return {2: cfg.grid_2d, 3: cfg.grid_3d, 4: cfg.grid_4d}

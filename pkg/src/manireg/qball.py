"""Discrete orientation distribution functions in square-root form.

An ODF on a spherical sample set ``S`` is stored as ``phi`` with
``sum phi(s)^2 = 1``, i.e. a point on the unit sphere ``S^{n-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dti import rng_from_seed
from .manifold import Sphere

__all__ = [
    "OdfGrid",
    "default_grid",
    "odf_from_diffusivity",
    "single_peak",
    "two_peak",
    "synth_crossing",
    "odf_noise",
    "nonpositive_mask",
    "format_odf_glyphs",
    "odf_manifold",
]

RAW_FLOOR = 1e-8


@dataclass(frozen=True)
class OdfGrid:
    samples: np.ndarray  # (n, 3)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise ValueError("samples must have shape (n, 3)")
        if np.any(np.abs(np.linalg.norm(s, axis=1) - 1) > 1e-10):
            raise ValueError("samples must be unit vectors")
        g = s @ s.T
        np.fill_diagonal(g, 0)
        if np.any(g > 1 - 1e-12):
            raise ValueError("duplicate sample directions")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]


def _icosphere(levels: int) -> np.ndarray:
    phi = (1 + np.sqrt(5)) / 2
    v = [(-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0), (0, -1, phi), (0, 1, phi),
         (0, -1, -phi), (0, 1, -phi), (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in v]
    for _ in range(levels):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts)


@lru_cache(maxsize=8)
def _default_samples(n: int) -> np.ndarray:
    levels = 0
    while True:
        pts = _icosphere(levels)
        # upper hemisphere, one representative per antipodal pair
        key = np.where(np.abs(pts[:, 2]) > 1e-12, pts[:, 2],
                       np.where(np.abs(pts[:, 1]) > 1e-12, pts[:, 1], pts[:, 0]))
        hemi = pts[key > 0]
        if len(hemi) >= n:
            break
        levels += 1
    # greedy farthest-point selection (axial distance) starting at the pole
    pole = int(np.argmax(hemi[:, 2]))
    chosen = [pole]
    dmin = 1 - np.abs(hemi @ hemi[pole])
    for _ in range(n - 1):
        dmin[chosen] = -1
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, 1 - np.abs(hemi @ hemi[nxt]))
    return hemi[np.array(chosen)]


def default_grid(n: int = 181) -> OdfGrid:
    """``n`` well-spread directions on the upper hemisphere of a subdivided icosahedron."""
    if n < 1:
        raise ValueError("n must be positive")
    return OdfGrid(_default_samples(n).copy())


def odf_manifold(grid: OdfGrid) -> Sphere:
    return Sphere(grid.n)


def odf_from_diffusivity(grid: OdfGrid, raw) -> np.ndarray:
    """``phi = sqrt(raw / sum raw)``; works on arrays of ODFs along the last axis."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != grid.n:
        raise ValueError(f"expected {grid.n} values, got {raw.shape[-1]}")
    if np.any(raw < 0):
        raise ValueError("raw values must be nonnegative")
    tot = raw.sum(axis=-1, keepdims=True)
    if np.any(tot <= 0):
        raise ValueError("raw values are all zero")
    phi = np.sqrt(raw / tot)
    return phi / np.linalg.norm(phi, axis=-1, keepdims=True)


def _peak(grid, direction, kappa):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return np.exp(kappa * (grid.samples @ d) ** 2)


def single_peak(grid: OdfGrid, direction, kappa: float) -> np.ndarray:
    return odf_from_diffusivity(grid, _peak(grid, direction, kappa))


def two_peak(grid: OdfGrid, dir1, dir2, ratio: float, kappa: float) -> np.ndarray:
    """Peaks weighted 1 and ``ratio``."""
    return odf_from_diffusivity(grid, _peak(grid, dir1, kappa) + ratio * _peak(grid, dir2, kappa))


def synth_crossing(grid: OdfGrid, geometry: dict, kappa: float) -> np.ndarray:
    """ODF from ``{"single_peak": dir}`` or ``{"two_peak": (dir1, dir2, ratio)}``."""
    if "single_peak" in geometry:
        return single_peak(grid, geometry["single_peak"], kappa)
    d1, d2, r = geometry["two_peak"]
    return two_peak(grid, d1, d2, r, kappa)


def odf_noise(odf, sigma: float, seed: int, grid: OdfGrid | None = None) -> np.ndarray:
    """Gaussian noise on ``phi^2``, clamped and renormalized."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    odf = np.asarray(odf, dtype=float)
    grid = grid or OdfGrid(default_grid(odf.shape[-1]).samples)
    raw = odf**2 + sigma * rng_from_seed(seed).standard_normal(odf.shape)
    return odf_from_diffusivity(grid, np.maximum(raw, RAW_FLOOR))


def nonpositive_mask(odfs) -> np.ndarray:
    """True where an ODF has a component <= 0 (left the positive orthant)."""
    return np.any(np.asarray(odfs) <= 0, axis=-1)


def format_odf_glyphs(odfs, grid: OdfGrid) -> str:
    """Header with the sample directions, then ``i j k r`` per pixel and sample.

    The polar-plot vertex of record ``(i, j, k)`` is ``r * samples[k]``.
    """
    odfs = np.asarray(odfs, dtype=float)
    if odfs.ndim != 3 or odfs.shape[-1] != grid.n:
        raise ValueError("expected an image of ODFs matching the grid")
    lines = [f"# samples {grid.n}"]
    lines += ["# " + " ".join(repr(float(c)) for c in s) for s in grid.samples]
    h, w, n = odfs.shape
    for i in range(h):
        for j in range(w):
            for k in range(n):
                lines.append(f"{i} {j} {k} {float(odfs[i, j, k])!r}")
    return "\n".join(lines) + "\n"

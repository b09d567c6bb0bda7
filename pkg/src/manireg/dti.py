"""Diffusion tensor imaging: DWI simulation, Rician noise, tensor fitting, glyphs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import Spd3

__all__ = [
    "DwiStack",
    "default_directions",
    "simulate_dwi",
    "add_rician",
    "fit_tensors",
    "design_matrix",
    "glyph_records",
    "format_glyphs",
    "semi_axes",
    "rng_from_seed",
]

B_VALUE = 800.0
A0 = 1000.0
INTENSITY_FLOOR = 1e-6  # relative to A0, before taking logs
EIG_REL_FLOOR = 1e-6
EIG_ABS_FLOOR = 1e-12


def rng_from_seed(seed: int) -> np.random.Generator:
    """Counter-based generator: the stream depends on the seed only."""
    return np.random.Generator(np.random.Philox(int(seed)))


def default_directions() -> np.ndarray:
    """15 gradient directions: the icosahedron's edge midpoints, one per antipodal pair."""
    phi = (1 + np.sqrt(5)) / 2
    verts = []
    for a in (-1, 1):
        for b in (-phi, phi):
            verts += [(0, a, b), (a, b, 0), (b, 0, a)]
    verts = np.array(verts, dtype=float)
    dirs = []
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            if abs(np.linalg.norm(verts[i] - verts[j]) - 2.0) < 1e-9:
                mid = verts[i] + verts[j]
                mid /= np.linalg.norm(mid)
                # canonical representative of {mid, -mid}
                k = np.flatnonzero(np.abs(mid) > 1e-12)[0]
                if mid[k] < 0:
                    mid = -mid
                dirs.append(mid)
    dirs = np.unique(np.round(np.array(dirs), 12), axis=0)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass
class DwiStack:
    directions: np.ndarray  # (K, 3)
    images: np.ndarray  # (K, H, W)
    b: float = B_VALUE
    A0: float = A0

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=float)
        self.images = np.asarray(self.images, dtype=float)
        k = self.directions.shape[0]
        if self.directions.shape != (k, 3):
            raise ValueError("directions must have shape (K, 3)")
        if np.any(np.abs(np.linalg.norm(self.directions, axis=1) - 1) > 1e-10):
            raise ValueError("directions must be unit vectors")
        if self.images.ndim != 3 or self.images.shape[0] != k:
            raise ValueError("need one 2D image per direction")
        if k < 6:
            raise ValueError("at least 6 directions are needed")
        if not (self.b > 0 and self.A0 > 0):
            raise ValueError("b and A0 must be positive")
        if np.any(self.images < 0) or not np.all(np.isfinite(self.images)):
            raise ValueError("intensities must be finite and nonnegative")

    @property
    def shape(self):
        return self.images.shape[1:]


def simulate_dwi(tensors, directions=None, b: float = B_VALUE, A0: float = A0) -> DwiStack:
    """``A0 exp(-b v^T S v)`` for every pixel and direction."""
    tensors = Spd3().check_points(tensors)
    if tensors.ndim != 4:
        raise ValueError("expected a 2D tensor image")
    directions = default_directions() if directions is None else np.asarray(directions, float)
    q = np.einsum("ki,hwij,kj->khw", directions, tensors, directions)
    return DwiStack(directions, A0 * np.exp(-b * q), b, A0)


def add_rician(stack: DwiStack, sigma: float, seed: int) -> DwiStack:
    """Magnitude of the signal plus complex Gaussian noise of deviation ``sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rng = rng_from_seed(seed)
    xy = rng.standard_normal((2,) + stack.images.shape) * sigma
    noisy = np.hypot(stack.images + xy[0], xy[1])
    return DwiStack(stack.directions.copy(), noisy, stack.b, stack.A0)


def design_matrix(directions) -> np.ndarray:
    v = np.asarray(directions, dtype=float)
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    return np.stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z], axis=1)


def fit_tensors(stack: DwiStack, return_flags: bool = False):
    """Log-linear least-squares tensors, projected onto SPD by eigenvalue clamping.

    With ``return_flags`` also returns a boolean image marking clamped pixels.
    """
    A = design_matrix(stack.directions)
    if np.linalg.matrix_rank(A) < 6:
        raise ValueError("direction set does not determine a symmetric tensor (rank < 6)")
    k, h, w = stack.images.shape
    sig = np.maximum(stack.images, INTENSITY_FLOOR * stack.A0)
    y = np.log(stack.A0 / sig).reshape(k, -1) / stack.b
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    xx, yy, zz, xy, xz, yz = coef
    S = np.stack([np.stack([xx, xy, xz], -1), np.stack([xy, yy, yz], -1),
                  np.stack([xz, yz, zz], -1)], -2)
    lam, vec = np.linalg.eigh(S)
    floor = np.maximum(EIG_REL_FLOOR * lam[:, -1:], EIG_ABS_FLOOR)
    flags = np.any(lam < floor, axis=1)
    lam = np.maximum(lam, floor)
    T = np.einsum("nik,nk,njk->nij", vec, lam, vec)
    T = 0.5 * (T + np.swapaxes(T, -1, -2))
    T = T.reshape(h, w, 3, 3)
    if return_flags:
        return T, flags.reshape(h, w)
    return T


def _eig_desc(tensors):
    lam, vec = np.linalg.eigh(tensors)
    lam = lam[..., ::-1]
    vec = vec[..., ::-1]
    # sign convention: the largest-magnitude component of each axis is positive
    idx = np.argmax(np.abs(vec), axis=-2)
    sgn = np.sign(np.take_along_axis(vec, idx[..., None, :], axis=-2))
    return lam, vec * sgn


def semi_axes(tensor, c: float = 1.0):
    """Semi-axis lengths and directions of ``{x : x^T S x = c}``, longest first."""
    lam, vec = _eig_desc(np.asarray(tensor, dtype=float))
    return np.sqrt(c / lam)[..., ::-1], vec[..., ::-1]


def glyph_records(tensors, c: float = 1.0):
    """Per pixel ``(i, j, l1, l2, l3, e1, e2, e3, c)`` in row-major order."""
    if not c > 0:
        raise ValueError("c must be positive")
    tensors = Spd3().check_points(tensors)
    lam, vec = _eig_desc(tensors)
    h, w = tensors.shape[:2]
    out = []
    for i in range(h):
        for j in range(w):
            out.append((i, j, *lam[i, j].tolist(), *vec[i, j].T.ravel().tolist(), float(c)))
    return out


def format_glyphs(tensors, c: float = 1.0) -> str:
    """Text glyph table: ``i j l1 l2 l3 e1x e1y e1z e2x e2y e2z e3x e3y e3z c``."""
    lines = []
    for rec in glyph_records(tensors, c):
        lines.append(" ".join([str(rec[0]), str(rec[1])] + [repr(float(v)) for v in rec[2:]]))
    return "\n".join(lines) + "\n"

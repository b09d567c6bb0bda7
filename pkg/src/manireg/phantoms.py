"""Synthetic ground-truth images."""
from __future__ import annotations

import numpy as np

from .dti import rng_from_seed
from .qball import default_grid, single_peak, two_peak

__all__ = ["tensor", "rotation", "dti_pwconst", "dti_smooth", "qball_crossing", "KINDS"]

KINDS = ("dti-pwconst", "dti-smooth", "qball-crossing")

# eigenvalue profiles in mm^2/s, typical of white and grey matter
PROFILES = (
    (1.7e-3, 0.3e-3, 0.3e-3),
    (0.8e-3, 0.8e-3, 0.8e-3),
    (1.2e-3, 1.1e-3, 0.25e-3),
    (1.5e-3, 0.5e-3, 0.35e-3),
)
# two-region images: isotropic background, strongly prolate square (distance ~3.1)
SQUARE_PROFILES = ((0.8e-3, 0.8e-3, 0.8e-3), (2.2e-3, 0.1e-3, 0.1e-3))


def rotation(axis_angle) -> np.ndarray:
    r = np.asarray(axis_angle, dtype=float)
    th = np.linalg.norm(r)
    if th == 0:
        return np.eye(3)
    k = r / th
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(th) * K + (1 - np.cos(th)) * K @ K


def tensor(eigenvalues, R=None) -> np.ndarray:
    R = np.eye(3) if R is None else R
    return R @ np.diag(eigenvalues) @ R.T


def _random_rotation(rng):
    v = rng.standard_normal(3)
    return rotation(v / np.linalg.norm(v) * rng.uniform(0, np.pi))


def dti_pwconst(rows: int, cols: int, seed: int):
    """Piecewise-constant tensor image and its manifest entries.

    One row: four constant segments of (nearly) equal length.  Several rows:
    a background with an inner square of a second tensor.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = rng_from_seed(seed)
    profiles = PROFILES if rows == 1 else SQUARE_PROFILES
    rots = [_random_rotation(rng) for _ in profiles]
    tens = np.array([tensor(p, R) for p, R in zip(profiles, rots)])
    info = {}
    if rows == 1:
        if cols < 4:
            raise ValueError("a 1-row phantom needs at least 4 columns")
        jumps = [round(cols * k / 4) for k in (1, 2, 3)]
        labels = np.searchsorted(jumps, np.arange(cols), side="right")
        img = tens[labels][None]
        info["jumps"] = jumps
        info["labels"] = labels[None].tolist()
    else:
        r0, r1 = rows // 4, rows - rows // 4
        c0, c1 = cols // 4, cols - cols // 4
        labels = np.zeros((rows, cols), dtype=int)
        labels[r0:r1, c0:c1] = 1
        img = tens[labels]
        info["square"] = [r0, r1, c0, c1]
        info["labels"] = labels.tolist()
    return img, info


def dti_smooth(rows: int, cols: int, seed: int):
    """Prolate tensors whose principal axis turns smoothly across the image."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = rng_from_seed(seed)
    phase = rng.uniform(0, np.pi)
    i, j = np.mgrid[0:rows, 0:cols]
    ang = phase + np.pi * (i / max(rows, 2) + 0.5 * j / max(cols, 2))
    img = np.empty((rows, cols, 3, 3))
    for a in range(rows):
        for b in range(cols):
            img[a, b] = tensor(PROFILES[0], rotation((0, 0, ang[a, b])))
    return img, {"phase": phase}


def qball_crossing(rows: int, cols: int, seed: int, n: int = 181, kappa: float = 8.0):
    """A horizontal and a vertical fiber band crossing in the middle.

    Pixels outside both bands carry an isotropic ODF.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    grid = default_grid(n)
    rng = rng_from_seed(seed)
    tilt = rng.uniform(-0.1, 0.1)
    ex = np.array([np.cos(tilt), np.sin(tilt), 0.0])
    ey = np.array([-np.sin(tilt), np.cos(tilt), 0.0])
    hband = (rows // 3, rows - rows // 3)
    vband = (cols // 3, cols - cols // 3)
    iso = np.full(grid.n, 1 / np.sqrt(grid.n))
    odf_h = single_peak(grid, ex, kappa)
    odf_v = single_peak(grid, ey, kappa)
    odf_x = two_peak(grid, ex, ey, 1.0, kappa)
    img = np.empty((rows, cols, grid.n))
    labels = np.zeros((rows, cols), dtype=int)
    for a in range(rows):
        for b in range(cols):
            inh = hband[0] <= a < hband[1]
            inv = vband[0] <= b < vband[1]
            labels[a, b] = inh + 2 * inv
            img[a, b] = odf_x if inh and inv else odf_h if inh else odf_v if inv else iso
    return img, {"tilt": tilt, "kappa": kappa, "n": grid.n, "hband": list(hband),
                 "vband": list(vband), "labels": labels.tolist()}

"""Segmentation scores against a labelled ground truth."""
from __future__ import annotations

import numpy as np

from .manifold import Manifold

__all__ = ["boundary_mask", "label_boundary_mask", "boundary_f1", "jump_set"]


def boundary_mask(m: Manifold, x, tol: float = 0.05) -> np.ndarray:
    """Pixels whose right or lower neighbor lies farther than ``tol``."""
    h, w = x.shape[:2]
    out = np.zeros((h, w), dtype=bool)
    if w > 1:
        out[:, :-1] |= m.dist(x[:, :-1], x[:, 1:]) > tol
    if h > 1:
        out[:-1, :] |= m.dist(x[:-1], x[1:]) > tol
    return out


def label_boundary_mask(labels) -> np.ndarray:
    lab = np.asarray(labels)
    out = np.zeros(lab.shape, dtype=bool)
    out[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    out[:-1, :] |= lab[:-1] != lab[1:]
    return out


def boundary_f1(pred, truth) -> float:
    pred, truth = np.asarray(pred, bool), np.asarray(truth, bool)
    tp = int(np.sum(pred & truth))
    if tp == 0:
        return 1.0 if not pred.any() and not truth.any() else 0.0
    prec = tp / pred.sum()
    rec = tp / truth.sum()
    return float(2 * prec * rec / (prec + rec))


def jump_set(m: Manifold, x, tol: float = 0.05) -> list[int]:
    """Indices ``i`` of a signal with ``d(x[i-1], x[i]) > tol``."""
    d = m.dist(x[:-1], x[1:])
    return [int(i) + 1 for i in np.flatnonzero(d > tol)]

"""Proximal mappings of distance terms and the cyclic proximal point algorithm.

Minimizes the L^p-V^q functional

    V(x) = 1/p sum_i d(x_i, f_i)^p + alpha/q sum_i d(x_i, x_{i+1})^q
           [+ mu/p sum_i d(x_i, a_i)^p]

by cycling through the closed-form proxes of its summands with parameters
``lambda_k = lambda0 / k``.  Only ``p, q in {1, 2}`` have closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _cppa_kernels as _ck
from .grid import grid_lines
from .manifold import AntipodalPoints, Euclidean, Manifold, Spd3, Sphere

__all__ = [
    "CppaConfig",
    "VqProblem",
    "CppaResult",
    "prox_pair",
    "prox_data",
    "cppa_solve",
    "cppa_batch",
    "vq_energy",
    "cppa_image",
    "image_vq_energy",
]


@dataclass
class CppaConfig:
    lambda0: float = 2.0
    sweeps: int = 300
    #: stop when the relative energy change over one sweep falls below this
    tol: float = 1e-8

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")

    def lam(self, k: int) -> float:
        return self.lambda0 / k


@dataclass
class VqProblem:
    data: np.ndarray
    p: int = 2
    q: int = 2
    alpha: float = 1.0
    extra: tuple | None = None  # (anchor signal, mu)

    def __post_init__(self):
        _check_exponents(self.p, self.q)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.extra is not None and self.extra[1] < 0:
            raise ValueError("mu must be nonnegative")


class CppaResult(NamedTuple):
    x: np.ndarray
    energy: float
    sweeps: int


def _check_exponents(p, q):
    if p not in (1, 2) or q not in (1, 2):
        raise ValueError("closed-form proxes exist only for p, q in {1, 2}")


def _pair_step(d, lam, q):
    if q == 1:
        return np.where(lam < d / 2, lam, d / 2)
    return lam / (1 + 2 * lam) * d


def _data_step(d, lam, p):
    if p == 1:
        return np.where(lam < d, lam, d)
    return lam / (1 + lam) * d


def _prox_pair(m, x, y, lam, q):
    v = m.log(x, y)
    d = m.norm(x, v)
    t = _pair_step(d, lam, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(d > 0, t / np.where(d > 0, d, 1.0), 0.0)
    moved = (d > 0) & (t > 0)
    a = np.where(m._expand(moved), m.exp(x, m._expand(frac) * v), x)
    b = np.where(m._expand(moved), m.move_toward(y, x, t), y)
    return a, b


def _prox_data(m, x, f, lam, p):
    v = m.log(x, f)
    d = m.norm(x, v)
    s = _data_step(d, lam, p)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(d > 0, s / np.where(d > 0, d, 1.0), 0.0)
    moved = (d > 0) & (s > 0)
    return np.where(m._expand(moved), m.exp(x, m._expand(frac) * v), x)


def prox_pair(m: Manifold, x, y, lam: float, q: int):
    """Prox of ``lam/q d(., .)^q`` on a pair: both points move along their geodesic."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if q not in (1, 2):
        raise ValueError("q must be 1 or 2")
    x, y = m._check_shape(x, y)
    return _prox_pair(m, x, y, lam, q)


def prox_data(m: Manifold, x, f, lam: float, p: int):
    """Prox of ``lam/p d(., f)^p`` evaluated at ``x``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    x, f = m._check_shape(x, f)
    return _prox_data(m, x, f, lam, p)


def vq_energy(m: Manifold, x, data, p, q, alpha, lengths=None, anchor=None, mu=0.0):
    """Energies of a padded batch ``(B, L) + point_shape`` of L^p-V^q problems."""
    x = np.asarray(x, dtype=float)
    nb_, n = m.batch_shape(x)
    lengths = np.full(nb_, n) if lengths is None else np.asarray(lengths)
    valid = np.arange(n)[None, :] < lengths[:, None]
    e = np.sum(np.where(valid, m.dist(x, data) ** p, 0.0), axis=1) / p
    if n > 1:
        dd = m.dist(x[:, :-1], x[:, 1:]) ** q
        e = e + alpha / q * np.sum(np.where(valid[:, 1:], dd, 0.0), axis=1)
    if anchor is not None and mu:
        e = e + mu / p * np.sum(np.where(valid, m.dist(x, anchor) ** p, 0.0), axis=1)
    return e


def cppa_batch(m: Manifold, data, lengths, p, q, alpha, anchor=None, mu=0.0, init=None,
               cfg: CppaConfig | None = None):
    """Run independent CPPA problems in lockstep.

    ``data`` is padded to ``(B, L) + point_shape``; problem ``b`` uses the first
    ``lengths[b]`` entries.  One sweep applies the data prox to every index,
    then the prox of the anchor term (parameter ``lambda * mu``), then the
    coupling proxes left to right (parameter ``lambda * alpha``).  Each problem
    stops on its own relative-energy criterion.

    Returns ``(x, energy, sweeps)`` arrays.
    """
    cfg = cfg or CppaConfig()
    _check_exponents(p, q)
    data = np.asarray(data, dtype=float)
    nb_, n = m.batch_shape(data)
    lengths = np.asarray(lengths, dtype=int)
    x = data.copy() if init is None else np.array(init, dtype=float)
    use_anchor = anchor is not None and mu > 0
    if use_anchor:
        anchor = np.asarray(anchor, dtype=float)
    kind = _kind(m)
    if kind is not None:
        c = m.coord_size
        xf = np.ascontiguousarray(x.reshape(nb_, n, c))
        af = (np.ascontiguousarray(anchor.reshape(nb_, n, c)) if use_anchor
              else np.zeros((nb_, 1, c)))
        energy, sweeps, status = _ck.cppa_run(
            kind, np.ascontiguousarray(data.reshape(nb_, n, c)), lengths, af, use_anchor,
            float(mu), int(p), int(q), float(alpha), xf, float(cfg.lambda0), int(cfg.sweeps),
            float(cfg.tol))
        if status:
            raise AntipodalPoints("CPPA met antipodal points on the sphere")
        return xf.reshape(x.shape), energy, sweeps
    return _cppa_batch_generic(m, data, lengths, p, q, alpha, anchor if use_anchor else None,
                               mu, x, cfg)


def _kind(m):
    if isinstance(m, Euclidean):
        return _ck.EUCLIDEAN
    if isinstance(m, Sphere):
        return _ck.SPHERE
    if isinstance(m, Spd3):
        return _ck.SPD
    return None


def _cppa_batch_generic(m, data, lengths, p, q, alpha, anchor, mu, x, cfg):
    """Same sweeps as the compiled path, through the manifold's array methods."""
    nb_, n = m.batch_shape(data)
    use_anchor = anchor is not None
    pair_ok = np.arange(n - 1)[None, :] < (lengths[:, None] - 1)
    sweeps = np.zeros(nb_, dtype=int)
    energy = vq_energy(m, x, data, p, q, alpha, lengths, anchor if use_anchor else None, mu)
    idx = np.arange(nb_)
    couple = alpha > 0

    for k in range(1, cfg.sweeps + 1):
        if idx.size == 0:
            break
        lam = cfg.lam(k)
        xa = _prox_data(m, x[idx], data[idx], lam, p)
        if use_anchor:
            xa = _prox_data(m, xa, anchor[idx], lam * mu, p)
        if couple:
            ok = pair_ok[idx]
            for j in range(n - 1):
                sel = np.flatnonzero(ok[:, j])
                if sel.size == 0:
                    continue
                a, b = _prox_pair(m, xa[sel, j], xa[sel, j + 1], lam * alpha, q)
                xa[sel, j] = a
                xa[sel, j + 1] = b
        e = vq_energy(m, xa, data[idx], p, q, alpha, lengths[idx],
                      anchor[idx] if use_anchor else None, mu)
        x[idx] = xa
        sweeps[idx] = k
        prev = energy[idx]
        energy[idx] = e
        done = np.abs(prev - e) <= cfg.tol * np.maximum(np.abs(e), 1e-300)
        idx = idx[~done]
    return x, energy, sweeps


def cppa_solve(m: Manifold, prob: VqProblem, init=None, cfg: CppaConfig | None = None) -> CppaResult:
    """Minimize the L^p-V^q functional of a single signal."""
    data = m.check_points(prob.data)
    if m.batch_shape(data)[0] < 1 or len(m.batch_shape(data)) != 1:
        raise ValueError("data must be a nonempty signal")
    n = data.shape[0]
    anchor, mu = (None, 0.0) if prob.extra is None else prob.extra
    if anchor is not None:
        anchor = np.asarray(anchor, dtype=float)
        if anchor.shape != data.shape:
            raise ValueError("anchor must have the same shape as the data")
    init = data if init is None else m._check_shape(init)[0]
    if init.shape != data.shape:
        raise ValueError("init must have the same shape as the data")
    if prob.alpha == 0 and (anchor is None or mu == 0):
        # decoupled data terms: the data itself is the exact minimizer
        return CppaResult(data.copy(), 0.0, 0)
    x, e, s = cppa_batch(m, data[None], [n], prob.p, prob.q, prob.alpha,
                         None if anchor is None else anchor[None], mu, init[None], cfg)
    return CppaResult(x[0], float(e[0]), int(s[0]))


# -- images ---------------------------------------------------------------

DEFAULT_TV_DIRS = ((1, 0), (0, 1))


def image_vq_energy(m: Manifold, x, f, p, q, alpha, dirs=DEFAULT_TV_DIRS, weights=None):
    from .grid import neighbor_pairs
    weights = np.ones(len(dirs)) if weights is None else weights
    e = np.sum(m.dist(x, f) ** p) / p
    for a, w in zip(dirs, weights):
        (i, j), (i2, j2) = neighbor_pairs(x.shape[:2], a)
        e += alpha * w / q * np.sum(m.dist(x[i, j], x[i2, j2]) ** q)
    return float(e)


def cppa_image(m: Manifold, f, p: int, q: int, alpha: float, dirs=DEFAULT_TV_DIRS, weights=None,
               cfg: CppaConfig | None = None):
    """L^p-V^q regularization of an image by CPPA.

    Coupling proxes of each direction are applied to disjoint pair sets (even
    then odd chain positions) so each group is one vectorized update.
    Returns ``(x, energy, sweeps)``.
    """
    cfg = cfg or CppaConfig()
    _check_exponents(p, q)
    f = m.check_points(f)
    shape = f.shape[:2]
    weights = np.ones(len(dirs)) if weights is None else np.asarray(weights, dtype=float)
    groups = []
    for a, w in zip(dirs, weights):
        rows, cols, lengths = grid_lines(shape, a)
        for parity in (0, 1):
            pi, pj, qi, qj = [], [], [], []
            for r, c, n in zip(rows, cols, lengths):
                for t in range(parity, n - 1, 2):
                    pi.append(r[t]); pj.append(c[t]); qi.append(r[t + 1]); qj.append(c[t + 1])
            if pi:
                groups.append((w, np.array(pi), np.array(pj), np.array(qi), np.array(qj)))
    x = f.copy()
    energy = image_vq_energy(m, x, f, p, q, alpha, dirs, weights)
    k = 0
    for k in range(1, cfg.sweeps + 1):
        lam = cfg.lam(k)
        x = _prox_data(m, x, f, lam, p)
        if alpha > 0:
            for w, pi, pj, qi, qj in groups:
                if w <= 0:
                    continue
                a, b = _prox_pair(m, x[pi, pj], x[qi, qj], lam * alpha * w, q)
                x[pi, pj] = a
                x[qi, qj] = b
        e = image_vq_energy(m, x, f, p, q, alpha, dirs, weights)
        done = abs(energy - e) <= cfg.tol * max(abs(e), 1e-300)
        energy = e
        if done:
            break
    return x, energy, k

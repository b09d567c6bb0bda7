"""Weighted intrinsic means, medians and p-power Fréchet points.

The workhorse is :func:`frechet_batch`, which runs many independent problems in
lockstep.  Each problem is frozen as soon as it meets its own stopping rule, so
a problem's result is the same whether it is solved alone or inside a batch.

The update is the reweighted gradient step

    z <- exp_z( sum_i c_i log_z(z_i) / sum_i c_i ),   c_i = w_i d(z, z_i)^(p-2)

For p = 2 this is the classical Karcher iteration (step 1 with 1/N averaging);
for p = 1 it is the Weiszfeld step along the normalized subgradient direction,
and terms whose point coincides with the iterate are skipped.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _frechet_kernels as _fk
from .manifold import AntipodalPoints, Euclidean, Manifold, Spd3, Sphere

__all__ = [
    "MeanConfig",
    "FrechetResult",
    "frechet_batch",
    "frechet_point",
    "frechet_cost",
    "interval_error_potts",
]


HIT_TOL = 1e-12


@dataclass
class MeanConfig:
    max_iters: int = 100
    tol: float = 1e-9
    #: "weiszfeld" (reweighted step, any p) or "diminishing" (p = 1 only, steps a/k)
    step_rule: str = "weiszfeld"
    #: the constant a of the a/k schedule; None means mean pairwise distance
    step_scale: float | None = None
    init: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.step_rule not in ("weiszfeld", "diminishing"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class FrechetResult:
    point: np.ndarray
    cost: float
    iters: int
    converged: bool
    may_be_nonunique: bool = False
    history: list[float] = field(default_factory=list)


def frechet_cost(m: Manifold, z, points, weights, p):
    d = m.dist(np.asarray(z)[None], points)
    return float(np.sum(np.asarray(weights) * d**p) / p)


def _mean_pairwise(m, points, weights):
    mask = weights > 0
    out = np.empty(points.shape[0])
    for b in range(points.shape[0]):
        pts = points[b][mask[b]]
        if len(pts) < 2:
            out[b] = 1.0
            continue
        _, d = m.log_many(pts, np.broadcast_to(pts, (len(pts),) + pts.shape))
        out[b] = d.sum() / (len(pts) * (len(pts) - 1)) or 1.0
    return out


def _snap_to_vertex(m, idx, z, d, res, hit, points, weights, mask, best_z, best_cost):
    """Finish p = 1 problems whose median is the data point the iterate approaches.

    Weiszfeld iterates creep toward such a minimizer sublinearly.  When the
    nearest point is within a few step lengths, test the optimality condition
    there directly: the unit pulls of the other points must not outweigh its
    own weight.  Returns a mask over ``idx`` of problems finished this way.
    """
    dm = np.where(mask[idx], d, np.inf)
    j = np.argmin(dm, axis=1)
    rows = np.arange(idx.size)
    dj = dm[rows, j]
    cand = (dj <= 4.0 * res) & ~hit[rows, j]
    out = np.zeros(idx.size, dtype=bool)
    if not np.any(cand):
        return out
    sel = np.flatnonzero(cand)
    bi = idx[sel]
    zj = points[bi, j[sel]]
    v, dd = m.log_many(zj, points[bi], mask[bi])
    w = weights[bi]
    at = dd <= HIT_TOL * np.maximum(1.0, dd.max(axis=1, keepdims=True))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(at, 0.0, w / np.where(at, 1.0, dd))
    pull = m.norm(zj, np.sum(m._expand(c) * v, axis=1))
    held = np.sum(np.where(at, w, 0.0), axis=1)
    ok = pull <= held
    if np.any(ok):
        cost = np.sum(w * dd, axis=1)
        take = ok & (cost <= best_cost[bi])
        best_z[bi[take]] = zj[take]
        best_cost[bi[take]] = cost[take]
        z[bi[ok]] = zj[ok]
        out[sel[ok]] = True
    return out


def frechet_batch(m: Manifold, points, weights, p: float = 2.0, cfg: MeanConfig | None = None,
                  init=None, record_history: bool = False, compiled: bool = True):
    """Solve ``min_z sum_j w[b, j] d(z, points[b, j])^p / p`` for every ``b``.

    ``points`` has shape ``(B, W) + point_shape`` and ``weights`` ``(B, W)``;
    zero weights mark padding.  ``init`` (``(B,) + point_shape``) defaults to
    the first positively weighted point of each problem.

    Returns a dict with ``point``, ``cost``, ``iters``, ``converged`` and
    ``nonunique`` arrays, plus ``history`` (iterates' costs, ``(iters+1, B)``,
    NaN once frozen) when requested.  ``compiled=False`` forces the array
    implementation, which the compiled kernels mirror.
    """
    cfg = cfg or MeanConfig()
    if p < 1:
        raise ValueError("p must be at least 1")
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    nb_ = points.shape[0]
    if weights.shape != points.shape[:2]:
        raise ValueError("weights must have shape points.shape[:2]")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    wsum = weights.sum(axis=1)
    if np.any(wsum <= 0):
        raise ValueError("every problem needs a positive weight")
    mask = weights > 0
    if init is None:
        init = cfg.init
    if init is None:
        z = points[np.arange(nb_), np.argmax(mask, axis=1)].copy()
    else:
        z = np.array(np.broadcast_to(np.asarray(init, dtype=float), (nb_,) + m.point_shape))

    diminishing = cfg.step_rule == "diminishing"
    if diminishing:
        if p != 1:
            raise ValueError("the diminishing step rule is only defined for p = 1")
        scale = (np.full(nb_, cfg.step_scale) if cfg.step_scale is not None
                 else _mean_pairwise(m, points, weights))

    kind = None if diminishing or not compiled else _kind(m)
    if kind is not None:
        c = m.coord_size
        bz, best_cost, iters, converged, hist, status = _fk.frechet_run(
            kind, np.ascontiguousarray(points.reshape(nb_, -1, c)), np.ascontiguousarray(weights),
            float(p), np.ascontiguousarray(z.reshape(nb_, c)), int(cfg.max_iters), float(cfg.tol),
            HIT_TOL, bool(record_history))
        if status:
            raise AntipodalPoints("Fréchet iteration met antipodal points on the sphere")
        best_z = bz.reshape(z.shape)
        history = hist[: int(iters.max()) + 1] if record_history else None
    else:
        best_z, best_cost, iters, converged, history = _iterate_arrays(
            m, points, weights, mask, wsum, p, cfg, z, diminishing,
            scale if diminishing else None, record_history)

    if p == 1:
        # medians frequently sit exactly on a data point; test the nearest one
        _, dd = m.log_many(best_z, points, mask)
        near = points[np.arange(nb_), np.argmin(np.where(mask, dd, np.inf), axis=1)]
        _, dn = m.log_many(near, points, mask)
        cn = np.sum(weights * dn, axis=1)
        snap = cn <= best_cost
        best_z[snap] = near[snap]
        best_cost[snap] = cn[snap]

    nonunique = np.zeros(nb_, dtype=bool)
    if not m.hadamard:
        # not inside an open hemisphere around the result: other stationary
        # points may exist
        _, dd = m.log_many(best_z, points, mask)
        nonunique = np.any(mask & (dd >= np.pi / 2), axis=1)

    out = dict(point=best_z, cost=best_cost, iters=iters, converged=converged,
               nonunique=nonunique)
    if record_history:
        out["history"] = history
    return out


def _iterate_arrays(m, points, weights, mask, wsum, p, cfg, z, diminishing, scale,
                    record_history):
    """Reference iteration through the manifold's array methods."""
    nb_ = points.shape[0]
    ex = m._expand
    converged = np.zeros(nb_, dtype=bool)
    iters = np.zeros(nb_, dtype=int)
    best_z = z.copy()
    best_cost = np.full(nb_, np.inf)
    history = [] if record_history else None

    def evaluate(idx):
        v, d = m.log_many(z[idx], points[idx], mask[idx])
        cost = np.sum(weights[idx] * d**p, axis=1) / p
        better = cost < best_cost[idx]
        sel = idx[better]
        best_cost[sel] = cost[better]
        best_z[sel] = z[sel]
        return v, d, cost

    idx = np.arange(nb_)
    v, d, cost = evaluate(idx)
    if record_history:
        history.append(cost.copy())

    for k in range(1, cfg.max_iters + 1):
        w = weights[idx]
        hit = d <= HIT_TOL * np.maximum(1.0, d.max(axis=1, keepdims=True))
        dd = np.where(hit, 1.0, d)
        if p == 2:
            c = np.where(mask[idx], w, 0.0)
        else:
            c = np.where(hit, 0.0, w * dd ** (p - 2))
        num = np.sum(ex(c) * v, axis=1)

        if diminishing:
            nrm = m.norm(z[idx], num)
            with np.errstate(invalid="ignore", divide="ignore"):
                step = np.where(nrm > 0, (scale[idx] / k) / np.where(nrm > 0, nrm, 1.0), 0.0)
            g = ex(step) * num
            held = np.sum(np.where(hit, w, 0.0), axis=1)
            done = nrm <= held + 1e-15 * wsum[idx]
        else:
            csum = c.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                g = np.where(ex(csum > 0), num / ex(np.where(csum > 0, csum, 1.0)), 0.0)
            if p == 1:
                # Vardi-Zhang: weight sitting at the iterate damps the step and
                # stops it outright when it dominates the pull of the others
                pull = m.norm(z[idx], num)
                held = np.sum(np.where(hit, w, 0.0), axis=1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    damp = np.where(pull > 0, np.clip(1.0 - held / np.where(pull > 0, pull, 1.0), 0.0, 1.0), 0.0)
                g = ex(damp) * g
            res = m.norm(z[idx], g)
            done = res < cfg.tol
            if p == 1:
                done |= _snap_to_vertex(m, idx, z, d, res, hit, points, weights, mask,
                                        best_z, best_cost)

        converged[idx[done]] = True
        keep = ~done
        idx = idx[keep]
        if idx.size == 0:
            break
        iters[idx] += 1
        z[idx] = m.exp(z[idx], g[keep])
        v, d, cost = evaluate(idx)
        if record_history:
            row = np.full(nb_, np.nan)
            row[idx] = cost
            history.append(row)
    return best_z, best_cost, iters, converged, (np.array(history) if record_history else None)


def _kind(m):
    if isinstance(m, Euclidean):
        return _fk.EUCLIDEAN
    if isinstance(m, Sphere):
        return _fk.SPHERE
    if isinstance(m, Spd3):
        return _fk.SPD
    return None


def frechet_point(m: Manifold, points, weights=None, p: float = 2.0,
                  cfg: MeanConfig | None = None) -> FrechetResult:
    """Weighted Fréchet point of a finite point set.

    ``p = 2`` gives the intrinsic mean, ``p = 1`` the intrinsic median.  The
    returned point is the lowest-cost iterate; ``converged`` is False when the
    iteration cap was reached first.
    """
    points = m.check_points(points)
    n = m.batch_shape(points)
    if len(n) != 1 or n[0] == 0:
        raise ValueError("points must be a nonempty 1D collection")
    weights = np.ones(n[0]) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != n:
        raise ValueError("weights must match the number of points")
    out = frechet_batch(m, points[None], weights[None], p, cfg, record_history=True)
    hist = out["history"][:, 0]
    return FrechetResult(
        point=out["point"][0], cost=float(out["cost"][0]), iters=int(out["iters"][0]),
        converged=bool(out["converged"][0]), may_be_nonunique=bool(out["nonunique"][0]),
        history=[float(h) for h in hist[~np.isnan(hist)]])


def interval_error_potts(m: Manifold, data, l: int, r: int, p: float = 2.0, extra=None,
                         warm=None, cfg: MeanConfig | None = None):
    """Best constant approximation error on ``data[l:r+1]`` (inclusive, 0-based).

    ``extra = (anchor, mu)`` adds ``mu * sum d(h, anchor_i)^p / p`` over the
    same index range.  Returns ``(eps, minimizer)``.
    """
    data = np.asarray(data, dtype=float)
    n = m.batch_shape(data)[0]
    if not 0 <= l <= r < n:
        raise IndexError(f"interval [{l}, {r}] outside signal of length {n}")
    pts = data[l:r + 1]
    w = np.ones(r - l + 1)
    if extra is not None:
        anchor, mu = extra
        anchor = np.asarray(anchor, dtype=float)
        if m.batch_shape(anchor) != (n,):
            raise ValueError("anchor must have the same length as the data")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        pts = np.concatenate([pts, anchor[l:r + 1]])
        w = np.concatenate([w, np.full(r - l + 1, float(mu))])
    if extra is None and l == r:
        return 0.0, data[l].copy()
    cfg = cfg or MeanConfig()
    init = data[l] if warm is None else warm
    out = frechet_batch(m, pts[None], w[None], p, cfg, init=init)
    return float(out["cost"][0]), out["point"][0]
